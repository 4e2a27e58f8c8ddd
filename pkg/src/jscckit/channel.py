"""Multi-level block-erasure channel: profiles, masks, and the training-time map.

A channel is described by an erasure profile (one erasure probability per
block).  At inference the channel is a survival mask; during training the
same semantics are applied as a differentiable map so gradients flow through
received blocks and vanish on erased ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .maskrng import iid_unit, rank_u64

ERASED_VALUE = -1.0

# Default non-uniform profiles for the congestion experiments.  Both are
# strictly increasing with the first block always delivered; "steep" pushes
# nearly all information into the early blocks, "shallow" spreads it out.
SHALLOW_PROFILE = (0.00, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14)
STEEP_PROFILE = (0.00, 0.05, 0.15, 0.30, 0.50, 0.70, 0.85, 0.95)
VIDEO_LADDER_PROFILE = (0.00, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07)


@dataclass(frozen=True)
class ErasureProfile:
    """Per-block erasure probabilities; the codec <-> network contract."""

    eps: tuple[float, ...]

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        if len(eps) == 0:
            raise InvalidInputError("profile must have at least one block")
        for i, e in enumerate(eps):
            if not (0.0 <= e <= 1.0) or not np.isfinite(e):
                raise InvalidInputError(f"profile entry {i} = {e} outside [0, 1]")
        object.__setattr__(self, "eps", eps)

    @property
    def k(self) -> int:
        return len(self.eps)

    def is_uniform(self) -> bool:
        return all(e == self.eps[0] for e in self.eps)

    def is_increasing(self) -> bool:
        return all(a < b for a, b in zip(self.eps, self.eps[1:]))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eps, dtype=np.float64)


@dataclass(frozen=True)
class SurvivalMask:
    """Which blocks arrived (True = received), plus the seed that drew it."""

    bits: tuple[bool, ...]
    seed_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @property
    def k(self) -> int:
        return len(self.bits)

    @property
    def received_count(self) -> int:
        return sum(self.bits)

    def received_prefix(self) -> int:
        """Length of the longest all-received prefix."""
        n = 0
        for b in self.bits:
            if not b:
                break
            n += 1
        return n


def uniform_profile(k: int, eps: float) -> ErasureProfile:
    return ErasureProfile((float(eps),) * k)


def profile_preset(name: str, k: int = 8) -> ErasureProfile:
    """Expand a named preset ("uniform:x", "shallow", "steep", "video-ladder")."""
    if name.startswith("uniform:"):
        try:
            eps = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise InvalidConfigError(f"bad uniform preset {name!r}") from exc
        return uniform_profile(k, eps)
    presets = {
        "shallow": SHALLOW_PROFILE,
        "steep": STEEP_PROFILE,
        "video-ladder": VIDEO_LADDER_PROFILE,
    }
    if name not in presets:
        raise InvalidConfigError(f"unknown profile preset {name!r}")
    vec = presets[name]
    if k != len(vec):
        raise InvalidConfigError(f"preset {name!r} is defined for k={len(vec)}, got k={k}")
    return ErasureProfile(vec)


def sample_mask(
    profile: ErasureProfile,
    rng_seed: int,
    *,
    sample_id: str = "0",
    counter: int = 0,
) -> SurvivalMask:
    """Draw an independent survival mask: block i is erased with prob eps_i.

    Deterministic in (rng_seed, sample_id, counter); block draws use the
    keyed stream so the same tuple always yields the same mask.
    """
    bits = tuple(
        not (iid_unit(rng_seed, sample_id, i + 1, counter) < e)
        for i, e in enumerate(profile.eps)
    )
    return SurvivalMask(bits, seed_used=rng_seed)


def apply_channel_training(blocks, mask: SurvivalMask):
    """Differentiable erasure: received blocks pass through untouched, erased
    blocks become the constant sentinel with zero gradient.

    Works on numpy arrays and torch tensors alike; the erased branch is
    computed as ``b * 0 - 1`` so autograd sees a connected graph with an
    exactly-zero derivative.
    """
    if len(blocks) != mask.k:
        raise InvalidInputError(f"{len(blocks)} blocks vs mask of length {mask.k}")
    return [b if bit else b * 0.0 + ERASED_VALUE for b, bit in zip(blocks, mask.bits)]


def fixed_count_mask(
    k: int,
    e: int,
    rng_seed: int,
    *,
    sample_id: str = "0",
    counter: int = 0,
) -> SurvivalMask:
    """Erase exactly `e` of `k` blocks, uniformly over all C(k, e) subsets.

    Each block gets an i.i.d. ranking draw and the `e` smallest are erased,
    which is uniform over subsets and bit-reproducible from the key alone.
    """
    if not (0 <= e <= k):
        raise InvalidInputError(f"cannot erase {e} of {k} blocks")
    ranks = [(rank_u64(rng_seed, sample_id, i + 1, counter), i) for i in range(k)]
    erased = {i for _, i in sorted(ranks)[:e]}
    bits = tuple(i not in erased for i in range(k))
    return SurvivalMask(bits, seed_used=rng_seed)


def tail_keep_mask(k: int, m: int) -> SurvivalMask:
    """Keep the first `m` blocks, drop the rest (congestion tail drop)."""
    if not (0 <= m <= k):
        raise InvalidInputError(f"cannot keep {m} of {k} blocks")
    return SurvivalMask(tuple(i < m for i in range(k)))


def scale_profile(profile: ErasureProfile, a: float) -> ErasureProfile:
    """Scale a profile by severity `a`, capping entries at 1."""
    if not (a >= 0):
        raise InvalidInputError(f"severity must be >= 0, got {a}")
    return ErasureProfile(tuple(min(a * e, 1.0) for e in profile.eps))


def compose_masks(m1: SurvivalMask, m2: SurvivalMask) -> SurvivalMask:
    """A block survives only if it survives both masks (bitwise AND)."""
    if m1.k != m2.k:
        raise InvalidInputError(f"mask lengths differ: {m1.k} vs {m2.k}")
    bits = tuple(a and b for a, b in zip(m1.bits, m2.bits))
    return SurvivalMask(bits, seed_used=m1.seed_used)


def erase_latent_channels(z: np.ndarray, bits, alpha: int) -> np.ndarray:
    """Apply a survival mask to a (k*alpha, beta, gamma) latent array."""
    k = len(bits)
    if z.shape[0] != k * alpha:
        raise InvalidInputError(f"latent has {z.shape[0]} channels, expected {k * alpha}")
    out = z.copy()
    for i, bit in enumerate(bits):
        if not bit:
            out[i * alpha : (i + 1) * alpha] = ERASED_VALUE
    return out
