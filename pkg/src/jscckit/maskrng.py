"""Keyed, counter-based randomness for survival masks.

Every mask draw in the toolkit (and in the network simulator, which
reimplements this convention without sharing code) is a pure function of a
key tuple, so results never depend on batch order, worker count, or how many
draws happened before.  The derivation is deliberately simple enough to
reproduce in any language:

    msg  = "maskrng-v1|<seed>|<field>|<field>|..."   (UTF-8, fields stringified)
    u64  = first 8 bytes of SHA-256(msg), big-endian
    unit = (u64 >> 11) / 2**53                        (exact double in [0, 1))

Purpose tags used by this package:

    ("iid",  sample_id, block, counter)   per-block Bernoulli draws
    ("rank", sample_id, block, counter)   ranking draws for fixed-count masks

`block` is the 1-based block index, matching manifest numbering on the wire.
"""

from __future__ import annotations

import hashlib

STREAM_VERSION = "maskrng-v1"

_TWO_POW_MINUS_53 = 2.0 ** -53


def keyed_u64(seed: int, *fields: object) -> int:
    """Return a uniform 64-bit integer derived from (seed, fields)."""
    msg = "|".join([STREAM_VERSION, str(int(seed)), *(str(f) for f in fields)])
    digest = hashlib.sha256(msg.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def keyed_unit(seed: int, *fields: object) -> float:
    """Return a uniform double in [0, 1) derived from (seed, fields).

    The top 53 bits of the hash are used so the value is exactly
    representable in any IEEE-754 double implementation.
    """
    return (keyed_u64(seed, *fields) >> 11) * _TWO_POW_MINUS_53


def iid_unit(seed: int, sample_id: str, block: int, counter: int = 0) -> float:
    """Unit draw for an independent per-block erasure decision."""
    return keyed_unit(seed, "iid", sample_id, block, counter)


def rank_u64(seed: int, sample_id: str, block: int, counter: int = 0) -> int:
    """Ranking draw used to pick fixed-size erasure subsets."""
    return keyed_u64(seed, "rank", sample_id, block, counter)
