"""Wire format at the codec <-> network boundary.

A sample travels as two files: a human-readable JSON header listing block
positions, importance ranks, payload offsets and CRC-32 checksums, plus one
binary payload of the concatenated 8-bit blocks.  The network side operates
on headers alone; payload bytes matter only to the decoder.  Survival
information comes back as a mask-record JSON document.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

from .codec import Block, QuantizedBlock, dequantize, erased_block, quantized_block_from_bytes
from .errors import (
    FormatError,
    IntegrityError,
    InvalidInputError,
    PairingError,
    VersionError,
)

MANIFEST_FORMAT = "jscckit-block-manifest"
MASK_RECORD_FORMAT = "jscckit-mask-record"
FORMAT_VERSION = 1

HEADER_SUFFIX = ".manifest.json"
PAYLOAD_SUFFIX = ".payload.bin"
MASK_SUFFIX = ".mask.json"


@dataclass(frozen=True)
class BlockEntry:
    index: int
    importance_level: int
    payload_offset: int
    payload_length: int
    checksum: int


@dataclass(frozen=True)
class BlockManifest:
    sample_id: str
    k: int
    block_dims: tuple[int, int, int]
    blocks: tuple[BlockEntry, ...]
    payload_file: str
    profile_hint: tuple[float, ...] | None = None


@dataclass(frozen=True)
class MaskRecord:
    """Outcome of a network policy run for one sample."""

    sample_id: str
    bits: tuple[bool, ...]
    attempts: tuple[int, ...]
    policy_id: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))
        object.__setattr__(self, "attempts", tuple(int(a) for a in self.attempts))
        if len(self.bits) != len(self.attempts):
            raise InvalidInputError("bits and attempts must have equal length")
        for i, (bit, att) in enumerate(zip(self.bits, self.attempts)):
            if bit and att < 1:
                raise InvalidInputError(f"block {i + 1} delivered with {att} attempts")
            if att < 0:
                raise InvalidInputError(f"block {i + 1} has negative attempts")


def _validate_block_set(qblocks: list[QuantizedBlock]) -> list[QuantizedBlock]:
    if not qblocks:
        raise InvalidInputError("manifest needs at least one block")
    k = len(qblocks)
    indices = sorted(q.index for q in qblocks)
    if indices != list(range(1, k + 1)):
        raise FormatError(f"block indices must be exactly 1..{k}, got {indices}")
    levels = sorted(q.importance_level for q in qblocks)
    if levels != list(range(1, k + 1)):
        raise FormatError(f"importance levels must be a permutation of 1..{k}, got {levels}")
    dims = qblocks[0].values.shape
    for q in qblocks:
        if q.values.shape != dims:
            raise FormatError(
                f"block {q.index} has dims {q.values.shape}, expected {dims}"
            )
    return sorted(qblocks, key=lambda q: q.index)


def manifest_paths(out_stem) -> tuple[Path, Path]:
    stem = Path(out_stem)
    return stem.with_name(stem.name + HEADER_SUFFIX), stem.with_name(stem.name + PAYLOAD_SUFFIX)


def write_manifest(
    qblocks: list[QuantizedBlock],
    sample_id: str,
    out_stem,
    profile_hint=None,
) -> tuple[Path, Path]:
    """Write header + payload for one sample; returns the two paths."""
    ordered = _validate_block_set(qblocks)
    header_path, payload_path = manifest_paths(out_stem)
    payload = bytearray()
    entries = []
    for q in ordered:
        raw = q.payload
        entries.append(
            {
                "index": q.index,
                "importance_level": q.importance_level,
                "payload_offset": len(payload),
                "payload_length": len(raw),
                "checksum": zlib.crc32(raw) & 0xFFFFFFFF,
            }
        )
        payload.extend(raw)
    doc = {
        "format": MANIFEST_FORMAT,
        "format_version": FORMAT_VERSION,
        "sample_id": sample_id,
        "k": len(ordered),
        "block_dims": list(ordered[0].values.shape),
        "payload_file": payload_path.name,
        "profile_hint": list(profile_hint) if profile_hint is not None else None,
        "blocks": entries,
    }
    header_path.parent.mkdir(parents=True, exist_ok=True)
    with open(header_path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(payload_path, "wb") as f:
        f.write(bytes(payload))
    return header_path, payload_path


def read_manifest(header_path) -> tuple[BlockManifest, bytes]:
    """Read and fully validate a manifest; checksums are verified per block."""
    header_path = Path(header_path)
    with open(header_path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{header_path}: malformed manifest header") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{header_path}: not a block manifest")
    if doc.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"{header_path}: unsupported manifest version {doc.get('format_version')}"
        )
    try:
        entries = tuple(
            BlockEntry(
                index=int(b["index"]),
                importance_level=int(b["importance_level"]),
                payload_offset=int(b["payload_offset"]),
                payload_length=int(b["payload_length"]),
                checksum=int(b["checksum"]),
            )
            for b in doc["blocks"]
        )
        manifest = BlockManifest(
            sample_id=str(doc["sample_id"]),
            k=int(doc["k"]),
            block_dims=tuple(int(v) for v in doc["block_dims"]),
            blocks=entries,
            payload_file=str(doc["payload_file"]),
            profile_hint=tuple(doc["profile_hint"]) if doc.get("profile_hint") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{header_path}: missing or malformed field ({exc})") from exc

    if manifest.k != len(manifest.blocks):
        raise FormatError(f"{header_path}: k={manifest.k} but {len(manifest.blocks)} blocks")
    if sorted(b.index for b in manifest.blocks) != list(range(1, manifest.k + 1)):
        raise FormatError(f"{header_path}: block indices must be exactly 1..{manifest.k}")
    block_size = 1
    for d in manifest.block_dims:
        block_size *= d
    for b in manifest.blocks:
        if b.payload_length != block_size:
            raise FormatError(
                f"{header_path}: block {b.index} length {b.payload_length} != {block_size}"
            )

    payload_path = header_path.parent / manifest.payload_file
    with open(payload_path, "rb") as f:
        payload = f.read()
    end = max(b.payload_offset + b.payload_length for b in manifest.blocks)
    if len(payload) < end:
        raise FormatError(
            f"{payload_path}: payload truncated ({len(payload)} bytes, need {end})"
        )
    for b in manifest.blocks:
        raw = payload[b.payload_offset : b.payload_offset + b.payload_length]
        if (zlib.crc32(raw) & 0xFFFFFFFF) != b.checksum:
            raise IntegrityError(f"block {b.index}: checksum mismatch")
    return manifest, payload


def apply_mask_record(manifest: BlockManifest, payload: bytes, rec: MaskRecord) -> list[Block]:
    """Turn payload + survival record into decoder-ready blocks.

    Only the byte ranges of received blocks are touched; dropped blocks come
    back as erased placeholders without reading their payload.
    """
    if rec.sample_id != manifest.sample_id:
        raise PairingError(
            f"mask record is for {rec.sample_id!r}, manifest for {manifest.sample_id!r}"
        )
    if len(rec.bits) != manifest.k:
        raise InvalidInputError(
            f"mask record has {len(rec.bits)} bits, manifest has k={manifest.k}"
        )
    blocks: list[Block] = []
    for entry in sorted(manifest.blocks, key=lambda b: b.index):
        if rec.bits[entry.index - 1]:
            raw = payload[entry.payload_offset : entry.payload_offset + entry.payload_length]
            qb = quantized_block_from_bytes(
                raw, manifest.block_dims, entry.index, entry.importance_level
            )
            blocks.append(dequantize(qb))
        else:
            blocks.append(erased_block(manifest.block_dims))
    return blocks


def write_mask_record(rec: MaskRecord, path) -> Path:
    path = Path(path)
    doc = {
        "format": MASK_RECORD_FORMAT,
        "format_version": FORMAT_VERSION,
        "sample_id": rec.sample_id,
        "bits": list(rec.bits),
        "attempts": list(rec.attempts),
        "policy_id": rec.policy_id,
        "seed": rec.seed,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_mask_record(path) -> MaskRecord:
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed mask record") from exc
    if doc.get("format") != MASK_RECORD_FORMAT:
        raise FormatError(f"{path}: not a mask record")
    if doc.get("format_version") != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported mask record version")
    try:
        return MaskRecord(
            sample_id=str(doc["sample_id"]),
            bits=tuple(doc["bits"]),
            attempts=tuple(doc["attempts"]),
            policy_id=str(doc["policy_id"]),
            seed=int(doc["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: missing or malformed field ({exc})") from exc
