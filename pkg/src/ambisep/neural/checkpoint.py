"""Binary checkpoint format.

Layout (little-endian)::

    b"AMBSEPCK"  u32 version
    str variant  str profile-json  str meta-json      (str = u32 length + utf-8)
    u32 n_tensors
    per tensor: str name, u32 rank, u32 dims[rank], float32 data (row-major)
    u32 crc32 of everything above

Tensors are stored as float32, so a save/load round trip is bit-exact for
float32 parameters.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, VariantMismatchError
from .model import SizeProfile, get_variant, init_aux_net, init_mask_net

MAGIC = b"AMBSEPCK"
VERSION = 1


@dataclass
class Checkpoint:
    variant: str
    profile: SizeProfile
    params: dict
    aux: dict | None = None
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # e.g. optimiser moments when resuming


def _str(s: str) -> bytes:
    b = s.encode()
    return struct.pack("<I", len(b)) + b


def save_checkpoint(path, params: dict, aux: dict | None, variant: str, profile: SizeProfile,
                    meta: dict | None = None, extra: dict | None = None) -> None:
    get_variant(variant)
    tensors = dict(params)
    if aux is not None:
        tensors.update(aux)
    if extra:
        tensors.update(extra)
    parts = [MAGIC, struct.pack("<I", VERSION), _str(variant),
             _str(json.dumps(asdict(profile), sort_keys=True)),
             _str(json.dumps(meta or {}, sort_keys=True)),
             struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        parts.append(_str(name))
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.astype("<f4").tobytes())
    body = b"".join(parts)
    try:
        Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot write checkpoint ({exc.strerror})") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("corrupt checkpoint: truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def str(self) -> str:
        return self.take(self.u32()).decode()


def load_checkpoint(path, expect_variant: str | None = None) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc.strerror})") from exc
    if len(data) < len(MAGIC) + 8 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: corrupt checkpoint (bad magic)")
    body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: corrupt checkpoint (checksum mismatch or truncated)")

    r = _Reader(body)
    r.take(len(MAGIC))
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    variant = r.str()
    try:
        profile = SizeProfile(**json.loads(r.str()))
        meta = json.loads(r.str())
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint header ({exc})") from exc
    tensors = {}
    for _ in range(r.u32()):
        name = r.str()
        rank = r.u32()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)

    if expect_variant is not None and variant != expect_variant:
        raise VariantMismatchError(f"{path}: variant mismatch (checkpoint {variant}, requested {expect_variant})")

    uses_aux = get_variant(variant).uses_aux
    ref = init_mask_net(profile, 0)
    if uses_aux:
        ref.update(init_aux_net(profile, 0))
    for name, arr in ref.items():
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name} for variant {variant}")
        if tensors[name].shape != arr.shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: {tensors[name].shape} vs profile {arr.shape}")
    params = {k: tensors.pop(k) for k in list(tensors) if k in ref and not k.startswith("aux.")}
    aux = {k: tensors.pop(k) for k in list(tensors) if k.startswith("aux.")} if uses_aux else None
    return Checkpoint(variant, profile, params, aux, meta, tensors)
