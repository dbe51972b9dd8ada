"""
Binary layout of a NoisePath (little-endian):

    magic   4 bytes  b"CHNP"
    version u16
    dt      f64
    steps   u64
    modes   u32
    kinds   u8 per mode (0 none, 1 wiener, 2 complex, 3 jump)

followed, mode after mode, by
    wiener  steps x f64
    complex steps x (f64 re, f64 im)
    jump    steps x f64 thresholds, then steps x u8 jump flags
"""
import struct

import numpy as np

from app.noise.paths import DriverKind, NoisePath

MAGIC = b"CHNP"
VERSION = 1
HEADER = struct.Struct("<4sHdQI")

KIND_TAGS = {DriverKind.NONE: 0, DriverKind.WIENER: 1, DriverKind.COMPLEX: 2, DriverKind.JUMP: 3}
TAG_KINDS = {tag: kind for kind, tag in KIND_TAGS.items()}


def encode_path(path: NoisePath) -> bytes:
    chunks = [HEADER.pack(MAGIC, VERSION, path.dt, path.steps, path.n_modes)]
    chunks.append(bytes(KIND_TAGS[k] for k in path.kinds))
    for mode, (kind, values) in enumerate(zip(path.kinds, path.increments)):
        if kind == DriverKind.WIENER:
            chunks.append(np.asarray(values, dtype="<f8").tobytes())
        elif kind == DriverKind.COMPLEX:
            pairs = np.stack([values.real, values.imag], axis=1)
            chunks.append(pairs.astype("<f8").tobytes())
        elif kind == DriverKind.JUMP:
            chunks.append(np.asarray(values, dtype="<f8").tobytes())
            flags = path.jump_flags[mode] if mode < len(path.jump_flags) else np.zeros(path.steps, dtype=np.uint8)
            chunks.append(np.asarray(flags, dtype=np.uint8).tobytes())
    return b"".join(chunks)


def decode_path(blob: bytes) -> NoisePath:
    magic, version, dt, steps, n_modes = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError("not a noise path file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported noise path version {version}")
    offset = HEADER.size
    try:
        kinds = tuple(TAG_KINDS[tag] for tag in blob[offset:offset + n_modes])
    except KeyError as e:
        raise ValueError(f"unknown driver kind tag {e}") from e
    offset += n_modes

    increments, flags = [], []
    for kind in kinds:
        flag = np.zeros(0, dtype=np.uint8)
        if kind == DriverKind.WIENER:
            values = np.frombuffer(blob, dtype="<f8", count=steps, offset=offset).astype(float)
            offset += 8 * steps
        elif kind == DriverKind.COMPLEX:
            pairs = np.frombuffer(blob, dtype="<f8", count=2 * steps, offset=offset).reshape(steps, 2)
            values = pairs[:, 0] + 1j * pairs[:, 1]
            offset += 16 * steps
        elif kind == DriverKind.JUMP:
            values = np.frombuffer(blob, dtype="<f8", count=steps, offset=offset).astype(float)
            offset += 8 * steps
            flag = np.frombuffer(blob, dtype=np.uint8, count=steps, offset=offset).copy()
            offset += steps
        else:
            values = np.zeros(0)
        increments.append(values)
        flags.append(flag)
    return NoisePath(dt=dt, steps=steps, kinds=kinds, increments=tuple(increments), jump_flags=tuple(flags))
