"""
Recorded noise paths shared by the hierarchy integrators and the full-system oracle.

Replay contract: at step s the integrators read ``path.increment(k, s)`` for
every mode k in ascending mode order. Jump modes store a sequence of waiting-time
thresholds; the j-th jump of that mode consumes ``thresholds[j]``.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Union

import numpy as np

from app.noise.streams import NoiseStream, draw_jump_threshold


class DriverKind(str, Enum):
    WIENER = "wiener"
    COMPLEX = "complex"
    JUMP = "jump"
    NONE = "none"


@dataclass(frozen=True)
class NoisePath:
    dt: float
    steps: int
    kinds: tuple[DriverKind, ...]
    increments: tuple[np.ndarray, ...]
    jump_flags: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if len(self.kinds) != len(self.increments):
            raise ValueError("one increment array per mode is required")
        for kind, values in zip(self.kinds, self.increments):
            expected = 0 if kind == DriverKind.NONE else self.steps
            if len(values) != expected:
                raise ValueError(f"{kind.value} driver holds {len(values)} values, expected {expected}")

    @property
    def n_modes(self) -> int:
        return len(self.kinds)

    def increment(self, mode: int, step: int):
        kind = self.kinds[mode]
        if kind == DriverKind.NONE:
            return 0.0
        return self.increments[mode][step]

    def step_increments(self, step: int) -> list:
        """Per-mode increments of one step in mode order (thresholds excluded)."""
        return [
            self.increments[k][step] if kind in (DriverKind.WIENER, DriverKind.COMPLEX) else 0.0
            for k, kind in enumerate(self.kinds)
        ]

    def thresholds(self, mode: int) -> np.ndarray:
        if self.kinds[mode] != DriverKind.JUMP:
            raise ValueError(f"mode {mode} is not photodetected")
        return self.increments[mode]

    def _flags_or_zeros(self, mode: int) -> np.ndarray:
        if mode < len(self.jump_flags):
            return np.asarray(self.jump_flags[mode], dtype=np.uint8)
        size = self.steps if self.kinds[mode] == DriverKind.JUMP else 0
        return np.zeros(size, dtype=np.uint8)

    def concat(self, other: "NoisePath") -> "NoisePath":
        """
        Path of ``self`` followed by ``other``, jump flags included.

        Each mode's increments (and jump thresholds) are appended segment after
        segment. Two segments recorded one after the other from a single
        stream are therefore not draw-for-draw equal to one longer recording:
        the stream is consumed mode after mode within each segment. Unused
        thresholds of the first segment still come before those of the second.
        """
        if other.dt != self.dt or other.kinds != self.kinds:
            raise ValueError("only paths with equal dt and driver kinds can be concatenated")
        flags = ()
        if self.jump_flags or other.jump_flags:
            flags = tuple(
                np.concatenate([self._flags_or_zeros(k), other._flags_or_zeros(k)]) for k in range(self.n_modes)
            )
        return NoisePath(
            dt=self.dt,
            steps=self.steps + other.steps,
            kinds=self.kinds,
            increments=tuple(np.concatenate([a, b]) for a, b in zip(self.increments, other.increments)),
            jump_flags=flags,
        )

    def with_jump_flags(self, flags: Sequence[np.ndarray]) -> "NoisePath":
        return NoisePath(self.dt, self.steps, self.kinds, self.increments, tuple(np.asarray(f, dtype=np.uint8) for f in flags))


def _record_mode(stream: NoiseStream, kind: DriverKind, steps: int, dt: float) -> np.ndarray:
    if kind == DriverKind.WIENER:
        return np.sqrt(dt) * stream.normals(steps)
    if kind == DriverKind.COMPLEX:
        z = stream.normals(2 * steps).reshape(steps, 2)
        return (z[:, 0] + 1j * z[:, 1]) * np.sqrt(dt / 2)
    if kind == DriverKind.JUMP:
        # at most one jump per step, so `steps` thresholds always suffice
        return np.array([draw_jump_threshold(stream) for _ in range(steps)])
    return np.zeros(0)


def record_path(
    streams: Union[NoiseStream, Sequence[NoiseStream]],
    steps: int,
    dt: float,
    kinds: Sequence[DriverKind],
) -> NoisePath:
    """
    Materialize a replayable path.

    Args:
        streams: one stream per mode, or a single stream consumed mode after mode
        steps: number of integration steps
        dt: step size
        kinds: driver kind per mode

    Returns:
        NoisePath holding ``steps`` increments per driven mode
    """
    if steps < 1 or dt <= 0 or not np.isfinite(steps * dt):
        raise ValueError(f"invalid path dimensions steps={steps}, dt={dt}")
    kinds = tuple(DriverKind(k) for k in kinds)
    if isinstance(streams, NoiseStream):
        streams = [streams] * len(kinds)
    if len(streams) != len(kinds):
        raise ValueError(f"{len(streams)} streams for {len(kinds)} modes")
    increments = tuple(_record_mode(s, kind, steps, dt) for s, kind in zip(streams, kinds))
    return NoisePath(dt=dt, steps=steps, kinds=kinds, increments=increments)


def record_trajectory_path(master_seed: int, trajectory_index: int, steps: int, dt: float, kinds: Sequence[DriverKind]) -> NoisePath:
    streams = [NoiseStream.for_mode(master_seed, trajectory_index, k) for k in range(len(kinds))]
    return record_path(streams, steps, dt, kinds)
