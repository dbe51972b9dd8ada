"""
Seedable stochastic drivers.

Every (trajectory, mode) pair owns one ``NoiseStream``. Seeds are derived from
the master seed with the SplitMix64 finalizer, which is a bijection on 64-bit
integers, so ``mix_seed(master, i)`` is distinct for every i < 2**64.

Normal variates come from numpy's PCG64 bit generator through
``Generator.standard_normal`` (ziggurat). Bit-reproducibility therefore holds
for a fixed numpy version on one platform.
"""
from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed: int, index: int) -> int:
    """Child seed number ``index`` of ``master_seed``."""
    return splitmix64((master_seed + GOLDEN_GAMMA * index) & MASK64)


@dataclass
class NoiseStream:
    """Single-owner stream of standard normal / uniform draws."""

    seed: int
    counter: int = 0
    _generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed) & MASK64
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def for_mode(cls, master_seed: int, trajectory_index: int, mode_index: int) -> "NoiseStream":
        return cls(mix_seed(mix_seed(master_seed, trajectory_index), mode_index))

    def normals(self, count: int) -> np.ndarray:
        self.counter += count
        return self._generator.standard_normal(count)

    def uniform(self) -> float:
        """Uniform variate in the open interval (0, 1)."""
        r = 0.0
        while r <= 0.0:
            self.counter += 1
            r = float(self._generator.random())
        return r


def draw_wiener(stream: NoiseStream, dt: float) -> float:
    """Real Wiener increment sqrt(dt) z; one draw."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return float(np.sqrt(dt) * stream.normals(1)[0])


def draw_complex_wiener(stream: NoiseStream, dt: float) -> complex:
    """(z1 + i z2) sqrt(dt/2), so that E[|dW_c|^2] = dt and E[dW_c^2] = 0; two draws."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    z = stream.normals(2)
    return complex(z[0], z[1]) * np.sqrt(dt / 2)


def draw_jump_threshold(stream: NoiseStream) -> float:
    """-ln r for r uniform in (0, 1)."""
    return float(-np.log(stream.uniform()))


def jump_decision(accumulated_rate_integral: float, threshold: float) -> bool:
    return accumulated_rate_integral >= threshold > 0


@dataclass
class JumpClock:
    """
    Waiting-time bookkeeping for one photodetected mode.

    The integral of the jump rate is accumulated step by step; a jump fires when
    it reaches the current threshold, after which the next threshold is taken.
    """

    thresholds: np.ndarray
    integral: float = 0.0
    jumps: int = 0

    @property
    def threshold(self) -> float:
        if self.jumps >= len(self.thresholds):
            return float("inf")
        return float(self.thresholds[self.jumps])

    def advance(self, rate: float, dt: float) -> bool:
        self.integral += max(rate, 0.0) * dt
        if jump_decision(self.integral, self.threshold):
            self.integral = 0.0
            self.jumps += 1
            return True
        return False
