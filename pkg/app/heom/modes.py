"""
Per-mode physical parameters and the feedback settings.
"""
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from app.core.errors import UnsupportedError
from app.core.operators import OperatorMatrix, dagger, is_hermitian
from app.noise.paths import DriverKind


class Detection(str, Enum):
    HOMODYNE = "homodyne"
    HETERODYNE = "heterodyne"
    PHOTODETECT = "photodetect"
    UNMONITORED = "unmonitored"

    @property
    def driver(self) -> DriverKind:
        return {
            Detection.HOMODYNE: DriverKind.WIENER,
            Detection.HETERODYNE: DriverKind.COMPLEX,
            Detection.PHOTODETECT: DriverKind.JUMP,
            Detection.UNMONITORED: DriverKind.NONE,
        }[self]


@dataclass(frozen=True)
class ModeSpec:
    """One lossy cavity mode coupled via g (L^dag a + L a^dag)."""

    g: float
    delta: float
    kappa: float
    coupling_op: OperatorMatrix
    detection: Detection = Detection.HOMODYNE

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not np.isreal(self.g):
            raise ValueError("g must be real; absorb phases into the coupling operator")
        object.__setattr__(self, "detection", Detection(self.detection))
        object.__setattr__(self, "coupling_op", np.asarray(self.coupling_op, dtype=complex))

    @property
    def w(self) -> complex:
        """Complex damping rate kappa + i Delta."""
        return complex(self.kappa, self.delta)

    @property
    def coupling_dag(self) -> OperatorMatrix:
        return dagger(self.coupling_op)

    @property
    def sqrt_2kappa(self) -> float:
        return float(np.sqrt(2 * self.kappa))


@dataclass(frozen=True)
class StrengthSchedule:
    """Piecewise-constant lambda(t): values[i] holds on [starts[i], starts[i+1])."""

    starts: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.starts) != len(self.values) or not self.starts:
            raise ValueError("schedule needs matching, nonempty starts and values")
        if list(self.starts) != sorted(self.starts):
            raise ValueError("schedule start times must be ascending")

    @classmethod
    def constant(cls, value: float) -> "StrengthSchedule":
        return cls((0.0,), (float(value),))

    def __call__(self, t: float) -> float:
        i = bisect_right(self.starts, t) - 1
        return self.values[max(i, 0)]

    def breakpoints(self) -> list[float]:
        return [t for t in self.starts[1:]]


@dataclass(frozen=True)
class FeedbackSpec:
    """
    Instantaneous current feedback H_fb = J_hom,k lambda(t) F on mode ``mode_index``.

    ``operator`` is F at unit strength; exactly one of ``schedule`` and
    ``dynamic`` selects lambda(t).
    """

    mode_index: int
    operator: OperatorMatrix
    schedule: Optional[StrengthSchedule] = None
    dynamic: bool = False
    hold_on_singular: bool = True

    def __post_init__(self):
        object.__setattr__(self, "operator", np.asarray(self.operator, dtype=complex))
        if not is_hermitian(self.operator):
            raise ValueError("feedback operator must be Hermitian")
        if self.dynamic == (self.schedule is not None):
            raise ValueError("feedback needs exactly one of a strength schedule or the dynamic rule")

    def validate_modes(self, modes: Sequence[ModeSpec]) -> None:
        if not 0 <= self.mode_index < len(modes):
            raise UnsupportedError(f"feedback references mode {self.mode_index} of {len(modes)}")
        if modes[self.mode_index].detection != Detection.HOMODYNE:
            raise UnsupportedError("feedback is only defined for a homodyne-monitored mode")
