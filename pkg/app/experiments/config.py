"""
Declarative scenario schema.

A scenario JSON file is validated by pydantic with unknown keys rejected;
every rate and frequency is given in units of the model's base frequency
(``unit_frequency``).
"""
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigError
from app.heom.modes import Detection


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModeConfig(StrictModel):
    g: Optional[float] = None
    delta: float = 0.0
    kappa: float = Field(gt=0)
    detection: Detection = Detection.HOMODYNE


class JaynesCummingsModel(StrictModel):
    """H_A = (omega/2) sigma_z + (epsilon/2) sigma_x, L = sigma_-; the atom starts excited."""

    kind: Literal["jaynes_cummings"] = "jaynes_cummings"
    omega: float = Field(default=1.0, gt=0)
    epsilon: float = 0.0


class DickeClustersModel(StrictModel):
    """H_A = Omega sum_i J_i^z, coupling sum_ik g_ik J_i^x (a_k + a_k^dag)."""

    kind: Literal["dicke_clusters"] = "dicke_clusters"
    omega: float = Field(default=1.0, gt=0)
    n_clusters: int = Field(ge=1)
    n_atoms: int = Field(ge=1)
    g_matrix: list[list[float]]
    initial_state: Literal["ground", "coherent_x"] = "ground"


class SpinSqueezingModel(StrictModel):
    """H_A = Omega J_z, L = i J_z, Delta = 0; coherent spin state along x."""

    kind: Literal["spin_squeezing"] = "spin_squeezing"
    omega: float = Field(default=1.0, gt=0)
    n_atoms: int = Field(ge=2)


AtomModel = Annotated[
    Union[JaynesCummingsModel, DickeClustersModel, SpinSqueezingModel],
    Field(discriminator="kind"),
]


class TruncationConfig(StrictModel):
    k_max: int = Field(default=4, ge=0)
    n_max: int = Field(default=8, ge=1)


class IntegratorConfig(StrictModel):
    scheme: Literal["ito", "stratonovich"] = "ito"
    dt: float = Field(default=1e-3, gt=0)
    t_final: float = Field(gt=0)
    record_every: int = Field(default=10, ge=1)


class ScheduleConfig(StrictModel):
    starts: list[float]
    values: list[float]

    @model_validator(mode="after")
    def _matching(self):
        if not self.starts or len(self.starts) != len(self.values):
            raise ValueError("starts and values must be nonempty and of equal length")
        if self.starts != sorted(self.starts):
            raise ValueError("starts must be ascending")
        return self


class FeedbackConfig(StrictModel):
    mode_index: int = Field(default=0, ge=0)
    schedule: Optional[ScheduleConfig] = None
    dynamic: bool = False
    hold_on_singular: bool = True

    @model_validator(mode="after")
    def _one_rule(self):
        if self.dynamic == (self.schedule is not None):
            raise ValueError("give exactly one of a strength schedule or dynamic=true")
        return self


class EnsembleConfig(StrictModel):
    trajectories: Optional[int] = Field(default=None, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)


class ConventionsConfig(StrictModel):
    jump_ordering_theta: Literal[0, 1] = 0
    heterodyne_sign: Literal[-1, 1] = -1
    redfield_convention: Literal["closure", "verbatim"] = "closure"


OBSERVABLES = (
    "trace",
    "purity",
    "entropy",
    "bloch",
    "excitation",
    "photon_number",
    "quadrature",
    "spin",
    "xi2",
    "jz_x",
    "lambda",
    "entropy_13",
    "mutual_information_13",
    "negativity_13",
)


class ScenarioConfig(StrictModel):
    name: str
    unit_frequency: Literal["omega", "Omega"] = "omega"
    model: AtomModel
    modes: list[ModeConfig] = Field(min_length=1)
    truncation: TruncationConfig = TruncationConfig()
    integrator: IntegratorConfig
    feedback: Optional[FeedbackConfig] = None
    ensemble: EnsembleConfig = EnsembleConfig()
    conventions: ConventionsConfig = ConventionsConfig()
    outputs: list[str] = Field(default_factory=lambda: ["purity", "entropy"])

    @field_validator("outputs")
    @classmethod
    def _known_outputs(cls, outputs):
        unknown = sorted(set(outputs) - set(OBSERVABLES))
        if unknown:
            raise ValueError(f"unknown observables {unknown}; available: {list(OBSERVABLES)}")
        return outputs

    @model_validator(mode="after")
    def _consistent(self):
        model = self.model
        if isinstance(model, DickeClustersModel):
            rows = model.g_matrix
            if len(rows) != model.n_clusters or any(len(row) != len(self.modes) for row in rows):
                raise ValueError(
                    f"g_matrix must be {model.n_clusters} x {len(self.modes)} (clusters x modes), "
                    f"got {len(rows)} x {[len(row) for row in rows]}"
                )
            if any(mode.g is not None for mode in self.modes):
                raise ValueError("Dicke-cluster couplings come from g_matrix; omit modes[k].g")
        else:
            if len(self.modes) != 1:
                raise ValueError(f"the {model.kind} model has exactly one cavity mode")
            if self.modes[0].g is None:
                raise ValueError(f"the {model.kind} model needs modes[0].g")
        if isinstance(model, SpinSqueezingModel) and self.modes[0].delta != 0.0:
            raise ValueError("the spin-squeezing model is resonant: modes[0].delta must be 0")
        if self.feedback is not None:
            if not isinstance(model, SpinSqueezingModel):
                raise ValueError("feedback is defined for the spin-squeezing model")
            if self.feedback.mode_index >= len(self.modes):
                raise ValueError(f"feedback.mode_index {self.feedback.mode_index} out of range")
            if self.modes[self.feedback.mode_index].detection != Detection.HOMODYNE:
                raise ValueError("feedback needs a homodyne-monitored mode")
        return self


def field_path(loc: tuple) -> str:
    """('modes', 0, 'kappa') -> 'modes[0].kappa'."""
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "<root>"


def _config_error(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    # drop the union tag pydantic inserts for discriminated models
    loc = tuple(part for part in first["loc"] if part not in ("jaynes_cummings", "dicke_clusters", "spin_squeezing"))
    return ConfigError(field_path(loc), first["msg"])


def load_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise _config_error(e) from e


def parse_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a scenario file; failures raise ConfigError naming the field path."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError("<file>", f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"malformed JSON at line {e.lineno}: {e.msg}") from e
    return load_config(data)
