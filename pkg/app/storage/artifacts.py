"""
Atomic artifact writers: CSV tables, the JSON manifest and binary noise paths.

Every file is written to a temporary file in the target directory and moved
into place with ``os.replace``.
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from app.config import SOFTWARE_VERSION
from app.experiments.config import ScenarioConfig
from app.noise.codec import encode_path
from app.noise.paths import NoisePath

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"


def _atomic_write(path: Path, payload: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except Exception as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise RuntimeError(f"Writing {path} failed: {e}") from e
    logger.info("wrote %s", path)
    return path


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with 17 significant digits, first column ``t`` when present."""
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return _atomic_write(Path(path), text.encode("utf-8"))


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_json(data: dict, path: Union[str, Path]) -> Path:
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=True) + "\n"
    return _atomic_write(Path(path), text.encode("utf-8"))


def write_noise_path(path: NoisePath, target: Union[str, Path]) -> Path:
    return _atomic_write(Path(target), encode_path(path))


def build_manifest(
    config: ScenarioConfig,
    subcommand: str,
    trajectories: Optional[int] = None,
    overrides: Optional[dict] = None,
    wall_time_s: float = 0.0,
    extra: Optional[dict] = None,
) -> dict:
    """
    Everything needed to reproduce a run.

    Args:
        config: the validated config after overrides
        subcommand: CLI subcommand that produced the artifacts
        trajectories: trajectory count actually used
        overrides: CLI overrides as given (None values dropped)
        wall_time_s: elapsed wall time
        extra: subcommand-specific fields (scan summary, switching times, ...)

    Returns:
        manifest dict
    """
    conventions = config.conventions
    manifest = {
        "config": config.model_dump(mode="json"),
        "master_seed": config.ensemble.master_seed,
        "trajectories": trajectories,
        "conventions": {
            "jump_ordering_theta": conventions.jump_ordering_theta,
            "heterodyne_sign": conventions.heterodyne_sign,
            "redfield_convention": conventions.redfield_convention,
        },
        "overrides": {k: v for k, v in (overrides or {}).items() if v is not None},
        "software_version": SOFTWARE_VERSION,
        "wall_time_s": float(wall_time_s),
        "subcommand": subcommand,
        "time_unit": f"1/{config.unit_frequency}",
    }
    if extra:
        manifest["extra"] = extra
    return manifest


def write_manifest(manifest: dict, output_dir: Union[str, Path]) -> Path:
    return write_json(manifest, Path(output_dir) / MANIFEST_NAME)


def read_manifest(output_dir: Union[str, Path]) -> dict:
    path = Path(output_dir) / MANIFEST_NAME
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as e:
        raise RuntimeError(f"No manifest in {output_dir}") from e
