import numpy as np
from scipy.stats import norm

from app.core.operators import collective_spin, pauli

LINEAR_OBSERVABLES = ("bloch", "spin")


def linear_series(states: np.ndarray, name: str) -> dict:
    """Series of a linear observable evaluated on a stack of atom states (T, d, d)."""
    if name == "bloch":
        ops = {f"bloch.{axis}": pauli(axis) for axis in "xyz"}
    elif name == "spin":
        n_atoms = states.shape[-1] - 1
        ops = {f"spin.{axis}": collective_spin(n_atoms, axis) for axis in "xyz"}
    else:
        raise ValueError(f"'{name}' is not linear in the state; choose from {LINEAR_OBSERVABLES}")
    return {column: np.einsum("ij,tji->t", op, states).real for column, op in ops.items()}


class EnsembleConsistencyChecker:
    """Checks ensemble means against a reference series with z-scores"""

    def __init__(self, sigma_threshold=3.0, stderr_floor=1e-12):
        """
        Args:
            sigma_threshold: allowed deviation in standard errors (default: 3)
            stderr_floor: lower bound on the standard error used for z-scores
        """
        self.threshold = sigma_threshold
        self.stderr_floor = stderr_floor

    def check(self, mean: dict, stderr: dict, reference: dict, checkpoints=None):
        """
        Compare ensemble means with reference values per series.

        Args:
            mean: series name -> ensemble mean array
            stderr: series name -> standard error array
            reference: series name -> reference array on the same grid
            checkpoints: grid indices to test (default: all)

        Returns:
            Dictionary with per-series z-scores and a summary
        """
        common = sorted(set(mean) & set(reference))
        if not common:
            raise RuntimeError("No common series between ensemble and reference")

        report = {}
        inconsistent = 0
        for name in common:
            idx = slice(None) if checkpoints is None else np.asarray(checkpoints)
            m = np.asarray(mean[name])[idx]
            ref = np.asarray(reference[name])[idx]
            se = np.maximum(np.asarray(stderr[name])[idx], self.stderr_floor)
            z = np.abs(m - ref) / se
            max_z = float(np.max(z))
            bad = max_z > self.threshold
            if bad:
                inconsistent += 1
            report[name] = {
                "max_z": max_z,
                "max_abs_error": float(np.max(np.abs(m - ref))),
                "p_value": float(2 * norm.sf(max_z)),
                "consistent": not bad,
            }

        report["summary"] = {
            "total_series": len(common),
            "inconsistent_series": inconsistent,
            "consistent": inconsistent == 0,
        }
        return report


def evenly_spaced_checkpoints(length: int, count: int = 10) -> np.ndarray:
    """``count`` grid indices spread over (0, length - 1], skipping t = 0."""
    return np.unique(np.linspace(0, length - 1, count + 1).round().astype(int)[1:])
