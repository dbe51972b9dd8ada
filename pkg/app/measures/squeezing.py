from dataclasses import asdict, dataclass

import numpy as np

from app.core.errors import CheomError, DimensionError
from app.core.operators import OperatorMatrix, collective_spin

DIRECTION_TOL = 1e-12


@dataclass(frozen=True)
class SqueezingReport:
    xi2: float
    var_jz: float
    mean_jx: float
    mean_jy: float

    def to_dict(self) -> dict:
        return asdict(self)


def spin_squeezing(rho: OperatorMatrix, n_atoms: int) -> SqueezingReport:
    """
    Squeezing parameter xi_z^2 = N (Delta J_z)^2 / (<J_x>^2 + <J_y>^2).

    Args:
        rho: state on the symmetric sector of n_atoms spins
        n_atoms: number of spin-1/2 atoms

    Returns:
        SqueezingReport with the parameter and the moments it was built from
    """
    if rho.shape != (n_atoms + 1, n_atoms + 1):
        raise DimensionError(f"state of shape {rho.shape} is not on the j={n_atoms / 2} sector")
    jx, jy, jz = (collective_spin(n_atoms, axis) for axis in "xyz")
    mean_jx = float(np.real(np.trace(jx @ rho)))
    mean_jy = float(np.real(np.trace(jy @ rho)))
    mean_jz = float(np.real(np.trace(jz @ rho)))
    var_jz = max(float(np.real(np.trace(jz @ jz @ rho))) - mean_jz**2, 0.0)

    denominator = mean_jx**2 + mean_jy**2
    if denominator < DIRECTION_TOL:
        raise CheomError("undefined squeezing direction")
    return SqueezingReport(xi2=n_atoms * var_jz / denominator, var_jz=var_jz, mean_jx=mean_jx, mean_jy=mean_jy)
