"""System builders: Hamiltonians, measurement channels, initial states.

Units: hbar = 1 and all rates are quoted in units of the qubit frequency
omega0 (one cycle = 2*pi/omega0).  Presets use omega0 = 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .linalg import kron, require_hermitian

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)

DENSITY_HERM_TOL = 1e-9
DENSITY_TRACE_TOL = 1e-9
INSTABILITY_PURITY_TOL = 1.0  # purity may exceed 1 by at most this much
INSTABILITY_EIG_FLOOR = -0.5  # eigenvalues may go negative by at most this much


class TwoQubitMode(enum.Enum):
    """Measurement topology for the two-qubit system."""

    ZZ = "zz"          # single joint sigma_z (x) sigma_z channel
    LOCAL_Z = "local-z"  # one sigma_z channel per qubit


@dataclass(frozen=True, eq=False)
class MeasurementChannel:
    """A Hermitian measured observable with its coupling strength.

    The collapse operator is sqrt(2*strength_k) * y_op; strength_k is in
    units of omega0.
    """

    y_op: np.ndarray
    strength_k: float

    def __post_init__(self):
        op = np.array(self.y_op, dtype=np.complex128)
        op.setflags(write=False)
        object.__setattr__(self, "y_op", op)
        require_hermitian(self.y_op, what="measurement operator")
        if self.strength_k < 0:
            raise ConfigError(f"measurement strength must be >= 0, got {self.strength_k}")


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Immutable system description shared read-only by all trajectories."""

    dim: int
    hamiltonian: np.ndarray
    channels: tuple[MeasurementChannel, ...]

    def __post_init__(self):
        h = np.array(self.hamiltonian, dtype=np.complex128)
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "channels", tuple(self.channels))
        require_hermitian(self.hamiltonian, what="Hamiltonian")
        if self.hamiltonian.shape != (self.dim, self.dim):
            raise ConfigError(
                f"Hamiltonian shape {self.hamiltonian.shape} does not match dim {self.dim}"
            )
        for ch in self.channels:
            if ch.y_op.shape != (self.dim, self.dim):
                raise ConfigError(
                    f"channel operator shape {ch.y_op.shape} does not match dim {self.dim}"
                )

    @property
    def n_channels(self) -> int:
        return len(self.channels)


def build_single_qubit(omega0: float, k1: float) -> SystemModel:
    """One qubit: H = omega0 * sigma_x / 2 with a sigma_z channel of strength k1."""
    if omega0 <= 0:
        raise ConfigError(f"omega0 must be positive, got {omega0}")
    h = 0.5 * omega0 * SIGMA_X
    return SystemModel(dim=2, hamiltonian=h, channels=(MeasurementChannel(SIGMA_Z, k1),))


def build_two_qubit(
    omega0: float,
    k1: float,
    kappa: float = 0.0,
    mode: TwoQubitMode = TwoQubitMode.ZZ,
) -> SystemModel:
    """Two qubits with local X rotations, optional ZZ coupling, and Z-type channels.

    ``mode=ZZ`` measures the joint parity sigma_z (x) sigma_z through a single
    channel; ``mode=LOCAL_Z`` measures each qubit's sigma_z separately with the
    same strength.
    """
    if omega0 <= 0:
        raise ConfigError(f"omega0 must be positive, got {omega0}")
    if kappa < 0:
        raise ConfigError(f"kappa must be >= 0, got {kappa}")
    h = 0.5 * omega0 * (kron(SIGMA_X, IDENTITY_2) + kron(IDENTITY_2, SIGMA_X))
    zz = kron(SIGMA_Z, SIGMA_Z)
    if kappa != 0.0:
        h = h + kappa * zz
    if mode is TwoQubitMode.ZZ:
        channels = (MeasurementChannel(zz, k1),)
    elif mode is TwoQubitMode.LOCAL_Z:
        channels = (
            MeasurementChannel(kron(SIGMA_Z, IDENTITY_2), k1),
            MeasurementChannel(kron(IDENTITY_2, SIGMA_Z), k1),
        )
    else:
        raise ConfigError(f"unknown two-qubit mode {mode!r}")
    return SystemModel(dim=4, hamiltonian=h, channels=channels)


def maximally_mixed(dim: int) -> np.ndarray:
    """I/dim, the zero-information state used to initialize the filter."""
    if dim not in (2, 4):
        raise ConfigError(f"dim must be 2 or 4, got {dim}")
    return np.eye(dim, dtype=np.complex128) / dim


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform pure state |psi><psi|.

    Draw order (stable contract): ``dim`` real normals, then ``dim``
    imaginary normals, from ``rng``.
    """
    if dim not in (2, 4):
        raise ConfigError(f"dim must be 2 or 4, got {dim}")
    re = rng.standard_normal(dim)
    im = rng.standard_normal(dim)
    v = re + 1j * im
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def validate_density_matrix(rho: np.ndarray, what: str = "density matrix") -> None:
    """Check the invariants every in-band state must satisfy.

    Hermitian and unit trace within 1e-9; purity at most
    1 + INSTABILITY_PURITY_TOL.  Positivity is deliberately not enforced
    (see the trajectory engine's instability handling).
    """
    require_hermitian(rho, DENSITY_HERM_TOL, what=what)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > DENSITY_TRACE_TOL:
        raise ConfigError(f"{what} trace {tr!r} differs from 1 by more than {DENSITY_TRACE_TOL}")
    pur = float(np.einsum("ij,ji->", rho, rho).real)
    if pur > 1.0 + INSTABILITY_PURITY_TOL:
        raise ConfigError(f"{what} purity {pur:.6f} exceeds 1 + {INSTABILITY_PURITY_TOL}")
