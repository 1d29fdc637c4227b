"""Feedback policies: map the estimated state to a corrective unitary.

All policies are full (unbounded-strength) corrections applied impulsively
once per step, computed from the filter state only:

* ``rotate_to_axis``  -- minimal rotation of the estimated Bloch vector onto
  the target direction (sin(theta), 0, cos(theta)) in the X-Z plane;
  theta = 0 is the measurement axis.
* ``orthogonal_plane`` -- minimal rotation of the Bloch vector into the X-Y
  plane (azimuth preserved), which doubles the asymptotic purification rate.
* ``local_rotate_to_axis`` -- two-qubit variant: each reduced state is
  rotated onto its own +Z axis, U = U_A (x) U_B.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import ConfigError, NotUnitaryError


class PolicyKind(enum.Enum):
    NONE = "none"
    ROTATE_TO_AXIS = "rotate-to-axis"
    ORTHOGONAL_PLANE = "orthogonal-plane"
    LOCAL_ROTATE_TO_AXIS = "local-rotate-to-axis"


@dataclass(frozen=True)
class FeedbackPolicy:
    kind: PolicyKind = PolicyKind.NONE
    offset_angle_deg: float = 0.0  # rotate-to-axis only; angle from the Z axis

    def __post_init__(self):
        if not (0.0 <= self.offset_angle_deg <= 90.0):
            raise ConfigError(
                f"offset angle must lie in [0, 90] degrees, got {self.offset_angle_deg}"
            )

    @classmethod
    def none(cls) -> "FeedbackPolicy":
        return cls(PolicyKind.NONE)

    @classmethod
    def rotate_to_axis(cls, offset_angle_deg: float = 0.0) -> "FeedbackPolicy":
        return cls(PolicyKind.ROTATE_TO_AXIS, offset_angle_deg)

    @classmethod
    def orthogonal_plane(cls) -> "FeedbackPolicy":
        return cls(PolicyKind.ORTHOGONAL_PLANE)

    @classmethod
    def local_rotate_to_axis(cls) -> "FeedbackPolicy":
        return cls(PolicyKind.LOCAL_ROTATE_TO_AXIS)


def kernel_policy(policy: FeedbackPolicy, dim: int) -> tuple[int, float, float]:
    """Map a policy to the (code, nx, nz) triple the kernels consume."""
    if policy.kind is PolicyKind.NONE:
        return _k.POL_NONE, 0.0, 1.0
    if policy.kind is PolicyKind.ROTATE_TO_AXIS:
        if dim != 2:
            raise ConfigError("rotate-to-axis feedback needs a single qubit")
        th = math.radians(policy.offset_angle_deg)
        return _k.POL_ROTATE_TO_AXIS, math.sin(th), math.cos(th)
    if policy.kind is PolicyKind.ORTHOGONAL_PLANE:
        if dim != 2:
            raise ConfigError("orthogonal-plane feedback needs a single qubit")
        return _k.POL_ORTHOGONAL_PLANE, 0.0, 1.0
    if policy.kind is PolicyKind.LOCAL_ROTATE_TO_AXIS:
        if dim != 4:
            raise ConfigError("local rotate-to-axis feedback needs two qubits")
        return _k.POL_LOCAL_ROTATE, 0.0, 1.0
    raise ConfigError(f"unknown policy kind {policy.kind!r}")


def bloch_vector(rho: np.ndarray) -> tuple[float, float, float]:
    """(Tr rho sigma_x, Tr rho sigma_y, Tr rho sigma_z) of a single qubit."""
    if rho.shape != (2, 2):
        raise ConfigError(f"bloch_vector expects a 2x2 state, got shape {rho.shape}")
    return _k.bloch2(np.ascontiguousarray(rho, dtype=np.complex128))


def control_unitary(rho_filter: np.ndarray, policy: FeedbackPolicy) -> np.ndarray:
    """The corrective unitary the policy prescribes for the estimated state."""
    dim = rho_filter.shape[0]
    pol_code, nx, nz = kernel_policy(policy, dim)
    u = np.eye(dim, dtype=np.complex128)
    if pol_code == _k.POL_NONE:
        return u
    wa = np.empty((2, 2), np.complex128)
    wb = np.empty((2, 2), np.complex128)
    rho = np.ascontiguousarray(rho_filter, dtype=np.complex128)
    applied = _k.control_unitary_into(rho, pol_code, nx, nz, u, wa, wb)
    if not applied:
        return np.eye(dim, dtype=np.complex128)
    return u


def apply_control(rho: np.ndarray, u: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Conjugate rho -> U rho U^dag after checking that U is unitary."""
    dim = rho.shape[0]
    defect = np.max(np.abs(u @ u.conj().T - np.eye(dim)))
    if defect > tol:
        raise NotUnitaryError(f"control matrix is not unitary: max |UU^dag - I| = {defect:.3e}")
    out = np.ascontiguousarray(rho, dtype=np.complex128).copy()
    work = np.empty_like(out)
    _k.apply_unitary(out, np.ascontiguousarray(u, dtype=np.complex128), work)
    return out
