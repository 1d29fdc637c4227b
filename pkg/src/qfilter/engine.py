"""Trajectory engine: coupled truth/filter Euler-Maruyama stepping.

The per-step physics lives in :mod:`qfilter._kernels`; this module provides
the typed single-trajectory API on top of it.  The ensemble runner drives
the same kernels in blocks, so a trajectory advanced one step at a time
here is bit-identical to the same trajectory inside an ensemble.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .errors import ConfigError
from .feedback import FeedbackPolicy, kernel_policy
from .model import SystemModel, maximally_mixed

INSTABILITY_PURITY_CEIL = _k.PURITY_CEIL
INSTABILITY_EIG_FLOOR = _k.EIG_FLOOR


class RecordMode(enum.Enum):
    """What the filter is driven with: the analog record or its sign bits."""

    FULL = "full"
    ONE_BIT = "one-bit"


@dataclass(frozen=True)
class StepConfig:
    dt: float
    record_mode: RecordMode = RecordMode.FULL

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True, eq=False)
class RecordSample:
    """One time step of measurement output, per channel."""

    analog: np.ndarray     # dy_j = sqrt(8 k_j) <y_j> dt + dW_j
    bit: np.ndarray        # sign(analog), with sgn(0) = +1
    quantized: np.ndarray  # bit * sqrt(dt)


@dataclass
class TrajectoryState:
    rho_true: np.ndarray
    rho_filter: np.ndarray
    t: float
    step_index: int
    rng: np.random.Generator
    instability: bool = False


def make_trajectory_state(
    model: SystemModel,
    rng: np.random.Generator,
    initial_true: np.ndarray | None = None,
) -> TrajectoryState:
    """Fresh trajectory: pure truth state, maximally mixed filter.

    When ``initial_true`` is None a Haar-random pure state is drawn from
    ``rng`` (consuming 2*dim normals before any noise draws).
    """
    from .model import random_pure_state

    if initial_true is None:
        rho_t = random_pure_state(model.dim, rng)
    else:
        rho_t = np.array(initial_true, dtype=np.complex128)
        if rho_t.shape != (model.dim, model.dim):
            raise ConfigError(
                f"initial state shape {rho_t.shape} does not match dim {model.dim}"
            )
    _k.hermitize(rho_t)
    return TrajectoryState(
        rho_true=rho_t,
        rho_filter=maximally_mixed(model.dim),
        t=0.0,
        step_index=0,
        rng=rng,
    )


class ModelArrays:
    """Contiguous kernel-ready views of a SystemModel (cached per model)."""

    def __init__(self, model: SystemModel):
        self.dim = model.dim
        self.h = np.ascontiguousarray(model.hamiltonian, dtype=np.complex128)
        ys = np.stack([ch.y_op for ch in model.channels]).astype(np.complex128)
        self.ys = np.ascontiguousarray(ys)
        y2s = np.stack([y @ y for y in ys])
        self.y2s = np.ascontiguousarray(y2s)
        self.ks = np.array([ch.strength_k for ch in model.channels], dtype=np.float64)
        self.s2k = np.sqrt(2.0 * self.ks)
        self.s8k = np.sqrt(8.0 * self.ks)
        self.n_channels = len(model.channels)


_MODEL_CACHE: dict[int, tuple[SystemModel, ModelArrays]] = {}


def model_arrays(model: SystemModel) -> ModelArrays:
    entry = _MODEL_CACHE.get(id(model))
    if entry is not None and entry[0] is model:
        return entry[1]
    arrs = ModelArrays(model)
    _MODEL_CACHE[id(model)] = (model, arrs)
    return arrs


def _scratch(dim: int):
    return (
        np.empty((dim, dim), np.complex128),
        np.empty((dim, dim), np.complex128),
        np.empty((dim, dim), np.complex128),
    )


def expectations(model: SystemModel, rho: np.ndarray) -> np.ndarray:
    """Re Tr(y_j rho) for every channel."""
    arrs = model_arrays(model)
    return np.array([_k.expectation(arrs.ys[c], rho) for c in range(arrs.n_channels)])


def renormalize(rho: np.ndarray) -> np.ndarray:
    """Symmetrize and rescale to unit trace.

    The Euler step preserves the trace only to rounding, so this runs after
    every step.  A trace outside [0.5, 1.5] means the step has blown up.
    """
    out = np.array(rho, dtype=np.complex128)
    tr = _k.hermitize_normalize(out)
    if not (_k.TRACE_LO <= tr <= _k.TRACE_HI):
        raise ConfigError(
            f"trace {tr:.6f} outside [{_k.TRACE_LO}, {_k.TRACE_HI}]; state has diverged"
        )
    return out


def is_unstable(
    rho: np.ndarray,
    purity_ceil: float = INSTABILITY_PURITY_CEIL,
    eig_floor: float = INSTABILITY_EIG_FLOOR,
) -> bool:
    """Purity above the ceiling or an eigenvalue below the floor."""
    return bool(
        _k.state_unstable(
            np.ascontiguousarray(rho, dtype=np.complex128), purity_ceil, eig_floor
        )
    )


def sme_step(
    rho: np.ndarray, model: SystemModel, dW: np.ndarray, dt: float
) -> np.ndarray:
    """One Euler-Maruyama step of the stochastic master equation.

    The same generator serves both the truth equation (driven by Wiener
    increments) and the filter equation (driven by innovations); operator
    expectations are taken in the input state.  The result is hermitized
    and trace-renormalized.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    arrs = model_arrays(model)
    dw = np.asarray(dW, dtype=np.float64).reshape(arrs.n_channels)
    if not np.all(np.isfinite(dw)):
        raise ConfigError("noise increments must be finite")
    work = np.array(rho, dtype=np.complex128)
    ey = np.array([_k.expectation(arrs.ys[c], work) for c in range(arrs.n_channels)])
    out, w1, w2 = _scratch(arrs.dim)
    _k.euler_into(work, arrs.h, arrs.ys, arrs.y2s, arrs.ks, arrs.s2k, ey, dw, dt, out, w1, w2)
    return work


def quantize_one_bit(analog: float, dt: float) -> tuple[int, float]:
    """Sign-quantize one analog increment; sgn(0) = +1."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    bit = 1 if analog >= 0.0 else -1
    return bit, bit * math.sqrt(dt)


def generate_record(
    rho_true: np.ndarray, model: SystemModel, dW: np.ndarray, dt: float
) -> RecordSample:
    """Synthesize the per-channel measurement increments for one step.

    ``rho_true`` must be the pre-step truth state and ``dW`` the same
    Wiener increments fed to the truth update: the shared noise is the
    correlation the filter exploits.
    """
    arrs = model_arrays(model)
    dw = np.asarray(dW, dtype=np.float64).reshape(arrs.n_channels)
    ey = expectations(model, np.asarray(rho_true, dtype=np.complex128))
    analog = arrs.s8k * ey * dt + dw
    bits = np.where(analog >= 0.0, 1, -1).astype(np.int8)
    quantized = bits * math.sqrt(dt)
    return RecordSample(analog=analog, bit=bits, quantized=quantized)


def innovation(effective_increment: float, expected_mean: float, k: float, dt: float) -> float:
    """Received increment minus the filter's predicted increment."""
    return effective_increment - math.sqrt(8.0 * k) * expected_mean * dt


def advance_trajectory(
    state: TrajectoryState,
    model: SystemModel,
    cfg: StepConfig,
    policy: FeedbackPolicy,
) -> TrajectoryState:
    """Advance one coupled step: noise, truth, record, innovation, filter, control.

    A trajectory whose instability flag is set is frozen and returned
    unchanged.  Noise draws come from ``state.rng`` (one standard normal
    per channel per step), so a fixed stream reproduces bit-identical
    trajectories.
    """
    if state.instability:
        return state
    arrs = model_arrays(model)
    pol_code, pol_nx, pol_nz = kernel_policy(policy, model.dim)
    z = state.rng.standard_normal(arrs.n_channels)
    rho_t = np.array(state.rho_true, dtype=np.complex128)
    rho_f = np.array(state.rho_filter, dtype=np.complex128)
    out, w1, w2 = _scratch(arrs.dim)
    u = np.empty((arrs.dim, arrs.dim), np.complex128)
    wa = np.empty((2, 2), np.complex128)
    wb = np.empty((2, 2), np.complex128)
    ey_t = np.empty(arrs.n_channels, np.float64)
    ey_f = np.empty(arrs.n_channels, np.float64)
    dwv = np.empty(arrs.n_channels, np.float64)
    dvv = np.empty(arrs.n_channels, np.float64)
    bits_row = np.empty(arrs.n_channels, np.int8)
    flag = _k.step_pair(
        rho_t, rho_f, z, arrs.h, arrs.ys, arrs.y2s, arrs.ks, arrs.s2k, arrs.s8k,
        cfg.dt, math.sqrt(cfg.dt),
        cfg.record_mode is RecordMode.ONE_BIT,
        pol_code, pol_nx, pol_nz,
        INSTABILITY_PURITY_CEIL, INSTABILITY_EIG_FLOOR,
        out, w1, w2, u, wa, wb, ey_t, ey_f, dwv, dvv, bits_row,
    )
    step_index = state.step_index + 1
    return replace(
        state,
        rho_true=rho_t,
        rho_filter=rho_f,
        t=step_index * cfg.dt,
        step_index=step_index,
        instability=bool(flag),
    )
