"""Scalar state diagnostics: purity, fidelity, entropy, correlations, discord.

Entropies and correlation measures use log base 2 throughout, so all
information quantities are in bits.

The classical-correlations minimizer searches over orthogonal projector
pairs on qubit A, parametrized by a measurement axis on the (upper)
Bloch hemisphere: a coarse grid uniform in cos(theta) and phi followed by
alternating golden-section refinements.  Batched variants (`*_batch`)
amortize the search across many states in lock step; the scalar API wraps
a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativityError
from .linalg import partial_trace, require_hermitian
from .model import INSTABILITY_EIG_FLOOR, SIGMA_X, SIGMA_Y, SIGMA_Z

EIG_ZERO = 1e-12  # eigenvalues at or below this contribute nothing to entropies
GRID_N_COS = 48
GRID_N_PHI = 96
REFINE_TOL = 1e-9
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2)."""
    return float(np.einsum("ij,ji->", rho, rho).real)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """-Tr(rho log2 rho) in bits; eigenvalues below 1e-12 contribute 0."""
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return float(_entropy_from_eigs(w[None, :])[0])


def _entropy_from_eigs(w: np.ndarray) -> np.ndarray:
    """Shannon entropy (bits) along the last axis, ignoring p <= 1e-12."""
    p = np.where(w > EIG_ZERO, w, 1.0)
    return -np.sum(np.where(w > EIG_ZERO, w * np.log2(p), 0.0), axis=-1)


def _project_physical(rhos: np.ndarray, neg_tol: float) -> np.ndarray:
    """Clamp small negative eigenvalues and renormalize the spectrum.

    Euler-integrated states wander slightly outside the PSD cone; anything
    within ``neg_tol`` of it is projected back (eigenvalue clamp + trace
    rescale).  Beyond that the state has genuinely diverged.
    """
    w, v = np.linalg.eigh(rhos)
    wmin = w.min()
    if wmin < -neg_tol:
        raise NegativityError(
            f"state has eigenvalue {wmin:.4e} < -{neg_tol:.2e}; filter diverged"
        )
    w = np.clip(w, 0.0, None)
    w = w / w.sum(axis=-1, keepdims=True)
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def fidelity_batch(rhos0: np.ndarray, rhosc: np.ndarray, neg_tol: float = -INSTABILITY_EIG_FLOOR) -> np.ndarray:
    """Uhlmann fidelity |Tr sqrt(sqrt(rc) r0 sqrt(rc))|^2 along a batch."""
    r0 = _project_physical(rhos0, neg_tol)
    rc = _project_physical(rhosc, neg_tol)
    w, v = np.linalg.eigh(rc)
    sq = (v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    inner = sq @ r0 @ sq
    s = np.linalg.eigvalsh(inner)
    return np.sum(np.sqrt(np.clip(s, 0.0, None)), axis=-1) ** 2


def fidelity(rho0: np.ndarray, rhoc: np.ndarray) -> float:
    """Uhlmann fidelity between the true state and the estimate.

    Inputs are projected to the physical cone first (clamp tolerance equal
    to the engine's instability floor, 0.05); a state further out raises
    :class:`NegativityError`, signalling filter divergence upstream.
    """
    require_hermitian(rho0, what="fidelity argument")
    require_hermitian(rhoc, what="fidelity argument")
    if rho0.shape != rhoc.shape:
        raise ValueError(f"shape mismatch {rho0.shape} vs {rhoc.shape}")
    return float(fidelity_batch(rho0[None], rhoc[None])[0])


@dataclass(frozen=True)
class ProjectorPair:
    """Orthogonal projector pair (I +/- n.sigma)/2 on one qubit."""

    axis: np.ndarray
    plus: np.ndarray
    minus: np.ndarray


def projector_pair(axis) -> ProjectorPair:
    n = np.asarray(axis, dtype=np.float64)
    n = n / np.linalg.norm(n)
    ns = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    eye = np.eye(2)
    return ProjectorPair(axis=n, plus=0.5 * (eye + ns), minus=0.5 * (eye - ns))


def _axis_from_angles(u: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Unit vectors from cos(theta) = u and azimuth phi; stacked on the last axis."""
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    return np.stack([s * np.cos(phi), s * np.sin(phi), u], axis=-1)


def _measurement_blocks(rhos: np.ndarray):
    """Partial traces Tr_A[(P (x) I) rho] for P = I, sx, sy, sz.

    The conditional state of B after outcome a is affine in the measurement
    axis, so these four 2x2 blocks are all the minimizer needs per state.
    """
    r = rhos.reshape(-1, 2, 2, 2, 2)
    mi = np.einsum("nabad->nbd", r)
    mx = np.einsum("ac,ncbad->nbd", SIGMA_X, r)
    my = np.einsum("ac,ncbad->nbd", SIGMA_Y, r)
    mz = np.einsum("ac,ncbad->nbd", SIGMA_Z, r)
    return mi, np.stack([mx, my, mz], axis=1)


def _cond_entropy_terms(m_i, mdot):
    """sum_a p_a S(rho_B | a) from the affine block decomposition."""
    total = np.zeros(mdot.shape[:-2])
    for sign in (1.0, -1.0):
        m = 0.5 * (m_i + sign * mdot)
        a = m[..., 0, 0].real
        d = m[..., 1, 1].real
        p = a + d
        det = a * d - (m[..., 0, 1] * m[..., 1, 0]).real
        disc = np.clip(p * p - 4.0 * det, 0.0, None)
        root = np.sqrt(disc)
        safe_p = np.where(p > EIG_ZERO, p, 1.0)
        for lam in (0.5 * (p + root), 0.5 * (p - root)):
            frac = np.clip(lam / safe_p, 0.0, None)
            live = (p > EIG_ZERO) & (frac > EIG_ZERO)
            total += np.where(live, -lam * np.log2(np.where(live, frac, 1.0)), 0.0)
    return total


def _cond_entropy_grid(mi: np.ndarray, mv: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """(N, G) objective: states along rows, shared axis grid along columns."""
    mdot = np.einsum("gk,nkij->ngij", axes, mv)
    return _cond_entropy_terms(mi[:, None], mdot)


def _cond_entropy_paired(mi: np.ndarray, mv: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """(N,) objective: one axis per state."""
    mdot = np.einsum("nk,nkij->nij", axes, mv)
    return _cond_entropy_terms(mi, mdot)


def _golden_minimize(f, lo: np.ndarray, hi: np.ndarray, iters: int = 36):
    """Vectorized golden-section minimization over per-element intervals."""
    a = lo.copy()
    b = hi.copy()
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = f(x1)
    f2 = f(x2)
    for _ in range(iters):
        take1 = f1 < f2  # minimum bracketed in [a, x2]
        a = np.where(take1, a, x1)
        b = np.where(take1, x2, b)
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1 = f(x1)
        f2 = f(x2)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def classical_correlations_batch(rhos: np.ndarray) -> np.ndarray:
    """C(rho) = S(rho_B) - min over projective measurements on A of S(B|A)."""
    rhos = np.asarray(rhos, dtype=np.complex128)
    mi, mv = _measurement_blocks(rhos)
    n = mi.shape[0]
    sb = _entropy_from_eigs(np.linalg.eigvalsh(mi))

    # coarse grid, uniform in cos(theta) on the upper hemisphere and in phi
    du = 1.0 / GRID_N_COS
    dphi = 2.0 * np.pi / GRID_N_PHI
    ugrid = (np.arange(GRID_N_COS) + 0.5) * du
    pgrid = (np.arange(GRID_N_PHI) + 0.5) * dphi
    uu, pp = np.meshgrid(ugrid, pgrid, indexing="ij")
    axes = _axis_from_angles(uu.ravel(), pp.ravel())
    best = np.full(n, np.inf)
    best_u = np.zeros(n)
    best_phi = np.zeros(n)
    slab = 512
    for start in range(0, axes.shape[0], slab):
        chunk = axes[start : start + slab]
        vals = _cond_entropy_grid(mi, mv, chunk)
        idx = np.argmin(vals, axis=1)
        v = vals[np.arange(n), idx]
        upd = v < best
        best = np.where(upd, v, best)
        flat = start + idx
        best_u = np.where(upd, uu.ravel()[flat], best_u)
        best_phi = np.where(upd, pp.ravel()[flat], best_phi)

    # alternating golden-section refinement in cos(theta) then phi
    u_cur = best_u
    phi_cur = best_phi
    prev = best
    for _ in range(8):
        lo = np.clip(u_cur - du, 0.0, 1.0)
        hi = np.clip(u_cur + du, 0.0, 1.0)
        u_cur, _ = _golden_minimize(
            lambda x: _cond_entropy_paired(mi, mv, _axis_from_angles(x, phi_cur)), lo, hi
        )
        phi_cur, val = _golden_minimize(
            lambda x: _cond_entropy_paired(mi, mv, _axis_from_angles(u_cur, x)),
            phi_cur - dphi,
            phi_cur + dphi,
        )
        val = np.minimum(val, prev)
        improved = prev - val
        prev = val
        if np.max(improved) < REFINE_TOL:
            break
    return sb - prev


def classical_correlations(rho: np.ndarray) -> float:
    """Measurement-optimized entropy reduction of B given a projective
    measurement on A, in bits."""
    if rho.shape != (4, 4):
        raise ValueError(f"classical_correlations expects a 4x4 state, got {rho.shape}")
    return float(classical_correlations_batch(rho[None])[0])


def quantum_discord_batch(rhos: np.ndarray, ccorr: np.ndarray | None = None) -> np.ndarray:
    """D = S(A) + S(B) - S(AB) - C along a batch of two-qubit states."""
    rhos = np.asarray(rhos, dtype=np.complex128)
    r = rhos.reshape(-1, 2, 2, 2, 2)
    ra = np.einsum("nabcb->nac", r)
    rb = np.einsum("nabad->nbd", r)
    sa = _entropy_from_eigs(np.linalg.eigvalsh(ra))
    sb = _entropy_from_eigs(np.linalg.eigvalsh(rb))
    s = _entropy_from_eigs(np.linalg.eigvalsh(rhos))
    if ccorr is None:
        ccorr = classical_correlations_batch(rhos)
    return sa + sb - s - ccorr


def quantum_discord(rho: np.ndarray) -> float:
    """Quantum mutual information not captured by the best local measurement."""
    if rho.shape != (4, 4):
        raise ValueError(f"quantum_discord expects a 4x4 state, got {rho.shape}")
    return float(quantum_discord_batch(rho[None])[0])


def reduced_states(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(rho_A, rho_B) of a two-qubit state."""
    return partial_trace(rho, "A"), partial_trace(rho, "B")
