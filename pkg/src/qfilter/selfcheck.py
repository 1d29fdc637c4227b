"""Built-in invariant checks for `qfilter validate`.

Fast spot checks of the numerical core: linear algebra contracts, the
quantizer and record codec, determinism of the ensemble runner, and two
physics invariants (unitary cycle closure and full-record
self-consistency).  Exit code 0 when everything passes.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import _kernels as _k
from .csvio import render_csv
from .engine import RecordMode, StepConfig, advance_trajectory, make_trajectory_state, sme_step
from .ensemble import EnsembleConfig, derive_stream, run_ensemble
from .feedback import FeedbackPolicy
from .linalg import hermitian_eig, kron, matrix_sqrt_psd, partial_trace
from .metrics import fidelity
from .model import build_single_qubit, random_pure_state
from .obr import read_obr_file, write_obr_file


def _check_eig_reconstruction():
    rng = np.random.default_rng(0)
    worst = 0.0
    for dim in (2, 4):
        for _ in range(50):
            a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            m = 0.5 * (a + a.conj().T)
            w, v = hermitian_eig(m)
            worst = max(worst, np.max(np.abs((v * w) @ v.conj().T - m)))
    return worst <= 1e-10, f"max reconstruction error {worst:.2e}"


def _check_sqrt_psd():
    rng = np.random.default_rng(1)
    worst = 0.0
    for dim in (2, 4):
        for _ in range(50):
            a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            m = a @ a.conj().T
            r = matrix_sqrt_psd(m)
            worst = max(worst, np.max(np.abs(r @ r - m)))
    return worst <= 1e-8, f"max multiply-back error {worst:.2e}"


def _check_kron_ptrace():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    ra = a @ a.conj().T
    ra /= np.trace(ra)
    b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    rb = b @ b.conj().T
    rb /= np.trace(rb)
    err = np.max(np.abs(partial_trace(kron(ra, rb), "A") - ra))
    return err <= 1e-12, f"partial_trace(kron) error {err:.2e}"


def _check_quantizer():
    from .engine import quantize_one_bit

    ok = quantize_one_bit(0.0, 0.04) == (1, 0.2)
    ok = ok and quantize_one_bit(-0.03, 0.01) == (-1, -0.1)
    return ok, "sign conventions (sgn(0)=+1, magnitude sqrt(dt))"


def _check_obr_roundtrip():
    rng = np.random.default_rng(3)
    bits = np.where(rng.random((321, 2)) < 0.5, 1, -1).astype(np.int8)
    with tempfile.TemporaryDirectory() as td:
        path = Path(td) / "x.obr"
        write_obr_file(bits, 0.01, path)
        back, dt = read_obr_file(path)
    return bool(np.array_equal(back, bits) and dt == 0.01), "write/read round trip"


def _check_determinism():
    model = build_single_qubit(1.0, 0.005)
    cfg = EnsembleConfig(
        model=model, n_trajectories=6, cycles=0.3, steps_per_cycle=500,
        record_mode=RecordMode.ONE_BIT, policy=FeedbackPolicy.rotate_to_axis(0.0),
        base_seed=99,
    )
    a = render_csv(run_ensemble(cfg))
    b = render_csv(run_ensemble(cfg))
    return a == b, "identical CSV for identical config"


def _check_unitary_cycle():
    model = build_single_qubit(1.0, 0.0)
    rng = derive_stream(5, 0)
    rho0 = random_pure_state(2, rng)
    rho = rho0.copy()
    n = 10000
    dt = 2 * np.pi / n
    for _ in range(n):
        rho = sme_step(rho, model, np.zeros(1), dt)
    err = np.max(np.abs(rho - rho0))
    return err <= 5e-3, f"cycle-closure error {err:.2e}"


def _check_self_consistency():
    model = build_single_qubit(1.0, 0.005)
    rng = derive_stream(6, 0)
    state = make_trajectory_state(model, rng)
    state.rho_filter = state.rho_true.copy()
    cfg = StepConfig(dt=2 * np.pi / 2000, record_mode=RecordMode.FULL)
    worst = 1.0
    for _ in range(4000):  # 2 cycles
        state = advance_trajectory(state, model, cfg, FeedbackPolicy.none())
    worst = fidelity(state.rho_true, state.rho_filter)
    return worst >= 1 - 1e-6, f"fidelity after 2 cycles {worst:.9f}"


def _check_streams():
    a = derive_stream(42, 0).standard_normal(10000)
    b = derive_stream(42, 1).standard_normal(10000)
    r = np.corrcoef(a, b)[0, 1]
    distinct = derive_stream(41, 0).standard_normal() != derive_stream(42, 0).standard_normal()
    return bool(abs(r) < 0.05 and distinct), f"cross-correlation {r:.4f}"


def _check_instability_detection():
    model = build_single_qubit(1.0, 0.005)
    cfg = EnsembleConfig(
        model=model, n_trajectories=4, cycles=20, steps_per_cycle=100,
        record_mode=RecordMode.ONE_BIT, policy=FeedbackPolicy.none(), base_seed=5,
    )
    from .ensemble import simulate_ensemble

    data = simulate_ensemble(cfg)
    return data.n_unstable > 0, f"{data.n_unstable}/4 flagged at 100 steps/cycle"


CHECKS = [
    ("eigendecomposition reconstructs", _check_eig_reconstruction),
    ("psd matrix sqrt multiplies back", _check_sqrt_psd),
    ("partial trace inverts kron", _check_kron_ptrace),
    ("one-bit quantizer conventions", _check_quantizer),
    ("obr file round trip", _check_obr_roundtrip),
    ("ensemble determinism", _check_determinism),
    ("unitary cycle closure", _check_unitary_cycle),
    ("full-record self consistency", _check_self_consistency),
    ("stream independence", _check_streams),
    ("coarse-step instability detected", _check_instability_detection),
]


def run_selfcheck(verbose: bool = True) -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        failures += 0 if ok else 1
    if verbose and failures:
        print(f"{failures} check(s) failed")
    return 1 if failures else 0
