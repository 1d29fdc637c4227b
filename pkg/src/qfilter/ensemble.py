"""Ensemble runner: many independent trajectories, deterministic statistics.

Random-stream discipline: trajectory ``i`` of a run with base seed ``s``
always draws from ``Philox(key=(s, i))`` -- a counter-based construction,
so streams are independent and a trajectory's noise does not depend on
which worker or batch it lands in.  Trajectories are simulated in fixed
chunks of :data:`CHUNK` and reduced in index order, which makes the output
bit-identical for any worker count.

A trajectory that trips the instability detector freezes at that step,
is excluded from every statistic, and is only counted in ``n_unstable``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .engine import (
    INSTABILITY_EIG_FLOOR,
    INSTABILITY_PURITY_CEIL,
    RecordMode,
    model_arrays,
)
from .errors import ConfigError, EnsembleFailure
from .feedback import FeedbackPolicy, kernel_policy
from .metrics import classical_correlations_batch, fidelity_batch, quantum_discord_batch
from .model import SystemModel, maximally_mixed, random_pure_state, validate_density_matrix

CHUNK = 32          # trajectories per simulation batch (fixed; not tunable per run)
BLOCK_STEPS = 8192  # steps per kernel invocation
WORKERS_ENV = "QFILTER_WORKERS"


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    model: SystemModel
    n_trajectories: int
    cycles: float
    steps_per_cycle: int
    record_mode: RecordMode
    policy: FeedbackPolicy
    base_seed: int
    output_stride: int | None = None
    corr_stride: int | None = None
    pinned_initial_state: np.ndarray | None = None

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("need at least one trajectory")
        if self.steps_per_cycle < 1:
            raise ConfigError("steps_per_cycle must be >= 1")
        if self.cycles <= 0:
            raise ConfigError("cycles must be positive")
        if not (0 <= self.base_seed < 2**64):
            raise ConfigError("base_seed must fit in 64 bits")
        kernel_policy(self.policy, self.model.dim)  # validates policy/dim pairing
        if self.output_stride is not None and self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")
        if self.corr_stride is not None:
            if self.corr_stride < 1:
                raise ConfigError("corr_stride must be >= 1")
            if self.corr_stride % self.resolved_output_stride != 0:
                raise ConfigError("corr_stride must be a multiple of output_stride")
        if self.pinned_initial_state is not None:
            validate_density_matrix(self.pinned_initial_state, "pinned initial state")
            if self.pinned_initial_state.shape != (self.model.dim, self.model.dim):
                raise ConfigError("pinned initial state dimension mismatch")

    @property
    def dt(self) -> float:
        """Step size; one cycle is 2*pi time units (omega0 = 1 convention)."""
        return 2.0 * math.pi / self.steps_per_cycle

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.cycles * self.steps_per_cycle)))

    @property
    def resolved_output_stride(self) -> int:
        if self.output_stride is not None:
            return self.output_stride
        return max(1, self.steps_per_cycle // 100)

    @property
    def resolved_corr_stride(self) -> int:
        if self.corr_stride is not None:
            return self.corr_stride
        return 10 * self.resolved_output_stride

    @property
    def sample_steps(self) -> np.ndarray:
        """Global step counts at which statistics are sampled (0 included)."""
        return np.arange(0, self.n_steps + 1, self.resolved_output_stride, dtype=np.int64)


@dataclass
class EnsembleData:
    """Per-trajectory sampled series (the detailed, pre-aggregation view)."""

    times: np.ndarray            # (NS,)
    sample_steps: np.ndarray     # (NS,)
    purity_true: np.ndarray      # (n, NS)
    purity_filter: np.ndarray    # (n, NS)
    fidelity: np.ndarray         # (n, NS)
    y_true: np.ndarray           # (n, NS, C) channel expectations of the truth
    flag_step: np.ndarray        # (n,) step of instability, -1 if never
    corr_index: np.ndarray | None = None    # (NCS,) indices into the sample grid
    ccorr_true: np.ndarray | None = None    # (n, NCS)
    ccorr_filter: np.ndarray | None = None
    discord_true: np.ndarray | None = None
    discord_filter: np.ndarray | None = None
    bits: np.ndarray | None = None          # (n, n_steps, C) int8, on request
    states_filter: np.ndarray | None = None  # (n, NS, d, d), on request

    @property
    def valid(self) -> np.ndarray:
        return self.flag_step < 0

    @property
    def n_unstable(self) -> int:
        return int(np.sum(~self.valid))


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Time-gridded ensemble means and standard errors.

    Correlation fields are populated for two-qubit runs only; they are
    sampled every ``corr_stride`` steps and held constant in between so
    all series share one time grid.
    """

    times: np.ndarray
    mean_purity_true: np.ndarray
    sem_purity_true: np.ndarray
    mean_purity_filter: np.ndarray
    sem_purity_filter: np.ndarray
    mean_fidelity: np.ndarray
    sem_fidelity: np.ndarray
    n_unstable: int
    mean_ccorr_true: np.ndarray | None = None
    mean_ccorr_filter: np.ndarray | None = None
    mean_discord_true: np.ndarray | None = None
    mean_discord_filter: np.ndarray | None = None
    sem_ccorr_true: np.ndarray | None = None
    sem_ccorr_filter: np.ndarray | None = None
    sem_discord_true: np.ndarray | None = None
    sem_discord_filter: np.ndarray | None = None

    @property
    def has_correlations(self) -> bool:
        return self.mean_ccorr_true is not None


def derive_stream(base_seed: int, trajectory_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one trajectory.

    Counter-based: the Philox key is literally (base_seed, index), so any
    trajectory's stream can be reconstructed in isolation.
    """
    key = np.array([base_seed % 2**64, trajectory_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gaussian_increment(stream: np.random.Generator, dt: float) -> float:
    """One Wiener increment: N(0, dt)."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    return float(stream.standard_normal()) * math.sqrt(dt)


def resolve_workers(workers: int | None) -> int:
    cap = os.environ.get(WORKERS_ENV)
    if workers is None:
        workers = int(cap) if cap else 1
    elif cap:
        workers = min(workers, int(cap))
    return max(1, workers)


def _simulate_chunk(
    cfg: EnsembleConfig,
    indices: np.ndarray,
    collect_bits: bool,
    collect_states: bool,
) -> dict:
    """Simulate one fixed chunk of trajectories; returns per-lane arrays."""
    arrs = model_arrays(cfg.model)
    d = arrs.dim
    nc = arrs.n_channels
    nb = len(indices)
    n_steps = cfg.n_steps
    dt = cfg.dt
    one_bit = cfg.record_mode is RecordMode.ONE_BIT
    pol_code, pol_nx, pol_nz = kernel_policy(cfg.policy, d)
    sample_steps = cfg.sample_steps
    ns = len(sample_steps)
    corr_on = d == 4
    corr_stride = cfg.resolved_corr_stride
    if corr_on:
        corr_index = np.nonzero(sample_steps % corr_stride == 0)[0]
    else:
        corr_index = np.zeros(0, dtype=np.int64)

    rngs = [derive_stream(cfg.base_seed, int(i)) for i in indices]
    rt = np.empty((nb, d, d), np.complex128)
    rf = np.empty((nb, d, d), np.complex128)
    for b, rng in enumerate(rngs):
        if cfg.pinned_initial_state is not None:
            rho0 = np.array(cfg.pinned_initial_state, dtype=np.complex128)
        else:
            rho0 = random_pure_state(d, rng)
        _k.hermitize(rho0)
        rt[b] = rho0
        rf[b] = maximally_mixed(d)
    alive = np.ones(nb, dtype=np.bool_)
    flag_step = np.full(nb, -1, dtype=np.int64)

    purity_true = np.full((nb, ns), np.nan)
    purity_filter = np.full((nb, ns), np.nan)
    fid = np.full((nb, ns), np.nan)
    y_true = np.full((nb, ns, nc), np.nan)
    ccorr_t = np.full((nb, len(corr_index)), np.nan) if corr_on else None
    ccorr_f = np.full((nb, len(corr_index)), np.nan) if corr_on else None
    disc_t = np.full((nb, len(corr_index)), np.nan) if corr_on else None
    disc_f = np.full((nb, len(corr_index)), np.nan) if corr_on else None
    bits_full = np.empty((nb, n_steps, nc), np.int8) if collect_bits else None
    states_f = np.full((nb, ns, d, d), np.nan, dtype=np.complex128) if collect_states else None

    corr_pos = {int(sample_steps[j]): jj for jj, j in enumerate(corr_index)}

    def flush(slot_lo, slot_steps, st, sf_states, spt, spf):
        """Fold one block's samples into the chunk arrays."""
        nsb = len(slot_steps)
        if nsb == 0:
            return
        sl = slice(slot_lo, slot_lo + nsb)
        # validity per lane/slot: sampled strictly before any flag
        valid = np.ones((nb, nsb), dtype=bool)
        flagged = flag_step >= 0
        if flagged.any():
            valid[flagged] = slot_steps[None, :] < flag_step[flagged, None]
        purity_true[:, sl] = np.where(valid, spt, np.nan)
        purity_filter[:, sl] = np.where(valid, spf, np.nan)
        vmask = valid.ravel()
        if vmask.any():
            st_flat = st.reshape(-1, d, d)[vmask]
            sf_flat = sf_states.reshape(-1, d, d)[vmask]
            fvals = np.full(nb * nsb, np.nan)
            # states here passed the instability gate, so eigenvalues are
            # bounded below by the floor; clamp accordingly
            fvals[vmask] = fidelity_batch(st_flat, sf_flat, neg_tol=-INSTABILITY_EIG_FLOOR)
            fid[:, sl] = fvals.reshape(nb, nsb)
            yv = np.full((nb * nsb, nc), np.nan)
            yv[vmask] = np.einsum("cij,sji->sc", arrs.ys, st_flat).real
            y_true[:, sl] = yv.reshape(nb, nsb, nc)
            if corr_on:
                for jj, g in enumerate(slot_steps):
                    pos = corr_pos.get(int(g))
                    if pos is None:
                        continue
                    lanes = valid[:, jj]
                    if not lanes.any():
                        continue
                    ct = classical_correlations_batch(st[lanes, jj])
                    cf = classical_correlations_batch(sf_states[lanes, jj])
                    ccorr_t[lanes, pos] = np.maximum(ct, 0.0)
                    ccorr_f[lanes, pos] = np.maximum(cf, 0.0)
                    dt_vals = quantum_discord_batch(st[lanes, jj], ccorr=ct)
                    df_vals = quantum_discord_batch(sf_states[lanes, jj], ccorr=cf)
                    disc_t[lanes, pos] = np.maximum(dt_vals, 0.0)
                    disc_f[lanes, pos] = np.maximum(df_vals, 0.0)
        if collect_states:
            states_f[:, sl] = np.where(
                valid[:, :, None, None], sf_states, complex(np.nan, 0.0)
            )

    # t = 0 sample (before any step)
    spt0 = np.array([_k.purity_herm(rt[b]) for b in range(nb)])
    spf0 = np.array([_k.purity_herm(rf[b]) for b in range(nb)])
    flush(0, np.zeros(1, dtype=np.int64), rt[:, None].copy(), rf[:, None].copy(),
          spt0[:, None], spf0[:, None])

    g0 = 0
    next_slot = 1
    while g0 < n_steps:
        s_blk = min(BLOCK_STEPS, n_steps - g0)
        z = np.zeros((nb, s_blk, nc))
        for b in range(nb):
            if alive[b]:
                z[b] = rngs[b].standard_normal((s_blk, nc))
        in_block = (sample_steps > g0) & (sample_steps <= g0 + s_blk)
        slot_steps = sample_steps[in_block]
        nsb = len(slot_steps)
        st = np.zeros((nb, nsb, d, d), np.complex128)
        sf_states = np.zeros((nb, nsb, d, d), np.complex128)
        spt = np.zeros((nb, nsb))
        spf = np.zeros((nb, nsb))
        bits_blk = np.zeros((nb, s_blk, nc), np.int8)
        _k.advance_block(
            rt, rf, z, arrs.h, arrs.ys, arrs.y2s, arrs.ks, arrs.s2k, arrs.s8k,
            dt, one_bit, pol_code, pol_nx, pol_nz,
            INSTABILITY_PURITY_CEIL, INSTABILITY_EIG_FLOOR,
            g0, slot_steps, st, sf_states, spt, spf, bits_blk, alive, flag_step,
        )
        if collect_bits:
            bits_full[:, g0 : g0 + s_blk] = bits_blk
        flush(next_slot, slot_steps, st, sf_states, spt, spf)
        next_slot += nsb
        g0 += s_blk

    return {
        "purity_true": purity_true,
        "purity_filter": purity_filter,
        "fidelity": fid,
        "y_true": y_true,
        "flag_step": flag_step,
        "ccorr_true": ccorr_t,
        "ccorr_filter": ccorr_f,
        "discord_true": disc_t,
        "discord_filter": disc_f,
        "bits": bits_full,
        "states_filter": states_f,
        "corr_index": corr_index,
    }


def _chunk_indices(n: int) -> list[np.ndarray]:
    return [np.arange(lo, min(lo + CHUNK, n), dtype=np.int64) for lo in range(0, n, CHUNK)]


def simulate_ensemble(
    cfg: EnsembleConfig,
    workers: int | None = None,
    collect_bits: bool = False,
    collect_states: bool = False,
) -> EnsembleData:
    """Run every trajectory and return the per-trajectory sampled series.

    Results are reduced in trajectory order and are bit-identical for any
    worker count.
    """
    chunks = _chunk_indices(cfg.n_trajectories)
    nworkers = resolve_workers(workers)
    if nworkers <= 1 or len(chunks) <= 1:
        results = [_simulate_chunk(cfg, idx, collect_bits, collect_states) for idx in chunks]
    else:
        with ProcessPoolExecutor(max_workers=min(nworkers, len(chunks))) as pool:
            results = list(
                pool.map(
                    _simulate_chunk,
                    [cfg] * len(chunks),
                    chunks,
                    [collect_bits] * len(chunks),
                    [collect_states] * len(chunks),
                )
            )

    n = cfg.n_trajectories
    sample_steps = cfg.sample_steps
    corr_on = cfg.model.dim == 4

    def cat(key):
        if results[0][key] is None:
            return None
        return np.concatenate([r[key] for r in results], axis=0)

    return EnsembleData(
        times=sample_steps * cfg.dt,
        sample_steps=sample_steps,
        purity_true=cat("purity_true"),
        purity_filter=cat("purity_filter"),
        fidelity=cat("fidelity"),
        y_true=cat("y_true"),
        flag_step=cat("flag_step"),
        corr_index=results[0]["corr_index"] if corr_on else None,
        ccorr_true=cat("ccorr_true"),
        ccorr_filter=cat("ccorr_filter"),
        discord_true=cat("discord_true"),
        discord_filter=cat("discord_filter"),
        bits=cat("bits"),
        states_filter=cat("states_filter"),
    )


def _mean_sem(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors over the (already filtered) rows."""
    n = series.shape[0]
    mean = series.mean(axis=0)
    if n > 1:
        sem = series.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        sem = np.zeros_like(mean)
    return mean, sem


def _hold(values: np.ndarray, corr_index: np.ndarray, ns: int) -> np.ndarray:
    """Expand corr-grid values to the full sample grid (zero-order hold)."""
    out = np.empty(ns)
    src = np.searchsorted(corr_index, np.arange(ns), side="right") - 1
    out[:] = values[np.clip(src, 0, len(values) - 1)]
    return out


def aggregate(cfg: EnsembleConfig, data: EnsembleData) -> EnsembleStats:
    ok = data.valid
    n_unstable = data.n_unstable
    if not ok.any():
        raise EnsembleFailure(n_unstable, cfg.n_trajectories)
    mpt, spt = _mean_sem(data.purity_true[ok])
    mpf, spf = _mean_sem(data.purity_filter[ok])
    mf, sf = _mean_sem(data.fidelity[ok])
    kw = {}
    if cfg.model.dim == 4:
        ns = len(data.sample_steps)
        for key, mname, sname in (
            ("ccorr_true", "mean_ccorr_true", "sem_ccorr_true"),
            ("ccorr_filter", "mean_ccorr_filter", "sem_ccorr_filter"),
            ("discord_true", "mean_discord_true", "sem_discord_true"),
            ("discord_filter", "mean_discord_filter", "sem_discord_filter"),
        ):
            m, s = _mean_sem(getattr(data, key)[ok])
            kw[mname] = _hold(m, data.corr_index, ns)
            kw[sname] = _hold(s, data.corr_index, ns)
    return EnsembleStats(
        times=data.times,
        mean_purity_true=mpt,
        sem_purity_true=spt,
        mean_purity_filter=mpf,
        sem_purity_filter=spf,
        mean_fidelity=mf,
        sem_fidelity=sf,
        n_unstable=n_unstable,
        **kw,
    )


def run_ensemble(cfg: EnsembleConfig, workers: int | None = None) -> EnsembleStats:
    """Simulate the configured ensemble and aggregate its statistics."""
    return aggregate(cfg, simulate_ensemble(cfg, workers=workers))


@dataclass(frozen=True)
class HittingTimes:
    """First-passage summary for a filter-purity threshold.

    ``median_hit_time`` is the median over trajectories of the first sampled
    time with purity >= threshold; ``mean_cross_time`` is the first sampled
    time at which the ensemble-mean purity crosses it.  Censored quantities
    (never reached) are reported as the run horizon.
    """

    median_hit_time: float
    mean_cross_time: float
    n_censored: int
    mean_censored: bool
    horizon: float

    def __iter__(self):
        return iter((self.median_hit_time, self.mean_cross_time))


def hitting_time_stats(
    cfg: EnsembleConfig,
    purity_threshold: float,
    workers: int | None = None,
    data: EnsembleData | None = None,
) -> HittingTimes:
    if not (1.0 / cfg.model.dim < purity_threshold < 1.0):
        raise ConfigError(
            f"threshold must lie in (1/dim, 1), got {purity_threshold}"
        )
    if data is None:
        data = simulate_ensemble(cfg, workers=workers)
    ok = data.valid
    if not ok.any():
        raise EnsembleFailure(data.n_unstable, cfg.n_trajectories)
    pur = data.purity_filter[ok]
    times = data.times
    horizon = float(times[-1])
    hit = pur >= purity_threshold
    any_hit = hit.any(axis=1)
    first = np.argmax(hit, axis=1)
    hit_times = np.where(any_hit, times[first], horizon)
    mean_curve = pur.mean(axis=0)
    crossed = mean_curve >= purity_threshold
    if crossed.any():
        cross_time = float(times[int(np.argmax(crossed))])
        censored_mean = False
    else:
        cross_time = horizon
        censored_mean = True
    return HittingTimes(
        median_hit_time=float(np.median(hit_times)),
        mean_cross_time=cross_time,
        n_censored=int(np.sum(~any_hit)),
        mean_censored=censored_mean,
        horizon=horizon,
    )
