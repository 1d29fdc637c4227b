"""Offline filter replay from stored one-bit records.

Given the bit stream a run produced (or an OBR1 file), the filter SME can
be re-run without the truth state or the noise stream: the innovation
depends only on the stored signs and the filter's own expectations.  The
replay uses the same kernels as the in-line run, so the reconstructed
filter states match bit for bit (for runs that did not trip a truth-side
instability, which a record alone cannot see).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .engine import INSTABILITY_EIG_FLOOR, INSTABILITY_PURITY_CEIL, model_arrays
from .errors import ConfigError
from .feedback import FeedbackPolicy, kernel_policy
from .model import SystemModel, maximally_mixed


@dataclass
class ReplayResult:
    sample_steps: np.ndarray      # (NS,)
    times: np.ndarray             # (NS,)
    states: np.ndarray            # (NS, d, d) filter states at the sample steps
    purity: np.ndarray            # (NS,)
    flag_step: int                # -1 if the filter never went unstable


def replay_filter(
    bits: np.ndarray,
    dt: float,
    model: SystemModel,
    policy: FeedbackPolicy,
    output_stride: int = 1,
) -> ReplayResult:
    """Drive the filter SME with a stored sign record.

    ``bits`` is (n_steps, n_channels) of +/-1.  The filter starts from the
    maximally mixed state, exactly as in-line runs do.
    """
    arrs = model_arrays(model)
    bits = np.ascontiguousarray(bits, dtype=np.int8)
    if bits.ndim != 2 or bits.shape[1] != arrs.n_channels:
        raise ConfigError(
            f"bits shape {bits.shape} does not match the model's "
            f"{arrs.n_channels} channel(s)"
        )
    n_steps = bits.shape[0]
    if output_stride < 1:
        raise ConfigError("output_stride must be >= 1")
    pol_code, pol_nx, pol_nz = kernel_policy(policy, model.dim)
    sample_steps = np.arange(0, n_steps + 1, output_stride, dtype=np.int64)
    d = model.dim
    rf = maximally_mixed(d)[None].copy()
    sf = np.zeros((1, len(sample_steps) - 1, d, d), np.complex128)
    spf = np.zeros((1, len(sample_steps) - 1))
    alive = np.ones(1, dtype=np.bool_)
    flag_step = np.full(1, -1, dtype=np.int64)
    _k.replay_block(
        rf, bits[None], arrs.h, arrs.ys, arrs.y2s, arrs.ks, arrs.s2k, arrs.s8k,
        dt, pol_code, pol_nx, pol_nz,
        INSTABILITY_PURITY_CEIL, INSTABILITY_EIG_FLOOR,
        0, sample_steps[1:], sf, spf, alive, flag_step,
    )
    states = np.concatenate([maximally_mixed(d)[None], sf[0]], axis=0)
    purity = np.concatenate([[1.0 / d], spf[0]])
    flag = int(flag_step[0])
    if flag >= 0:
        cut = sample_steps >= flag
        states[cut] = np.nan
        purity[cut] = np.nan
    return ReplayResult(
        sample_steps=sample_steps,
        times=sample_steps * dt,
        states=states,
        purity=purity,
        flag_step=flag,
    )
