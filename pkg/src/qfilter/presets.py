"""Named experiment presets.

Each preset pins the physics of one reference experiment; CLI flags can
override the statistical knobs (trajectories, seed, cycles, ...).  All use
omega0 = 1, measurement strength k = 0.005 and 500 trajectories unless
overridden.

    fig1        single qubit, no feedback, 10000 steps/cycle, 50 cycles
    fig2        fig1 plus rotate-to-measurement-axis feedback
    fig2-inset  fig2 swept over the target-axis angle (one-bit record)
    fig3        two qubits, joint ZZ measurement, 20000 steps/cycle
    two-local   two qubits, local Z measurements + local feedback
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RecordMode
from .ensemble import EnsembleConfig
from .errors import ConfigError
from .feedback import FeedbackPolicy
from .model import SystemModel, TwoQubitMode, build_single_qubit, build_two_qubit

DEFAULT_TRAJECTORIES = 500
DEFAULT_SEED = 20120

SWEEP_ANGLES = tuple(range(0, 95, 5))  # fig2-inset: 0..90 degrees in 5-degree steps


@dataclass(frozen=True)
class Preset:
    name: str
    dim: int
    k1: float
    steps_per_cycle: int
    cycles: float
    policy: FeedbackPolicy
    record_modes: tuple[RecordMode, ...]
    two_qubit_mode: TwoQubitMode | None = None
    kappa: float = 0.0
    angle_sweep: tuple[int, ...] | None = None

    def build_model(self, kappa: float | None = None) -> SystemModel:
        if self.dim == 2:
            return build_single_qubit(1.0, self.k1)
        return build_two_qubit(
            1.0, self.k1, self.kappa if kappa is None else kappa, self.two_qubit_mode
        )


PRESETS: dict[str, Preset] = {
    "fig1": Preset(
        name="fig1",
        dim=2,
        k1=0.005,
        steps_per_cycle=10000,
        cycles=50,
        policy=FeedbackPolicy.none(),
        record_modes=(RecordMode.FULL, RecordMode.ONE_BIT),
    ),
    "fig2": Preset(
        name="fig2",
        dim=2,
        k1=0.005,
        steps_per_cycle=10000,
        cycles=50,
        policy=FeedbackPolicy.rotate_to_axis(0.0),
        record_modes=(RecordMode.FULL, RecordMode.ONE_BIT),
    ),
    "fig2-inset": Preset(
        name="fig2-inset",
        dim=2,
        k1=0.005,
        steps_per_cycle=10000,
        cycles=50,
        policy=FeedbackPolicy.rotate_to_axis(0.0),
        record_modes=(RecordMode.ONE_BIT,),
        angle_sweep=SWEEP_ANGLES,
    ),
    "fig3": Preset(
        name="fig3",
        dim=4,
        k1=0.005,
        steps_per_cycle=20000,
        cycles=50,
        policy=FeedbackPolicy.none(),
        record_modes=(RecordMode.FULL, RecordMode.ONE_BIT),
        two_qubit_mode=TwoQubitMode.ZZ,
    ),
    "two-local": Preset(
        name="two-local",
        dim=4,
        k1=0.005,
        steps_per_cycle=20000,
        cycles=50,
        policy=FeedbackPolicy.local_rotate_to_axis(),
        record_modes=(RecordMode.FULL, RecordMode.ONE_BIT),
        two_qubit_mode=TwoQubitMode.LOCAL_Z,
    ),
}


def preset_config(
    name: str,
    record_mode: RecordMode,
    n_trajectories: int | None = None,
    cycles: float | None = None,
    steps_per_cycle: int | None = None,
    base_seed: int = DEFAULT_SEED,
    policy: FeedbackPolicy | None = None,
    kappa: float | None = None,
    pinned_initial_state: np.ndarray | None = None,
) -> EnsembleConfig:
    """Expand a preset into a full ensemble configuration."""
    preset = PRESETS.get(name)
    if preset is None:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return EnsembleConfig(
        model=preset.build_model(kappa),
        n_trajectories=n_trajectories if n_trajectories is not None else DEFAULT_TRAJECTORIES,
        cycles=cycles if cycles is not None else preset.cycles,
        steps_per_cycle=steps_per_cycle if steps_per_cycle is not None else preset.steps_per_cycle,
        record_mode=record_mode,
        policy=policy if policy is not None else preset.policy,
        base_seed=base_seed,
        pinned_initial_state=pinned_initial_state,
    )
