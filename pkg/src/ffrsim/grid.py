"""Aggregate (center-of-inertia) frequency dynamics of a multi-machine grid.

All machines share one frequency deviation, so the system reduces to a single
swing equation

    M * d(df)/dt = P_injection + sum(P_gov_i) - D * df,   M = sum(2 H_i S_i) / f0

with a first-order governor lag per online machine.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, SystemCollapseError


@dataclass(frozen=True)
class Generator:
    """Synchronous machine as seen by the COI model.

    ``governor_limit_pu`` bounds the governor's mechanical power deviation to
    a fraction of the machine rating.
    """

    id: str
    rated_power_mva: float
    inertia_h_s: float
    governor_droop_r_pu: float
    governor_time_const_s: float
    governor_limit_pu: float
    online: bool = True

    def __post_init__(self):
        for name in (
            "rated_power_mva",
            "inertia_h_s",
            "governor_droop_r_pu",
            "governor_time_const_s",
            "governor_limit_pu",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"generator {self.id}: {name} must be > 0, got {value!r}")

    @property
    def kinetic_mws(self) -> float:
        """2*H*S, the machine's contribution to the inertia sum (MW*s)."""
        return 2.0 * self.inertia_h_s * self.rated_power_mva

    def governor_gain(self, nominal_freq_hz: float) -> float:
        """Steady-state governor response in MW/Hz: S / (R * f0)."""
        return self.rated_power_mva / (self.governor_droop_r_pu * nominal_freq_hz)


@dataclass(frozen=True)
class GridState:
    time_s: float
    freq_dev_hz: float
    generators: tuple[Generator, ...]
    governor_power_mw: tuple[float, ...]
    nominal_freq_hz: float = 60.0
    damping_d_mw_per_hz: float = 60.0

    def __post_init__(self):
        if len(self.governor_power_mw) != len(self.generators):
            raise ConfigurationError("one governor state per generator is required")
        if self.damping_d_mw_per_hz < 0:
            raise ConfigurationError("damping_d must be >= 0")
        if not math.isfinite(self.freq_dev_hz):
            raise ConfigurationError("freq_dev must be finite")

    @classmethod
    def at_equilibrium(cls, generators: Sequence[Generator], nominal_freq_hz=60.0,
                       damping_d_mw_per_hz=60.0, time_s=0.0) -> "GridState":
        gens = tuple(generators)
        return cls(time_s, 0.0, gens, (0.0,) * len(gens), nominal_freq_hz, damping_d_mw_per_hz)

    @property
    def frequency_hz(self) -> float:
        return self.nominal_freq_hz + self.freq_dev_hz

    @property
    def kinetic_constant(self) -> float:
        """M in MW*s/Hz over online machines."""
        return kinetic_constant(self.generators, self.nominal_freq_hz)

    def _arrays(self):
        gens = self.generators
        f0 = self.nominal_freq_hz
        return (
            np.array([g.kinetic_mws for g in gens], dtype=np.float64),
            np.array([g.governor_gain(f0) for g in gens], dtype=np.float64),
            np.array([g.governor_time_const_s for g in gens], dtype=np.float64),
            np.array([g.governor_limit_pu * g.rated_power_mva for g in gens], dtype=np.float64),
            np.array([g.online for g in gens], dtype=np.bool_),
        )


def kinetic_constant(generators: Iterable[Generator], nominal_freq_hz: float = 60.0) -> float:
    return sum(g.kinetic_mws for g in generators if g.online) / nominal_freq_hz


def coi_frequency(machines: Iterable[tuple[float, float]], nominal_freq_hz: float = 60.0) -> float:
    """Center-of-inertia frequency.

    ``machines`` yields ``(H_i * S_i, speed deviation in Hz)`` pairs; each
    deviation is weighted by 2*H_i*S_i.
    """
    num = 0.0
    den = 0.0
    for hs, dev in machines:
        if not hs > 0:
            raise ConfigurationError(f"inertia weight must be > 0, got {hs!r}")
        num += 2.0 * hs * dev
        den += 2.0 * hs
    if den == 0.0:
        raise SystemCollapseError("no inertia: at least one online generator is required")
    return nominal_freq_hz + num / den


def swing_step(state: GridState, net_injection_mw: float, dt: float) -> GridState:
    """Advance the COI swing equation and governors by one RK4 step."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt!r}")
    two_hs, gain, tc, lim, online = state._arrays()
    if K.kinetic_constant(two_hs, online, state.nominal_freq_hz) <= 0.0:
        raise SystemCollapseError(f"system collapse at t={state.time_s:.6g} s: no online inertia")
    pg = np.array(state.governor_power_mw, dtype=np.float64)
    f = K.grid_rk4_step(
        state.freq_dev_hz, pg, online, two_hs, gain, tc, lim,
        state.damping_d_mw_per_hz, state.nominal_freq_hz, float(net_injection_mw), dt,
    )
    return replace(state, time_s=state.time_s + dt, freq_dev_hz=float(f),
                   governor_power_mw=tuple(float(p) for p in pg))


def rocof_now(state: GridState, net_injection_mw: float) -> float:
    """Instantaneous d(df)/dt for the given injection (Hz/s)."""
    m = state.kinetic_constant
    if m <= 0:
        raise SystemCollapseError("system collapse: no online inertia")
    gov = sum(p for g, p in zip(state.generators, state.governor_power_mw) if g.online)
    return (net_injection_mw + gov - state.damping_d_mw_per_hz * state.freq_dev_hz) / m


class DelayLine:
    """Fixed-length history of a sampled signal.

    The delay is rounded to the nearest whole number of steps; ``read``
    returns the value pushed that many pushes before the latest one.
    """

    def __init__(self, delay: float, step: float, fill: float = 0.0):
        if delay < 0:
            raise ConfigurationError(f"delay must be >= 0, got {delay!r}")
        if not step > 0:
            raise ConfigurationError(f"step must be > 0, got {step!r}")
        self.delay = delay
        self.step = step
        self.lag = steps_for(delay, step)
        self.buffer = np.full(self.lag + 1, fill, dtype=np.float64)
        self.head = 0

    def __len__(self):
        return self.buffer.shape[0]

    def push(self, value: float) -> "DelayLine":
        self.head = int(K.ring_push(self.buffer, self.head, float(value)))
        return self

    def read(self) -> float:
        return float(K.ring_read(self.buffer, self.head, self.lag))


def steps_for(duration: float, step: float) -> int:
    """Nearest whole number of steps (halves round up)."""
    return int(math.floor(duration / step + 0.5))


def delay_push_sample(line: DelayLine, value: float) -> DelayLine:
    return line.push(value)


def delay_read(line: DelayLine) -> float:
    return line.read()


@dataclass(frozen=True)
class DisturbanceEvent:
    """Step loss of ``power_loss_mw`` at ``trigger_time_s``, optionally tripping a machine."""

    trigger_time_s: float = 5.0
    power_loss_mw: float = 1000.0
    tripped_generator: str | None = None

    def __post_init__(self):
        if not self.trigger_time_s >= 0:
            raise ConfigurationError("disturbance time must be >= 0")
        if not self.power_loss_mw >= 0:
            raise ConfigurationError("disturbance power_mw must be >= 0")

    def imbalance_mw(self, time_s: float) -> float:
        return -self.power_loss_mw if time_s >= self.trigger_time_s else 0.0


def generator_index(generators: Sequence[Generator], gen_id: str) -> int:
    for i, g in enumerate(generators):
        if g.id == gen_id:
            return i
    raise ConfigurationError(f"unknown generator id {gen_id!r}")


def apply_disturbance(state: GridState, event: DisturbanceEvent) -> tuple[GridState, float]:
    """Return the grid after ``event`` (if due) and its power-balance contribution."""
    if event.tripped_generator is not None:
        idx = generator_index(state.generators, event.tripped_generator)
    if state.time_s < event.trigger_time_s:
        return state, 0.0
    if event.tripped_generator is None:
        return state, -event.power_loss_mw
    gens = list(state.generators)
    gens[idx] = replace(gens[idx], online=False)
    pg = list(state.governor_power_mw)
    pg[idx] = 0.0
    return replace(state, generators=tuple(gens), governor_power_mw=tuple(pg)), -event.power_loss_mw


def scale_inertia(generators: Sequence[Generator], target_m: float, nominal_freq_hz: float = 60.0,
                  exclude: str | None = None) -> tuple[Generator, ...]:
    """Scale every H uniformly so the machines other than ``exclude`` give M = target_m."""
    if not target_m > 0:
        raise ConfigurationError(f"target kinetic constant must be > 0, got {target_m!r}")
    if exclude is not None:
        generator_index(generators, exclude)
    base = kinetic_constant((g for g in generators if g.id != exclude), nominal_freq_hz)
    if base <= 0:
        raise SystemCollapseError("no inertia left after excluding the tripped generator")
    factor = target_m / base
    return tuple(replace(g, inertia_h_s=g.inertia_h_s * factor) for g in generators)
