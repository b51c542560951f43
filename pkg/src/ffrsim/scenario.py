"""Scenario assembly, simulation runs, metrics and the strategy/case matrix."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .coordinator import AllocationStrategy
from .errors import ConfigurationError, MetricsError, SimulationError, SystemCollapseError
from .grid import DisturbanceEvent, Generator, generator_index, kinetic_constant, steps_for
from .resources import BessModel, DataCenterModel, EvFleetModel

COLUMNS = (
    "t_s", "f_hz", "p_ev_mw", "p_ups_mw", "p_it_mw", "p_bess_mw", "p_ffr_total_mw",
    "alpha_ev", "alpha_dc", "alpha_bess", "soc_ev", "soc_bess",
)
CASES = (1, 2, 3, 4)
STRATEGIES = ("bess_dominant", "dc_dominant", "ev_dominant", "adaptive")
CASE_LABELS = {1: "No FFR", 2: "EV only", 3: "EV + DC", 4: "EV + DC + BESS"}
INTERPOLATIONS = ("linear", "hold")


@dataclass(frozen=True)
class MetricSettings:
    rocof_window_s: float = 0.5
    rocof_span_s: float = 2.0
    recovery_band_hz: float = 0.05
    recovery_hold_s: float = 1.0
    qss_window_s: float = 1.0

    def __post_init__(self):
        for name in ("rocof_window_s", "rocof_span_s", "recovery_band_hz", "recovery_hold_s", "qss_window_s"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"metrics.{name} must be > 0")
        if self.rocof_window_s > self.rocof_span_s:
            raise ConfigurationError("metrics.rocof_window_s must not exceed rocof_span_s")


@dataclass(frozen=True)
class Scenario:
    generators: tuple[Generator, ...]
    ev: EvFleetModel = EvFleetModel()
    dc: DataCenterModel = DataCenterModel()
    bess: BessModel = BessModel()
    strategy: AllocationStrategy = AllocationStrategy()
    disturbance: DisturbanceEvent = DisturbanceEvent()
    enabled: tuple[bool, bool, bool] = (True, True, True)
    case_id: int = 4
    nominal_freq_hz: float = 60.0
    damping_d_mw_per_hz: float = 60.0
    duration_s: float = 30.0
    dt_s: float = 0.001
    sample_stride_s: float = 0.01
    control_period_s: float = 0.01
    capacity_horizon_s: float = 10.0
    bidirectional: bool = False
    delay_interpolation: str = "linear"
    metrics: MetricSettings = MetricSettings()
    forced_weights: tuple[float, float, float] | None = None

    def validate(self) -> None:
        if not self.generators:
            raise ConfigurationError("grid.generators must not be empty")
        ids = [g.id for g in self.generators]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("generator ids must be unique")
        if not self.nominal_freq_hz > 0:
            raise ConfigurationError("grid.nominal_freq must be > 0")
        if not self.damping_d_mw_per_hz >= 0:
            raise ConfigurationError("grid.damping_d must be >= 0")
        if not self.dt_s > 0:
            raise ConfigurationError("solver.dt must be > 0")
        if not self.duration_s > self.disturbance.trigger_time_s:
            raise ConfigurationError("solver.duration must exceed the disturbance time")
        for name in ("sample_stride_s", "control_period_s"):
            value = getattr(self, name)
            ratio = value / self.dt_s
            if not value > 0 or ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
                raise ConfigurationError(f"solver.dt must divide {name[:-2]} ({value!r} / {self.dt_s!r})")
        if not self.capacity_horizon_s > 0:
            raise ConfigurationError("solver.capacity_horizon must be > 0")
        if self.delay_interpolation not in INTERPOLATIONS:
            raise ConfigurationError(f"solver.delay_interpolation must be one of {INTERPOLATIONS}")
        if self.disturbance.tripped_generator is not None:
            generator_index(self.generators, self.disturbance.tripped_generator)
        if kinetic_constant(self.generators, self.nominal_freq_hz) <= 0:
            raise SystemCollapseError("no online inertia at start")

    @property
    def n_steps(self) -> int:
        return steps_for(self.duration_s, self.dt_s)

    @property
    def sample_every(self) -> int:
        return steps_for(self.sample_stride_s, self.dt_s)

    @property
    def control_every(self) -> int:
        return steps_for(self.control_period_s, self.dt_s)

    @property
    def trip_step(self) -> int:
        return int(math.ceil(self.disturbance.trigger_time_s / self.dt_s - 1e-9))

    def post_trip_kinetic_constant(self) -> float:
        trip = self.disturbance.tripped_generator
        return kinetic_constant((g for g in self.generators if g.id != trip), self.nominal_freq_hz)


@dataclass(frozen=True)
class MetricsRecord:
    nadir_hz: float
    rocof_hz_per_s: float
    recovery_time_s: float | None
    max_power_mw: dict = field(default_factory=dict)
    ffr_energy_mwh: float = 0.0

    @property
    def recovered(self) -> bool:
        return self.recovery_time_s is not None

    def to_dict(self) -> dict:
        return {
            "nadir_hz": float(self.nadir_hz),
            "rocof_hz_per_s": float(self.rocof_hz_per_s),
            "recovery_time_s": None if self.recovery_time_s is None else float(self.recovery_time_s),
            "max_power_mw": {k: float(self.max_power_mw[k]) for k in ("ev", "dc", "bess")},
            "ffr_energy_mwh": float(self.ffr_energy_mwh),
        }


@dataclass
class RunResult:
    scenario: Scenario
    samples: np.ndarray
    metrics: MetricsRecord

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.samples[:, K.C_T]

    @property
    def f_hz(self) -> np.ndarray:
        return self.samples[:, K.C_F]

    @property
    def strategy_kind(self) -> str:
        return self.scenario.strategy.kind


def build_case(case_id: int, strategy="adaptive", base: Scenario | None = None) -> Scenario:
    """Scenario for one of the four study cases.

    Case 1 disables every resource; case 2 runs the EV fleet alone at full
    weight; case 3 runs EV + DC with the speed-capacity rule over those two;
    case 4 runs all three resources under ``strategy``.
    """
    if base is None:
        from .config import default_scenario

        base = default_scenario()
    if isinstance(strategy, str):
        if strategy != base.strategy.kind:
            # Weight overrides belong to the configured kind only.
            fixed = base.strategy.fixed if strategy == "custom" else None
            strategy = replace(base.strategy, kind=strategy, fixed=fixed)
        else:
            strategy = base.strategy
    if case_id == 1:
        return replace(base, case_id=1, strategy=strategy, enabled=(False, False, False), forced_weights=(0.0, 0.0, 0.0))
    if case_id == 2:
        return replace(base, case_id=2, strategy=strategy, enabled=(True, False, False), forced_weights=(1.0, 0.0, 0.0))
    if case_id == 3:
        return replace(base, case_id=3, strategy=strategy, enabled=(True, True, False), forced_weights=None)
    if case_id == 4:
        return replace(base, case_id=4, strategy=strategy, enabled=(True, True, True), forced_weights=None)
    raise ConfigurationError(f"unknown case {case_id!r}; expected 1..4")


def _kernel_inputs(sc: Scenario):
    f0 = sc.nominal_freq_hz
    gens = sc.generators
    two_hs = np.array([g.kinetic_mws if g.online else 0.0 for g in gens], dtype=np.float64)
    gain = np.array([g.governor_gain(f0) for g in gens], dtype=np.float64)
    tc = np.array([g.governor_time_const_s for g in gens], dtype=np.float64)
    lim = np.array([g.governor_limit_pu * g.rated_power_mva for g in gens], dtype=np.float64)

    p = np.zeros(K.N_PARAMS)
    ev, dc, b = sc.ev, sc.dc, sc.bess
    p[K.P_EV_K] = ev.droop_gain_k_ev
    p[K.P_EV_W] = ev.rated_power_w_ev
    p[K.P_EV_E] = ev.energy_e_ev
    p[K.P_EV_SOC0] = ev.soc
    p[K.P_EV_SOC_MIN] = ev.soc_min
    p[K.P_EV_SOC_MAX] = ev.soc_max
    p[K.P_UPS_K] = dc.ups_gain_k_ups
    p[K.P_UPS_W] = dc.ups_capacity_w_ups
    p[K.P_IT_BETA] = dc.workload_gain_beta
    p[K.P_IT_W] = dc.it_flex_w_it
    p[K.P_B_K] = b.droop_gain_k_b
    p[K.P_B_T] = b.time_const_t_b
    p[K.P_B_W] = b.rated_power_w_b
    p[K.P_B_E] = b.energy_e_bess
    p[K.P_B_SOC0] = b.soc
    p[K.P_B_SOC_MIN] = b.soc_min
    p[K.P_B_SOC_MAX] = b.soc_max
    p[K.P_EN_EV], p[K.P_EN_DC], p[K.P_EN_B] = (float(e) for e in sc.enabled)
    p[K.P_BIDIR] = float(sc.bidirectional)
    p[K.P_HORIZON] = sc.capacity_horizon_s

    if sc.forced_weights is not None:
        p[K.P_ADAPTIVE] = 0.0
        p[K.P_FW_EV], p[K.P_FW_DC], p[K.P_FW_B] = sc.forced_weights
    elif sc.strategy.adaptive or sc.case_id == 3:
        p[K.P_ADAPTIVE] = 1.0
    else:
        p[K.P_ADAPTIVE] = 0.0
        p[K.P_FW_EV], p[K.P_FW_DC], p[K.P_FW_B] = sc.strategy.weights().as_tuple()
    p[K.P_T_EV], p[K.P_T_DC], p[K.P_T_B] = sc.strategy.time_constants
    p[K.P_GAIN_CAP] = sc.strategy.gain_cap if sc.strategy.gain_cap is not None else 0.0
    p[K.P_INTERP] = 1.0 if sc.delay_interpolation == "linear" else 0.0
    p[K.P_LOSS] = sc.disturbance.power_loss_mw
    p[K.P_F0] = f0
    p[K.P_DAMPING] = sc.damping_d_mw_per_hz

    delays = np.array(
        [steps_for(ev.delay_t_ev, sc.dt_s), steps_for(dc.effective_ups_delay, sc.dt_s),
         steps_for(dc.it_delay_t_it, sc.dt_s)],
        dtype=np.int64,
    )
    trip = sc.disturbance.tripped_generator
    trip_index = generator_index(gens, trip) if trip is not None else -1
    return two_hs, gain, tc, lim, p, delays, trip_index


def simulate_samples(scenario: Scenario) -> np.ndarray:
    """Run the time-domain simulation and return the raw sample matrix."""
    scenario.validate()
    two_hs, gain, tc, lim, p, delays, trip_index = _kernel_inputs(scenario)
    n_steps = scenario.n_steps
    every = scenario.sample_every
    out = np.zeros((n_steps // every + 1, K.N_COLS))
    status, step = K.simulate(
        two_hs, gain, tc, lim, p, delays, trip_index, scenario.trip_step,
        n_steps, scenario.dt_s, every, scenario.control_every, out,
    )
    if status == K.STATUS_COLLAPSE:
        raise SystemCollapseError(f"system collapse at t={step * scenario.dt_s:.6g} s: no online inertia")
    if status == K.STATUS_NONFINITE:
        raise SimulationError(f"non-finite state at t={step * scenario.dt_s:.6g} s (step {step})")
    return out


def run_scenario(scenario: Scenario) -> RunResult:
    samples = simulate_samples(scenario)
    metrics = compute_metrics(samples, scenario.nominal_freq_hz, scenario.disturbance.trigger_time_s,
                              scenario.metrics)
    return RunResult(scenario, samples, metrics)


def _linear_slopes(t: np.ndarray, f: np.ndarray, width: int) -> np.ndarray:
    tw = np.lib.stride_tricks.sliding_window_view(t, width)
    fw = np.lib.stride_tricks.sliding_window_view(f, width)
    tc = tw - tw.mean(axis=1, keepdims=True)
    fc = fw - fw.mean(axis=1, keepdims=True)
    return (tc * fc).sum(axis=1) / (tc * tc).sum(axis=1)


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def compute_metrics(result, nominal_freq_hz: float = 60.0, dist_time_s: float = 5.0,
                    settings: MetricSettings = MetricSettings()) -> MetricsRecord:
    """Nadir, windowed RoCoF, recovery time, peak powers and FFR energy.

    ``result`` is a :class:`RunResult` or an ``(n, 12)`` sample matrix in
    :data:`COLUMNS` order with a uniform time step.
    """
    s = np.asarray(getattr(result, "samples", result), dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != K.N_COLS or s.shape[0] < 2:
        raise MetricsError("expected an (n, 12) sample matrix with n >= 2")
    t = s[:, K.C_T]
    f = s[:, K.C_F]
    stride = float(t[1] - t[0])
    if not stride > 0:
        raise MetricsError("sample times must be strictly increasing")
    eps = 1e-9 * stride

    i0 = int(np.searchsorted(t, dist_time_s - eps))
    w = steps_for(settings.rocof_window_s, stride)
    span_end = int(np.searchsorted(t, dist_time_s + settings.rocof_span_s + eps, side="right"))
    if w < 1 or i0 + w >= span_end or t[-1] < dist_time_s + settings.rocof_span_s - eps:
        raise MetricsError("series too short for the RoCoF window")
    slopes = _linear_slopes(t[i0:span_end], f[i0:span_end], w + 1)
    rocof = float(slopes.min())

    q = steps_for(settings.qss_window_s, stride)
    h = steps_for(settings.recovery_hold_s, stride)
    if q + 1 > len(t) or i0 + h >= len(t):
        raise MetricsError("series too short for the recovery windows")
    f_qss = float(f[-(q + 1):].mean())
    outside = (np.abs(f - f_qss) > settings.recovery_band_hz).astype(np.int64)
    csum = np.concatenate(([0], np.cumsum(outside)))
    starts = np.arange(i0, len(t) - h)
    clean = (csum[starts + h + 1] - csum[starts]) == 0
    recovery = float(t[starts[clean][0]] - dist_time_s) if clean.any() else None
    if recovery is not None:
        recovery = max(recovery, 0.0)

    total = s[:, K.C_TOTAL]
    energy = _trapezoid(np.maximum(total, 0.0), t) / 3600.0
    return MetricsRecord(
        nadir_hz=float(f.min()),
        rocof_hz_per_s=rocof,
        recovery_time_s=recovery,
        max_power_mw={
            "ev": float(s[:, K.C_EV].max()),
            "dc": float((s[:, K.C_UPS] + s[:, K.C_IT]).max()),
            "bess": float(s[:, K.C_BESS].max()),
        },
        ffr_energy_mwh=energy,
    )


@dataclass
class StrategyComparison:
    """Results of every (strategy, case) cell, keyed in fixed matrix order."""

    results: dict
    errors: dict = field(default_factory=dict)

    def metrics(self, strategy: str, case_id: int) -> MetricsRecord:
        return self.results[(strategy, case_id)].metrics

    @property
    def adaptive_dominates(self) -> bool:
        """Adaptive case 4 has the highest nadir and the shortest recovery among strategies."""
        if ("adaptive", 4) not in self.results:
            return False
        best = self.metrics("adaptive", 4)
        for kind in STRATEGIES:
            if kind == "adaptive" or (kind, 4) not in self.results:
                continue
            other = self.metrics(kind, 4)
            if best.nadir_hz < other.nadir_hz:
                return False
            if other.recovery_time_s is not None and (
                best.recovery_time_s is None or best.recovery_time_s > other.recovery_time_s
            ):
                return False
        return True


def strategy_matrix(base: Scenario, strategies=STRATEGIES, cases=CASES) -> list:
    return [((kind, case_id), build_case(case_id, kind, base)) for kind in strategies for case_id in cases]


def compare_strategies(base: Scenario | None = None, jobs: int = 1, strategies=STRATEGIES,
                       cases=CASES) -> StrategyComparison:
    """Run every strategy x case combination.

    Cells run on a thread pool of ``jobs`` workers (the compiled kernel
    releases the GIL); results are keyed by (strategy, case) so completion
    order never matters.  Failed cells are collected in ``errors``.
    """
    if base is None:
        from .config import default_scenario

        base = default_scenario()
    cells = strategy_matrix(base, strategies, cases)
    results = {}
    errors = {}

    def _run(item):
        key, sc = item
        try:
            return key, run_scenario(sc), None
        except Exception as exc:  # collected per cell
            return key, None, exc

    if jobs <= 1:
        outcomes = [_run(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run, cells))
    for key, res, exc in outcomes:
        if exc is None:
            results[key] = res
        else:
            errors[key] = exc
    return StrategyComparison(results, errors)
