"""EV fleet, data center (UPS + IT workload) and BESS response models.

Sign convention: positive power is injected into the grid (or load relieved
from it), so every channel is >= 0 when the frequency deviation is negative.
Over-frequency absorption is off unless ``bidirectional=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import _kernels as K
from .errors import ConfigurationError

DEFAULT_HORIZON_S = 10.0


def _check_positive(owner, **values):
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise ConfigurationError(f"{owner}: {name} must be > 0, got {value!r}")


def _check_nonnegative(owner, **values):
    for name, value in values.items():
        if not (math.isfinite(value) and value >= 0):
            raise ConfigurationError(f"{owner}: {name} must be >= 0, got {value!r}")


def _check_soc(owner, soc, soc_min, soc_max):
    if not 0.0 <= soc_min < soc_max <= 1.0:
        raise ConfigurationError(f"{owner}: need 0 <= soc_min < soc_max <= 1, got {soc_min!r}, {soc_max!r}")
    if not 0.0 <= soc <= 1.0:
        raise ConfigurationError(f"{owner}: soc must lie in [0, 1], got {soc!r}")


@dataclass(frozen=True)
class EvFleetModel:
    droop_gain_k_ev: float = 25.0
    delay_t_ev: float = 0.080
    rated_power_w_ev: float = 200.0
    energy_e_ev: float = 100.0
    soc: float = 0.6
    soc_min: float = 0.2
    soc_max: float = 0.9

    def __post_init__(self):
        _check_nonnegative("ev", droop_gain_k_ev=self.droop_gain_k_ev, delay_t_ev=self.delay_t_ev)
        _check_positive("ev", rated_power_w_ev=self.rated_power_w_ev, energy_e_ev=self.energy_e_ev)
        _check_soc("ev", self.soc, self.soc_min, self.soc_max)


@dataclass(frozen=True)
class DataCenterModel:
    ups_gain_k_ups: float = 20.0
    ups_delay: float = 0.010
    ups_delay_enabled: bool = True
    ups_capacity_w_ups: float = 100.0
    it_baseline_p_it0: float = 150.0
    workload_gain_beta: float = 12.0
    it_delay_t_it: float = 0.200
    it_flex_w_it: float = 50.0

    def __post_init__(self):
        _check_nonnegative(
            "dc",
            ups_gain_k_ups=self.ups_gain_k_ups,
            ups_delay=self.ups_delay,
            ups_capacity_w_ups=self.ups_capacity_w_ups,
            it_baseline_p_it0=self.it_baseline_p_it0,
            workload_gain_beta=self.workload_gain_beta,
            it_delay_t_it=self.it_delay_t_it,
            it_flex_w_it=self.it_flex_w_it,
        )
        if self.it_flex_w_it > self.it_baseline_p_it0:
            raise ConfigurationError("dc: it_flex_w_it must not exceed it_baseline_p_it0")

    @property
    def effective_ups_delay(self) -> float:
        return self.ups_delay if self.ups_delay_enabled else 0.0

    @property
    def capacity(self) -> float:
        return self.ups_capacity_w_ups + self.it_flex_w_it

    def blended_time_constant(self) -> float:
        """Capacity-weighted response time of the UPS and IT channels."""
        cap = self.capacity
        if cap <= 0:
            raise ConfigurationError("dc: zero capacity has no blended time constant")
        return (self.ups_capacity_w_ups * self.ups_delay + self.it_flex_w_it * self.it_delay_t_it) / cap


@dataclass(frozen=True)
class BessModel:
    droop_gain_k_b: float = 40.0
    time_const_t_b: float = 0.040
    rated_power_w_b: float = 150.0
    energy_e_bess: float = 300.0
    soc: float = 0.5
    soc_min: float = 0.1
    soc_max: float = 0.9
    power_output: float = 0.0

    def __post_init__(self):
        _check_nonnegative("bess", droop_gain_k_b=self.droop_gain_k_b)
        _check_positive(
            "bess",
            time_const_t_b=self.time_const_t_b,
            rated_power_w_b=self.rated_power_w_b,
            energy_e_bess=self.energy_e_bess,
        )
        _check_soc("bess", self.soc, self.soc_min, self.soc_max)
        if abs(self.power_output) > self.rated_power_w_b * (1 + 1e-12):
            raise ConfigurationError("bess: |power_output| exceeds rated_power_w_b")


@dataclass(frozen=True)
class ResourcePowerSample:
    ev_power: float = 0.0
    ups_power: float = 0.0
    it_reduction: float = 0.0
    bess_power: float = 0.0

    @property
    def total_ffr(self) -> float:
        return self.ev_power + self.ups_power + self.it_reduction + self.bess_power


def available_capacity(resource, horizon: float = DEFAULT_HORIZON_S) -> float:
    """Power (MW) the resource can offer the coordinator.

    Storage is derated so that the offer can be held for ``horizon`` seconds
    above the SOC floor; the data center offers its UPS plus flexible IT
    capacity.
    """
    if not horizon > 0:
        raise ConfigurationError(f"capacity horizon must be > 0, got {horizon!r}")
    if isinstance(resource, EvFleetModel):
        return K.discharge_headroom(resource.rated_power_w_ev, resource.soc, resource.soc_min,
                                    resource.energy_e_ev, horizon)
    if isinstance(resource, BessModel):
        return K.discharge_headroom(resource.rated_power_w_b, resource.soc, resource.soc_min,
                                    resource.energy_e_bess, horizon)
    if isinstance(resource, DataCenterModel):
        return resource.capacity
    raise TypeError(f"not a resource model: {type(resource).__name__}")


def ev_power(model: EvFleetModel, alpha_ev: float, delayed_dev: float,
             horizon: float = DEFAULT_HORIZON_S, bidirectional: bool = False) -> float:
    """EV fleet injection for a delayed frequency deviation."""
    hi = available_capacity(model, horizon)
    lo = 0.0
    if bidirectional:
        lo = -K.charge_headroom(model.rated_power_w_ev, model.soc, model.soc_max, model.energy_e_ev, horizon)
    return K.clamp(-alpha_ev * model.droop_gain_k_ev * delayed_dev, lo, hi)


def _soc_after(soc, energy_mwh, soc_min, soc_max, power_mw, dt):
    return K.clamp(soc - power_mw * dt / (3600.0 * energy_mwh), soc_min, soc_max)


def ev_soc_step(model: EvFleetModel, power: float, dt: float) -> EvFleetModel:
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt!r}")
    if not model.energy_e_ev > 0:
        raise ConfigurationError("ev: energy_e_ev must be > 0")
    return replace(model, soc=_soc_after(model.soc, model.energy_e_ev, model.soc_min, model.soc_max, power, dt))


def ups_power(model: DataCenterModel, alpha_dc: float, dev: float, bidirectional: bool = False) -> float:
    lo = -model.ups_capacity_w_ups if bidirectional else 0.0
    return K.clamp(-alpha_dc * model.ups_gain_k_ups * dev, lo, model.ups_capacity_w_ups)


def it_reduction(model: DataCenterModel, alpha_dc: float, delayed_dev: float) -> float:
    """IT load relieved (MW); actual consumption is ``it_baseline_p_it0`` minus this."""
    return K.clamp(-alpha_dc * model.workload_gain_beta * delayed_dev, 0.0, model.it_flex_w_it)


def it_consumption(model: DataCenterModel, alpha_dc: float, delayed_dev: float) -> float:
    return model.it_baseline_p_it0 - it_reduction(model, alpha_dc, delayed_dev)


def bess_target(model: BessModel, alpha_bess: float, dev: float,
                horizon: float = DEFAULT_HORIZON_S, bidirectional: bool = False) -> float:
    hi = available_capacity(model, horizon)
    lo = 0.0
    if bidirectional:
        lo = -K.charge_headroom(model.rated_power_w_b, model.soc, model.soc_max, model.energy_e_bess, horizon)
    return K.clamp(-alpha_bess * model.droop_gain_k_b * dev, lo, hi)


def bess_step(model: BessModel, alpha_bess: float, dev: float, dt: float,
              horizon: float = DEFAULT_HORIZON_S, bidirectional: bool = False) -> tuple[BessModel, float]:
    """Advance the converter lag by ``dt`` with ``dev`` held; return (model, output MW)."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt!r}")
    if not model.time_const_t_b > 0:
        raise ConfigurationError("bess: time_const_t_b must be > 0")
    target = bess_target(model, alpha_bess, dev, horizon, bidirectional)
    power, energy = K.lag_rk4(model.power_output, target, model.time_const_t_b, dt)
    soc = K.clamp(model.soc - energy / (3600.0 * model.energy_e_bess), model.soc_min, model.soc_max)
    return replace(model, power_output=float(power), soc=float(soc)), float(power)
