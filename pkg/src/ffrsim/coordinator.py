"""Upper-level allocation of the droop command across EV, DC and BESS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError

KINDS = ("adaptive", "bess_dominant", "dc_dominant", "ev_dominant", "custom")
FIXED_DEFAULTS = {
    "bess_dominant": (0.2, 0.2, 0.6),
    "dc_dominant": (0.2, 0.6, 0.2),
    "ev_dominant": (0.6, 0.2, 0.2),
}
SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ParticipationWeights:
    alpha_ev: float
    alpha_dc: float
    alpha_bess: float

    def __post_init__(self):
        values = self.as_tuple()
        if any(not (math.isfinite(a) and a >= 0.0) for a in values):
            raise ConfigurationError(f"participation weights must be finite and >= 0, got {values}")
        total = sum(values)
        if total != 0.0 and abs(total - 1.0) > SUM_TOLERANCE:
            raise ConfigurationError(f"participation weights must sum to 1, got {total!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha_ev, self.alpha_dc, self.alpha_bess)

    @property
    def is_sentinel(self) -> bool:
        """True for the all-zero "no FFR" allocation."""
        return self.as_tuple() == (0.0, 0.0, 0.0)


NO_FFR = ParticipationWeights(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AllocationStrategy:
    """How weights are chosen, plus the response times used by the adaptive rule.

    ``time_constants`` is (EV, DC, BESS) in seconds.  ``gain_cap`` (MW/Hz)
    rescales the droop commands when the aggregate sum(alpha_i * k_i) would
    exceed it; ``None`` disables the cap.
    """

    kind: str = "adaptive"
    fixed: tuple[float, float, float] | None = None
    time_constants: tuple[float, float, float] = (0.080, 11.0 / 150.0, 0.040)
    gain_cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if any(not (math.isfinite(t) and t > 0) for t in self.time_constants):
            raise ConfigurationError(f"strategy time constants must be > 0, got {self.time_constants}")
        if self.gain_cap is not None and not self.gain_cap > 0:
            raise ConfigurationError(f"gain_cap must be > 0, got {self.gain_cap!r}")
        if self.kind == "custom" and self.fixed is None:
            raise ConfigurationError("custom strategy needs fixed_weights")
        if self.kind != "adaptive":
            fixed_weights(self.kind, self.fixed)

    @property
    def adaptive(self) -> bool:
        return self.kind == "adaptive"

    def weights(self, capacities=None) -> ParticipationWeights:
        if self.adaptive:
            if capacities is None:
                raise ValueError("adaptive strategy needs capacities")
            return adaptive_weights(capacities, self.time_constants)
        return fixed_weights(self.kind, self.fixed)


def adaptive_weights(capacities, time_constants) -> ParticipationWeights:
    """Speed-capacity weighting: alpha_i proportional to W_i / T_i.

    Evaluated in exact rational arithmetic with one final rounding, so the
    result is invariant under any common rescaling of the capacities that is
    itself exact, and ties between equal W/T ratios are preserved.  The
    simulation kernel uses the float form of the same rule.
    All-zero capacity yields the no-FFR sentinel rather than an error.
    """
    ws = [float(c) for c in capacities]
    ts = [float(t) for t in time_constants]
    if len(ws) != 3 or len(ts) != 3:
        raise ConfigurationError("need three capacities and three time constants")
    if not all(math.isfinite(t) and t > 0 for t in ts):
        raise ConfigurationError("time constants must be finite and > 0")
    if not all(math.isfinite(w) and w >= 0 for w in ws):
        raise ConfigurationError("capacities must be finite and >= 0")
    ratios = [Fraction(w) / Fraction(t) for w, t in zip(ws, ts)]
    total = sum(ratios)
    if total == 0:
        return NO_FFR
    alphas = [float(r / total) for r in ratios]
    return ParticipationWeights(*alphas)


def fixed_weights(kind: str, custom=None) -> ParticipationWeights:
    if kind == "adaptive":
        raise ConfigurationError("adaptive weights are not fixed")
    if kind == "custom" or (custom is not None and kind in FIXED_DEFAULTS):
        if custom is None or len(custom) != 3:
            raise ConfigurationError("fixed weights must be three numbers (ev, dc, bess)")
        values = tuple(float(a) for a in custom)
        if any(a < 0 for a in values) or abs(sum(values) - 1.0) > SUM_TOLERANCE:
            raise ConfigurationError(f"fixed weights must be >= 0 and sum to 1, got {values}")
        return ParticipationWeights(*values)
    try:
        return ParticipationWeights(*FIXED_DEFAULTS[kind])
    except KeyError:
        raise ConfigurationError(f"unknown strategy kind {kind!r}") from None


@dataclass(frozen=True)
class DroopGains:
    """Resource droop gains in MW/Hz; the DC gain covers both UPS and IT."""

    ev: float = 25.0
    ups: float = 20.0
    it: float = 12.0
    bess: float = 40.0

    @property
    def dc(self) -> float:
        return self.ups + self.it


@dataclass(frozen=True)
class AllocatedCommand:
    """Per-resource weights after the gain cap plus the resulting droop commands (MW).

    The commands are what each resource would deliver with no delay, lag or
    saturation; the resource models apply their own dynamics to them.
    """

    weights: ParticipationWeights
    scale: float
    ev_mw: float
    ups_mw: float
    it_mw: float
    bess_mw: float

    @property
    def effective(self) -> tuple[float, float, float]:
        return tuple(self.scale * a for a in self.weights.as_tuple())


def aggregate_gain(weights: ParticipationWeights, gains: DroopGains) -> float:
    return weights.alpha_ev * gains.ev + weights.alpha_dc * gains.dc + weights.alpha_bess * gains.bess


def gain_scale(weights: ParticipationWeights, gains: DroopGains, gain_cap: float | None) -> float:
    if gain_cap is None:
        return 1.0
    agg = aggregate_gain(weights, gains)
    return gain_cap / agg if agg > gain_cap else 1.0


def allocate(weights: ParticipationWeights, dev: float, gains: DroopGains = DroopGains(),
             gain_cap: float | None = None) -> AllocatedCommand:
    s = gain_scale(weights, gains, gain_cap)
    a_ev, a_dc, a_b = weights.as_tuple()
    return AllocatedCommand(
        weights=weights,
        scale=s,
        ev_mw=-s * a_ev * gains.ev * dev,
        ups_mw=-s * a_dc * gains.ups * dev,
        it_mw=-s * a_dc * gains.it * dev,
        bess_mw=-s * a_b * gains.bess * dev,
    )


def weights_trace(run) -> np.ndarray:
    """(n_samples, 3) array of (alpha_ev, alpha_dc, alpha_bess) from a run result."""
    samples = getattr(run, "samples", run)
    return np.asarray(samples)[:, K.C_A_EV:K.C_A_B + 1].copy()
