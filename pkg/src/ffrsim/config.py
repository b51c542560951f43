"""JSON scenario configuration: defaults, validation and conversion to a Scenario.

Every omitted field takes its default; unknown keys are rejected.  Errors
carry a stable exit code and, where the offending key can be located, the
file line number.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .coordinator import KINDS, AllocationStrategy
from .errors import ConfigurationError
from .grid import DisturbanceEvent, Generator, scale_inertia
from .resources import BessModel, DataCenterModel, EvFleetModel
from .scenario import INTERPOLATIONS, MetricSettings, Scenario, build_case

EXIT_MISSING = 10
EXIT_MALFORMED = 11
EXIT_UNKNOWN_KEY = 12
EXIT_OUT_OF_RANGE = 13


class ConfigError(ConfigurationError):
    def __init__(self, message: str, exit_code: int = EXIT_OUT_OF_RANGE):
        super().__init__(message)
        self.exit_code = exit_code


# Governor settings below are calibration values for the uniform-frequency
# model (scripts/calibrate.py), not published parameter values.
GENERATOR_DEFAULTS = {
    "governor_droop_r_pu": 0.05,
    "governor_time_const_s": 1.9,
    "governor_limit_pu": 0.3,
    "online": True,
}

# Ten machines, 6100 MVA in total; G1 is the 1000 MVA unit that trips.
# Inertia constants are rescaled uniformly by grid.target_m_mw_s_per_hz.
_GENERATOR_TABLE = (
    ("G1", 1000.0, 4.2),
    ("G2", 700.0, 3.03),
    ("G3", 650.0, 3.58),
    ("G4", 650.0, 2.86),
    ("G5", 550.0, 2.6),
    ("G6", 700.0, 3.48),
    ("G7", 600.0, 2.64),
    ("G8", 550.0, 2.43),
    ("G9", 400.0, 3.45),
    ("G10", 300.0, 5.0),
)

DEFAULTS = {
    "case": 4,
    "grid": {
        "nominal_freq": 60.0,
        "damping_d": 60.0,
        # 1000 MW / 0.58 Hz/s: post-trip M that yields the reported initial RoCoF.
        "target_m_mw_s_per_hz": 1724.14,
        "generators": [
            {"id": gid, "rated_power_mva": s, "inertia_h_s": h, **GENERATOR_DEFAULTS}
            for gid, s, h in _GENERATOR_TABLE
        ],
    },
    "resources": {
        "bidirectional": False,
        "ev": {
            "droop_gain_k_ev": 25.0,
            "delay_t_ev": 0.080,
            "rated_power_w_ev": 200.0,
            "energy_e_ev": 100.0,
            "soc": 0.6,
            "soc_min": 0.2,
            "soc_max": 0.9,
        },
        "dc": {
            "ups_gain_k_ups": 20.0,
            "ups_delay": 0.010,
            "ups_delay_enabled": True,
            "ups_capacity_w_ups": 100.0,
            "it_baseline_p_it0": 150.0,
            "workload_gain_beta": 12.0,
            "it_delay_t_it": 0.200,
            "it_flex_w_it": 50.0,
        },
        "bess": {
            "droop_gain_k_b": 40.0,
            "time_const_t_b": 0.040,
            "rated_power_w_b": 150.0,
            "energy_e_bess": 300.0,
            "soc": 0.5,
            "soc_min": 0.1,
            "soc_max": 0.9,
        },
    },
    "strategy": {
        "kind": "adaptive",
        "fixed_weights": None,
        "t_dc_override": None,
        "gain_cap": None,
        "control_period": 0.010,
    },
    "disturbance": {
        "time": 5.0,
        "power_mw": 1000.0,
        "trip_generator": "G1",
    },
    "solver": {
        "dt": 0.001,
        "duration": 30.0,
        "sample_stride": 0.010,
        "capacity_horizon": 10.0,
        "delay_interpolation": "linear",
    },
    "metrics": {
        "rocof_window": 0.5,
        "rocof_span": 2.0,
        "recovery_band_hz": 0.05,
        "recovery_hold": 1.0,
        "qss_window": 1.0,
    },
}

# Types of keys whose default is null.
_NULLABLE = {
    ("strategy", "fixed_weights"): "weights",
    ("strategy", "t_dc_override"): "number",
    ("strategy", "gain_cap"): "number",
    ("grid", "target_m_mw_s_per_hz"): "number",
    ("disturbance", "trip_generator"): "string",
}
_GEN_REQUIRED = ("id", "rated_power_mva", "inertia_h_s")
_GEN_KEYS = _GEN_REQUIRED + tuple(GENERATOR_DEFAULTS)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _line_of(text: str | None, path: tuple) -> int | None:
    if not text:
        return None
    pos = 0
    line = None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"' + re.escape(str(key)) + r'"\s*:').search(text, pos)
        if m is None:
            return line
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


class _Checker:
    def __init__(self, text: str | None, source: str):
        self.text = text
        self.source = source

    def fail(self, path: tuple, message: str, code: int = EXIT_OUT_OF_RANGE):
        dotted = ".".join(str(p) for p in path)
        line = _line_of(self.text, path)
        where = f"{self.source}:{line}" if line is not None else self.source
        raise ConfigError(f"{where}: {dotted}: {message}", code)


def _merge(defaults, given, path, chk: _Checker):
    if not isinstance(given, dict):
        chk.fail(path, "expected an object")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        sub = path + (key,)
        if key not in defaults:
            chk.fail(sub, "unknown key", EXIT_UNKNOWN_KEY)
        default = defaults[key]
        if key == "generators" and path == ("grid",):
            out[key] = _merge_generators(value, sub, chk)
        elif isinstance(default, dict):
            out[key] = _merge(default, value, sub, chk)
        elif sub in _NULLABLE:
            out[key] = _check_nullable(value, sub, chk)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                chk.fail(sub, f"expected true/false, got {value!r}")
            out[key] = value
        elif isinstance(default, (int, float)):
            if not _is_number(value) or not math.isfinite(value):
                chk.fail(sub, f"expected a finite number, got {value!r}")
            out[key] = value if isinstance(default, int) else float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                chk.fail(sub, f"expected a string, got {value!r}")
            out[key] = value
    return out


def _check_nullable(value, path, chk):
    if value is None:
        return None
    kind = _NULLABLE.get(path)
    if kind == "number":
        if not _is_number(value) or not math.isfinite(value):
            chk.fail(path, f"expected a number or null, got {value!r}")
        return float(value)
    if kind == "string":
        if not isinstance(value, str):
            chk.fail(path, f"expected a string or null, got {value!r}")
        return value
    if kind == "weights":
        if not (isinstance(value, list) and len(value) == 3 and all(_is_number(v) for v in value)):
            chk.fail(path, "expected [ev, dc, bess] weights or null")
        return [float(v) for v in value]
    return value


def _merge_generators(value, path, chk):
    if not isinstance(value, list) or not value:
        chk.fail(path, "expected a non-empty list of generators")
    gens = []
    for i, item in enumerate(value):
        sub = path + (i,)
        if not isinstance(item, dict):
            chk.fail(sub, "expected a generator object")
        for key in item:
            if key not in _GEN_KEYS:
                chk.fail(sub + (key,), "unknown key", EXIT_UNKNOWN_KEY)
        for key in _GEN_REQUIRED:
            if key not in item:
                chk.fail(sub, f"missing required key {key!r}")
        gen = dict(GENERATOR_DEFAULTS)
        gen.update(item)
        if not isinstance(gen["id"], str):
            chk.fail(sub + ("id",), "expected a string id")
        if not isinstance(gen["online"], bool):
            chk.fail(sub + ("online",), "expected true/false")
        for key in _GEN_KEYS[1:]:
            if key != "online" and (not _is_number(gen[key]) or not gen[key] > 0):
                chk.fail(sub + (key,), f"must be a number > 0, got {gen[key]!r}")
        gens.append(gen)
    return gens


def _ranges(doc, chk):
    """Field-level range checks, reported with the offending key's path."""
    def positive(*path):
        v = _get(doc, path)
        if not v > 0:
            chk.fail(path, f"must be > 0, got {v!r}")

    def nonneg(*path):
        v = _get(doc, path)
        if not v >= 0:
            chk.fail(path, f"must be >= 0, got {v!r}")

    def fraction(*path):
        v = _get(doc, path)
        if not 0.0 <= v <= 1.0:
            chk.fail(path, f"must lie in [0, 1], got {v!r}")

    if doc["case"] not in (1, 2, 3, 4):
        chk.fail(("case",), f"must be 1, 2, 3 or 4, got {doc['case']!r}")
    positive("grid", "nominal_freq")
    nonneg("grid", "damping_d")
    if doc["grid"]["target_m_mw_s_per_hz"] is not None:
        positive("grid", "target_m_mw_s_per_hz")
    ids = [g["id"] for g in doc["grid"]["generators"]]
    if len(set(ids)) != len(ids):
        chk.fail(("grid", "generators"), "generator ids must be unique")

    for key in ("droop_gain_k_ev", "delay_t_ev"):
        nonneg("resources", "ev", key)
    for key in ("rated_power_w_ev", "energy_e_ev"):
        positive("resources", "ev", key)
    for key in ("ups_gain_k_ups", "ups_delay", "ups_capacity_w_ups", "it_baseline_p_it0",
                "workload_gain_beta", "it_delay_t_it", "it_flex_w_it"):
        nonneg("resources", "dc", key)
    nonneg("resources", "bess", "droop_gain_k_b")
    for key in ("time_const_t_b", "rated_power_w_b", "energy_e_bess"):
        positive("resources", "bess", key)
    for res in ("ev", "bess"):
        for key in ("soc", "soc_min", "soc_max"):
            fraction("resources", res, key)
        r = doc["resources"][res]
        if not r["soc_min"] < r["soc_max"]:
            chk.fail(("resources", res, "soc_min"), "must be < soc_max")
    dc = doc["resources"]["dc"]
    if dc["it_flex_w_it"] > dc["it_baseline_p_it0"]:
        chk.fail(("resources", "dc", "it_flex_w_it"), "must not exceed it_baseline_p_it0")

    st = doc["strategy"]
    if st["kind"] not in KINDS:
        chk.fail(("strategy", "kind"), f"must be one of {', '.join(KINDS)}, got {st['kind']!r}")
    if st["kind"] == "custom" and st["fixed_weights"] is None:
        chk.fail(("strategy", "fixed_weights"), "required when kind is custom")
    if st["fixed_weights"] is not None:
        w = st["fixed_weights"]
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            chk.fail(("strategy", "fixed_weights"), f"must be >= 0 and sum to 1, got {w}")
    for key in ("t_dc_override", "gain_cap"):
        if st[key] is not None:
            positive("strategy", key)
    positive("strategy", "control_period")

    nonneg("disturbance", "time")
    nonneg("disturbance", "power_mw")
    trip = doc["disturbance"]["trip_generator"]
    if trip is not None and trip not in ids:
        chk.fail(("disturbance", "trip_generator"), f"unknown generator id {trip!r}")

    sv = doc["solver"]
    for key in ("dt", "duration", "sample_stride", "capacity_horizon"):
        positive("solver", key)
    if sv["delay_interpolation"] not in INTERPOLATIONS:
        chk.fail(("solver", "delay_interpolation"), f"must be one of {INTERPOLATIONS}")
    if not sv["duration"] > doc["disturbance"]["time"]:
        chk.fail(("solver", "duration"), "must exceed disturbance.time")
    for key, value in (("sample_stride", sv["sample_stride"]), ("control_period", st["control_period"])):
        ratio = value / sv["dt"]
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
            chk.fail(("solver", "dt"), f"must divide {key} ({value!r})")
    for key in doc["metrics"]:
        positive("metrics", key)


def _get(doc, path):
    for key in path:
        doc = doc[key]
    return doc


@dataclass(frozen=True)
class ConfigDocument:
    """A fully defaulted, validated configuration."""

    data: dict
    source: str = "<defaults>"

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def base_scenario(self) -> Scenario:
        return _to_scenario(self.data)

    def scenario(self, case: int | None = None, strategy: str | None = None) -> Scenario:
        base = self.base_scenario()
        return build_case(self.data["case"] if case is None else case,
                          base.strategy.kind if strategy is None else strategy, base)

    def with_overrides(self, **solver) -> "ConfigDocument":
        data = copy.deepcopy(self.data)
        for key, value in solver.items():
            if value is not None:
                data["solver"][key] = float(value)
        return load_config_dict(data, self.source)


def _to_scenario(d: dict) -> Scenario:
    g = d["grid"]
    f0 = g["nominal_freq"]
    gens = tuple(
        Generator(
            id=x["id"],
            rated_power_mva=float(x["rated_power_mva"]),
            inertia_h_s=float(x["inertia_h_s"]),
            governor_droop_r_pu=float(x["governor_droop_r_pu"]),
            governor_time_const_s=float(x["governor_time_const_s"]),
            governor_limit_pu=float(x["governor_limit_pu"]),
            online=x["online"],
        )
        for x in g["generators"]
    )
    trip = d["disturbance"]["trip_generator"]
    if g["target_m_mw_s_per_hz"] is not None:
        gens = scale_inertia(gens, g["target_m_mw_s_per_hz"], f0, exclude=trip)
    r = d["resources"]
    ev = EvFleetModel(**r["ev"])
    dc = DataCenterModel(**r["dc"])
    bess = BessModel(**r["bess"])
    st = d["strategy"]
    t_dc = st["t_dc_override"] if st["t_dc_override"] is not None else dc.blended_time_constant()
    strategy = AllocationStrategy(
        kind=st["kind"],
        fixed=tuple(st["fixed_weights"]) if st["fixed_weights"] is not None else None,
        time_constants=(max(ev.delay_t_ev, 1e-9), t_dc, bess.time_const_t_b),
        gain_cap=st["gain_cap"],
    )
    m = d["metrics"]
    sv = d["solver"]
    sc = Scenario(
        generators=gens,
        ev=ev,
        dc=dc,
        bess=bess,
        strategy=strategy,
        disturbance=DisturbanceEvent(d["disturbance"]["time"], d["disturbance"]["power_mw"], trip),
        nominal_freq_hz=f0,
        damping_d_mw_per_hz=g["damping_d"],
        duration_s=sv["duration"],
        dt_s=sv["dt"],
        sample_stride_s=sv["sample_stride"],
        control_period_s=st["control_period"],
        capacity_horizon_s=sv["capacity_horizon"],
        bidirectional=r["bidirectional"],
        delay_interpolation=sv["delay_interpolation"],
        metrics=MetricSettings(m["rocof_window"], m["rocof_span"], m["recovery_band_hz"],
                               m["recovery_hold"], m["qss_window"]),
    )
    sc.validate()
    return sc


def load_config_dict(obj, source: str = "<dict>", text: str | None = None) -> ConfigDocument:
    chk = _Checker(text, source)
    data = _merge(DEFAULTS, obj, (), chk)
    _ranges(data, chk)
    doc = ConfigDocument(data, source)
    try:
        doc.base_scenario()
    except ConfigurationError as exc:
        raise ConfigError(f"{source}: {exc}", EXIT_OUT_OF_RANGE) from exc
    return doc


def parse_config(path) -> ConfigDocument:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{p}: config file not found", EXIT_MISSING) from None
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc.strerror}", EXIT_MISSING) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}: malformed JSON: {exc.msg}", EXIT_MALFORMED) from None
    return load_config_dict(obj, str(p), text)


def default_document() -> ConfigDocument:
    return load_config_dict({}, "<defaults>")


def default_scenario(case: int = 4, strategy: str = "adaptive") -> Scenario:
    return default_document().scenario(case, strategy)
