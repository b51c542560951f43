import json

import pytest

from ffrsim import ConfigError, default_document, parse_config
from ffrsim.config import EXIT_MALFORMED, EXIT_MISSING, EXIT_OUT_OF_RANGE, EXIT_UNKNOWN_KEY, load_config_dict

# Resource parameters as tabulated for the case study, written out literally.
TABLE_ECHO = {
    "resources": {
        "ev": {"rated_power_w_ev": 200, "droop_gain_k_ev": 25, "delay_t_ev": 0.08, "soc_min": 0.2, "soc_max": 0.9},
        "dc": {"ups_capacity_w_ups": 100, "ups_gain_k_ups": 20, "it_flex_w_it": 50, "it_delay_t_it": 0.2,
               "workload_gain_beta": 12},
        "bess": {"rated_power_w_b": 150, "energy_e_bess": 300, "droop_gain_k_b": 40, "time_const_t_b": 0.04},
    },
    "disturbance": {"time": 5, "power_mw": 1000, "trip_generator": "G1"},
}


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_object_is_full_default(tmp_path):
    doc = parse_config(write(tmp_path, "{}"))
    assert doc.data == default_document().data
    sc = doc.scenario()
    assert sc.case_id == 4 and sc.strategy.kind == "adaptive"
    assert sc.bess.time_const_t_b == 0.04 and sc.ev.droop_gain_k_ev == 25.0 and sc.dc.workload_gain_beta == 12.0


def test_table_echo_equals_defaults(tmp_path):
    doc = parse_config(write(tmp_path, json.dumps(TABLE_ECHO)))
    assert doc.data == default_document().data
    assert doc.sha256 == default_document().sha256


def test_out_of_range_names_the_field(tmp_path):
    p = write(tmp_path, '{"resources":{"bess":{"time_const_t_b": -1}}}')
    with pytest.raises(ConfigError) as err:
        parse_config(p)
    assert err.value.exit_code == EXIT_OUT_OF_RANGE == 13
    assert "resources.bess.time_const_t_b" in str(err.value)


def test_unknown_key(tmp_path):
    p = write(tmp_path, '{\n  "resources": {\n    "ev": {"droop_gain": 3}\n  }\n}')
    with pytest.raises(ConfigError) as err:
        parse_config(p)
    assert err.value.exit_code == EXIT_UNKNOWN_KEY == 12
    assert "resources.ev.droop_gain" in str(err.value)
    assert f"{p}:3" in str(err.value)


def test_malformed_json_reports_line(tmp_path):
    p = write(tmp_path, '{\n  "case": 4,\n  "grid": \n}')
    with pytest.raises(ConfigError) as err:
        parse_config(p)
    assert err.value.exit_code == EXIT_MALFORMED == 11
    assert f"{p}:4" in str(err.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(tmp_path / "absent.json")
    assert err.value.exit_code == EXIT_MISSING == 10


@pytest.mark.parametrize("patch, field", [
    ({"resources": {"ev": {"soc_min": 0.95}}}, "soc"),
    ({"resources": {"dc": {"it_flex_w_it": 400}}}, "it_flex_w_it"),
    ({"strategy": {"kind": "custom"}}, "fixed_weights"),
    ({"strategy": {"kind": "custom", "fixed_weights": [0.5, 0.5, 0.1]}}, "fixed_weights"),
    ({"strategy": {"kind": "fastest"}}, "strategy.kind"),
    ({"solver": {"dt": 0.003}}, "dt"),
    ({"case": 7}, "case"),
    ({"grid": {"damping_d": "high"}}, "grid.damping_d"),
    ({"disturbance": {"trip_generator": "G42"}}, "G42"),
])
def test_invalid_values_exit_13(patch, field):
    with pytest.raises(ConfigError) as err:
        load_config_dict(patch)
    assert err.value.exit_code == EXIT_OUT_OF_RANGE
    assert field in str(err.value)


def test_partial_override_keeps_other_defaults():
    doc = load_config_dict({"resources": {"bess": {"energy_e_bess": 50}}, "strategy": {"kind": "bess_dominant"}})
    sc = doc.scenario()
    assert sc.bess.energy_e_bess == 50.0 and sc.bess.rated_power_w_b == 150.0
    assert sc.strategy.kind == "bess_dominant"


def test_custom_weights_flow_to_scenario():
    doc = load_config_dict({"strategy": {"kind": "custom", "fixed_weights": [0.5, 0.25, 0.25]}})
    assert doc.scenario().strategy.fixed == (0.5, 0.25, 0.25)


def test_blended_dc_time_constant_is_default():
    sc = default_document().scenario()
    assert sc.strategy.time_constants == pytest.approx((0.08, 11 / 150, 0.04), rel=1e-15)
    override = load_config_dict({"strategy": {"t_dc_override": 0.01}}).scenario()
    assert override.strategy.time_constants[1] == 0.01


def test_generator_list_replaces_default():
    gens = [{"id": "A", "rated_power_mva": 1000, "inertia_h_s": 5}, {"id": "B", "rated_power_mva": 500, "inertia_h_s": 4}]
    doc = load_config_dict({"grid": {"generators": gens, "target_m_mw_s_per_hz": None},
                            "disturbance": {"trip_generator": "A"}})
    sc = doc.scenario()
    assert [g.id for g in sc.generators] == ["A", "B"]
    assert sc.generators[1].governor_droop_r_pu == 0.05
    assert sc.post_trip_kinetic_constant() == pytest.approx(2 * 4 * 500 / 60)


def test_sha_is_canonical():
    a = load_config_dict({"case": 3, "solver": {"dt": 0.0005}})
    b = load_config_dict({"solver": {"dt": 0.0005}, "case": 3})
    assert a.sha256 == b.sha256 != default_document().sha256


def test_shipped_default_config_matches(tmp_path):
    from pathlib import Path

    shipped = Path(__file__).resolve().parents[1] / "configs" / "default.json"
    assert parse_config(shipped).data == default_document().data
