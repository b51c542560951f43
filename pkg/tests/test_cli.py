import json
import re

import numpy as np
import pytest

from ffrsim import COLUMNS, __version__
from ffrsim.cli import main
from ffrsim.output import read_summary, read_timeseries, sha256_file, timeseries_text
from ffrsim.scenario import STRATEGIES

METRIC_KEYS = {"nadir_hz", "rocof_hz_per_s", "recovery_time_s", "max_power_mw", "ffr_energy_mwh"}


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("batch")
    assert main(["batch", "--out", str(out), "--jobs", "1"]) == 0
    return out


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out
    assert main(["version", "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["version"] == __version__ and info["backend"] in ("numba", "python")


def test_run_writes_bundle(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out.strip()
    assert "\n" not in line and line.startswith("case=4 strategy=adaptive nadir=")
    for name in ("timeseries.csv", "metrics.json", "manifest.json", "run.svg"):
        assert (tmp_path / name).is_file()
    assert not list(tmp_path.glob(".*.tmp"))


def test_metrics_schema_is_exact(tmp_path):
    main(["run", "--out", str(tmp_path), "--no-plots"])
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert set(m) == METRIC_KEYS
    assert set(m["max_power_mw"]) == {"ev", "dc", "bess"}
    assert all(isinstance(v, float) for v in m["max_power_mw"].values())


def test_case_one_energy_is_zero(tmp_path):
    assert main(["run", "--case", "1", "--out", str(tmp_path), "--no-plots"]) == 0
    text = (tmp_path / "metrics.json").read_text()
    assert '"ffr_energy_mwh": 0.0' in text


def test_repeated_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--case", "4", "--strategy", "adaptive", "--out", str(d)]) == 0
    for name in ("timeseries.csv", "metrics.json", "run.svg", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_csv_contract_and_round_trip(tmp_path):
    main(["run", "--out", str(tmp_path), "--no-plots", "--duration", "8"])
    path = tmp_path / "timeseries.csv"
    header = path.read_text().splitlines()[0]
    assert header == ",".join(COLUMNS)
    data = read_timeseries(path)
    assert data.shape == (801, 12)
    # every field carries at most 9 significant digits and re-serializes identically
    assert timeseries_text(data) == path.read_text()
    first = path.read_text().splitlines()[1].split(",")
    assert all(len(re.sub(r"[-.]|e.*$", "", f).lstrip("0")) <= 9 for f in first)


def test_manifest_hash_matches_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"case": 2}')
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    from ffrsim import parse_config

    assert man["config"]["sha256"] == parse_config(cfg).sha256
    assert man["version"] == __version__
    for name, entry in man["files"].items():
        assert entry["sha256"] == sha256_file(out / name)


def test_dt_and_duration_flags(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--no-plots", "--dt", "0.0005", "--duration", "10"]) == 0
    data = read_timeseries(tmp_path / "timeseries.csv")
    assert data[-1, 0] == 10.0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["inputs"]["config"]["solver"]["dt"] == 0.0005


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FFRSIM_OUT", str(tmp_path / "envout"))
    assert main(["run", "--case", "1", "--no-plots"]) == 0
    assert (tmp_path / "envout" / "metrics.json").is_file()


@pytest.mark.parametrize("text, code", [
    (None, 10),
    ("{\n  \"case\": \n", 11),
    ('{"grid": {"frequency": 50}}', 12),
    ('{"resources":{"bess":{"time_const_t_b": -1}}}', 13),
])
def test_config_exit_codes(tmp_path, capsys, text, code):
    cfg = tmp_path / "cfg.json"
    if text is not None:
        cfg.write_text(text)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == code
    err = capsys.readouterr().err
    assert str(cfg) in err
    if code == 13:
        assert "time_const_t_b" in err


def test_custom_flag_without_weights_is_config_error(tmp_path):
    assert main(["run", "--strategy", "custom", "--out", str(tmp_path)]) == 13


def test_simulation_abort_exit_code(tmp_path, capsys):
    cfg = tmp_path / "lone.json"
    cfg.write_text(json.dumps({
        "grid": {"target_m_mw_s_per_hz": None,
                 "generators": [{"id": "G1", "rated_power_mva": 1000, "inertia_h_s": 4}]},
    }))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 20
    assert "collapse" in capsys.readouterr().err


def test_io_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--out", str(blocker / "sub"), "--no-plots"]) == 30


def test_no_plots_warns(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--no-plots"]) == 0
    assert "plots skipped" in capsys.readouterr().err
    assert not (tmp_path / "run.svg").exists()


# -- batch ---------------------------------------------------------------------------------

def test_batch_layout(batch_dir):
    cells = sorted(p.name for p in batch_dir.iterdir() if p.is_dir())
    assert len(cells) == 16
    assert cells == sorted(f"{k}_case{c}" for k in STRATEGIES for c in (1, 2, 3, 4))
    for cell in cells:
        assert (batch_dir / cell / "timeseries.csv").is_file()
        assert set(json.loads((batch_dir / cell / "metrics.json").read_text())) == METRIC_KEYS
    assert sorted(p.name for p in batch_dir.glob("*.svg")) == ["fig5.svg", "fig6.svg", "fig7.svg", "fig8.svg"]


def test_summary_rows(batch_dir):
    rows = read_summary(batch_dir / "summary.csv")
    assert len(rows) == 16
    assert [(r["strategy"], int(r["case"])) for r in rows] == [(k, c) for k in STRATEGIES for c in (1, 2, 3, 4)]
    case1 = [{k: v for k, v in r.items() if k != "strategy"} for r in rows if r["case"] == "1"]
    assert all(r == case1[0] for r in case1)
    assert float(case1[0]["ffr_energy_mwh"]) == 0.0


def test_summary_independent_of_jobs(batch_dir, tmp_path):
    assert main(["batch", "--out", str(tmp_path), "--jobs", "4", "--no-plots"]) == 0
    assert (tmp_path / "summary.csv").read_bytes() == (batch_dir / "summary.csv").read_bytes()


def test_summary_adaptive_has_max_case_four_nadir(batch_dir):
    rows = [r for r in read_summary(batch_dir / "summary.csv") if r["case"] == "4"]
    best = max(rows, key=lambda r: float(r["nadir_hz"]))
    assert best["strategy"] == "adaptive", {r["strategy"]: r["nadir_hz"] for r in rows}


def test_batch_cell_matches_single_run(batch_dir, tmp_path):
    assert main(["run", "--case", "3", "--strategy", "dc", "--out", str(tmp_path), "--no-plots"]) == 0
    a = (tmp_path / "timeseries.csv").read_bytes()
    assert a == (batch_dir / "dc_dominant_case3" / "timeseries.csv").read_bytes()


# -- plots ---------------------------------------------------------------------------------

def _polylines(svg):
    return [np.array([[float(v) for v in p.split(",")] for p in pts.split()])
            for pts in re.findall(r'<polyline[^>]*points="([^"]+)"', svg)]


def test_flat_run_plots_horizontal_line(doc):
    from dataclasses import replace

    from ffrsim import run_scenario
    from ffrsim.plots import run_figure

    sc = doc.scenario(4)
    flat = run_scenario(replace(sc, disturbance=replace(sc.disturbance, power_loss_mw=0.0)))
    svg = run_figure(flat)
    freq = _polylines(svg)[0]
    assert np.all(freq[:, 1] == freq[0, 1])
    assert '<text x="' in svg and ">60<" in svg


def test_stacked_weights_reach_one(case_runs):
    from ffrsim.plots import run_figure

    svg = run_figure(case_runs[4], stacked=True)
    polys = re.findall(r'<polygon[^>]*points="([^"]+)"', svg)
    assert len(polys) == 3
    top = np.array([[float(v) for v in p.split(",")] for p in polys[2].split()])
    # top edge of the last band sits at alpha = 1 for every sample
    panel_ys = {float(y) for y in top[: len(top) // 2, 1]}
    assert len(panel_ys) == 1


def test_batch_svgs_are_well_formed(batch_dir):
    import xml.etree.ElementTree as ET

    for name in ("fig5.svg", "fig6.svg", "fig7.svg", "fig8.svg"):
        root = ET.parse(batch_dir / name).getroot()
        assert root.tag.endswith("svg")
