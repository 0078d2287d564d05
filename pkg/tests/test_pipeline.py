import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ipminer.cli import main
from ipminer.config import PRESETS, ConfigError, load_config, parse_config_text, resolve
from ipminer.events import EventTemplate, read_events
from ipminer.export import DENSITY_HEADER, GridSpec, density_grid, export_density_grid
from ipminer.pipeline import PipelineError, run
from ipminer.scenarios import ScenarioSpec, generate_scenario
from ipminer.trajectory import load_trajectories


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


LANE = """\
preset = ngsim
scenario = lane-overtaking
n_agents = 4
t_supp = 0.1
t_e_supp = 0.1
"""


def test_ngsim_preset_values():
    p = PRESETS["ngsim"]
    assert (p["r_agent"], p["d_search"], p["eps_dir"]) == (1.83, 25.0, 5.0)
    assert (p["t_supp"], p["t_min"], p["t_e_supp"], p["min_jc"], p["t_win"]) == (0.8, 20, 0.9, 0.6, 150)
    assert (p["eps_move"], p["eps_align"], p["eps_parallel"], p["eps_dist"], p["eps_lat"]) == \
        (0.1, 2.0, 4.0, 0.1, 3.25)


def test_campus_preset_values():
    p = PRESETS["campus"]
    assert (p["r_agent"], p["d_search"], p["eps_dir"], p["eps_dist"], p["eps_lat"]) == \
        (0.6, 10.0, 13.0, 0.01, 1.2)
    assert (p["t_supp"], p["t_min"], p["t_e_supp"], p["min_jc"], p["t_win"]) == (0.8, 25, 0.9, 0.6, 300)


def test_preset_then_override(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "preset = campus\nt_min = 10  # shorter\ninput = data.csv\n"),
                      env={})
    assert cfg.thresholds.t_min == 10
    assert cfg.params.r_agent == 0.6 and cfg.evipm.t_win == 300
    assert cfg.input == tmp_path / "data.csv"


def test_env_override_wins(tmp_path):
    path = write_cfg(tmp_path, "preset = ngsim\ninput = x.csv\nt_supp = 0.5\n")
    cfg = load_config(path, env={"IPMINER_T_SUPP": "0.25", "IPMINER_WORKERS": "3", "OTHER": "1"})
    assert cfg.thresholds.t_supp == 0.25 and cfg.workers == 3


@pytest.mark.parametrize("text,needle", [
    ("input = x.csv\nbogus = 1\n", "unknown config keys"),
    ("preset = mars\ninput = x.csv\n", "unknown preset"),
    ("t_supp = 0.5\n", "either 'input'"),
    ("input = x.csv\nstages = sipm\n", "prefix"),
    ("input = x.csv\nt_supp = 2\n", "t_supp"),
    ("input = x.csv\nt_min = many\n", "cannot parse"),
    ("input = x.csv\nliteral_opposite_flanking = maybe\n", "boolean"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        resolve(parse_config_text(text))


def test_ngsim_format_from_config(tmp_path):
    data = tmp_path / "us101.txt"
    rows = [f"{v} {f} {v * 12.0} {f * 8.0} 80.0" for v in (1, 2) for f in range(1000, 1040)]
    data.write_text("Vehicle_ID Frame_ID Local_X Local_Y v_Vel\n" + "\n".join(rows) + "\n")
    cfg = load_config(write_cfg(tmp_path, f"preset = ngsim\nformat = ngsim\ndelimiter = whitespace\n"
                                          f"input = {data}\nstages = events\n"), env={})
    res = run(cfg, write=False)
    assert sorted(res.dataset.agents) == [1, 2]
    assert res.dataset.agents[1].lifespan == (0, 39)
    assert res.dataset.agents[2].x[0] == pytest.approx(24 * 0.3048)
    assert res.graph.int_edge_count == 39


def test_digest_ignores_workers_and_output(tmp_path):
    a = load_config(write_cfg(tmp_path, LANE), env={})
    b = load_config(write_cfg(tmp_path, LANE + "workers = 4\noutput = elsewhere\n", "b.cfg"), env={})
    c = load_config(write_cfg(tmp_path, LANE + "t_min = 30\n", "c.cfg"), env={})
    assert a.digest() == b.digest() != c.digest()


def test_scenario_reproducible():
    spec = ScenarioSpec("crossing-pedestrians", n_agents=12, duration=200, noise=0.01, seed=5)
    a, b = generate_scenario(spec), generate_scenario(spec)
    assert sorted(a.agents) == sorted(b.agents)
    for aid in a.agents:
        assert np.array_equal(a.agents[aid].x, b.agents[aid].x)
        assert np.array_equal(a.agents[aid].y, b.agents[aid].y)
    other = generate_scenario(ScenarioSpec("crossing-pedestrians", n_agents=12, duration=200,
                                           noise=0.01, seed=6))
    assert any(not np.array_equal(a.agents[k].x, other.agents[k].x) for k in a.agents)


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("lane-overtaking", n_agents=3)
    with pytest.raises(ValueError):
        ScenarioSpec("parade")


def test_group_cruise_gives_size_three_pattern(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "preset = ngsim\nscenario = group-cruise\nn_agents = 3\n"
                                          f"output = {tmp_path / 'out'}\n"), env={})
    res = run(cfg, write=False)
    sizes = {p.size: p for p in res.static.patterns}
    assert 3 in sizes
    assert set(sizes[3].serialization.split(";")) <= {
        f"{s}>{d}:MAINTAINING_DISTANCE" for s in range(3) for d in range(3) if s != d} | {
        f"{s}>{d}:FOLLOWING" for s in range(3) for d in range(3) if s != d}
    assert "MAINTAINING_DISTANCE" in sizes[3].serialization


def test_density_average_rule():
    buf = io.StringIO()
    n = export_density_grid([[(0.0, 0.0), (2.0, 2.0)]], GridSpec(cell=1.0), buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert n == 1 and tuple(rows[0]) == DENSITY_HEADER
    assert rows[1][:2] == ["1", "1"] and rows[1][4] == "1"


def test_density_empty_is_header_only():
    buf = io.StringIO()
    assert export_density_grid([], GridSpec(), buf) == 0
    assert buf.getvalue() == ",".join(DENSITY_HEADER) + "\n"


def test_density_resolution_conserves_points():
    rng = np.random.default_rng(0)
    pts = [tuple(p) for p in rng.uniform(-50, 50, (500, 2))]
    fine = density_grid(pts, GridSpec(cell=1.0))
    coarse = density_grid(pts, GridSpec(cell=10.0))
    assert sum(r[4] for r in fine) == sum(r[4] for r in coarse) == 500
    assert len(coarse) <= len(fine)
    assert all(-5 <= r[0] < 5 for r in coarse)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))[1:]


def test_full_run_artifacts_match_manifest(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, LANE + f"output = {out}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    counts = manifest["counts"]
    assert counts["events"] == len(rows(out / "events.csv")) > 0
    assert counts["event_histogram"] == len(rows(out / "event_histogram.csv")) == len(EventTemplate)
    static = json.loads((out / "static_patterns.json").read_text())
    evolving = json.loads((out / "evolving_patterns.json").read_text())
    assert counts["static_patterns"] == static["pattern_count"] == len(static["patterns"]) > 0
    assert counts["evolving_patterns"] == evolving["pattern_count"] == len(evolving["patterns"]) > 0
    assert counts["pattern_graphs"] == len(list((out / "patterns").glob("*.dot")))
    assert counts["density_grids"] == len(list((out / "density").glob("*.csv")))
    assert manifest["config_hash"] == load_config(cfg, env={}).digest()
    for p in evolving["patterns"]:
        for inst in p["instances"]:
            assert all(el["static_pattern"] is not None for el in inst["elements"])
    total = sum(int(r[4]) for r in rows(out / "density" / "evolving_0000.csv"))
    assert total == evolving["patterns"][0]["instance_count"]


def test_events_stage_only(tmp_path):
    out = tmp_path / "ev"
    cfg = write_cfg(tmp_path, LANE + f"output = {out}\n")
    assert main(["events", "--config", str(cfg)]) == 0
    assert (out / "events.csv").exists() and (out / "event_histogram.csv").exists()
    assert not (out / "static_patterns.json").exists()
    assert not (out / "evolving_patterns.json").exists()
    assert read_events(out / "events.csv")


def test_repeat_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        cfg = write_cfg(tmp_path, LANE + f"output = {tmp_path / name}\n", f"{name}.cfg")
        assert main(["run", "--config", str(cfg)]) == 0
    for rel in ("events.csv", "static_patterns.json", "evolving_patterns.json", "event_histogram.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_generate_then_mine_from_file(tmp_path):
    gen = write_cfg(tmp_path, LANE + f"output = {tmp_path / 'gen'}\n", "gen.cfg")
    assert main(["generate", "--config", str(gen)]) == 0
    traj = tmp_path / "gen" / "trajectories.csv"
    ds = load_trajectories(traj)
    assert len(ds) == 4
    direct = run(load_config(gen, env={}), write=False)
    from_file = write_cfg(tmp_path, f"preset = ngsim\ninput = {traj}\nt_supp = 0.1\nt_e_supp = 0.1\n"
                                    f"output = {tmp_path / 'mined'}\n", "file.cfg")
    mined = run(load_config(from_file, env={}), write=False)
    assert [e.sort_key() for e in mined.events] == [e.sort_key() for e in direct.events]


def test_cli_overrides(tmp_path):
    out = tmp_path / "capped"
    cfg = write_cfg(tmp_path, "preset = ngsim\nscenario = group-cruise\nn_agents = 4\n")
    assert main(["sipm", "--config", str(cfg), "--max-agents", "2", "--out", str(out)]) == 0
    static = json.loads((out / "static_patterns.json").read_text())
    assert static["patterns"] and all(p["size"] == 2 for p in static["patterns"])
    assert not (out / "evolving_patterns.json").exists()


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert "config error" in capsys.readouterr().err
    bad = write_cfg(tmp_path, "input = nothing.csv\n", "bad.cfg")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "error in stage 'load'" in capsys.readouterr().err
    no_scenario = write_cfg(tmp_path, "input = nothing.csv\n", "ns.cfg")
    assert main(["generate", "--config", str(no_scenario)]) == 2
    assert main(["run", "--config", str(bad), "--max-agents", "1"]) == 2


def test_pipeline_error_names_stage(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("agent_id,t,x,y\n1,0,0,0\n1,0,1,1\n")
    cfg = resolve({"input": str(bad)})
    with pytest.raises(PipelineError) as info:
        run(cfg, write=False)
    assert info.value.stage == "load"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ipminer", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "export-density" in proc.stdout
