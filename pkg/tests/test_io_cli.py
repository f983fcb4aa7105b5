import json

import numpy as np
import pytest

from swinggrid import ControlLayer, Event, gen_er
from swinggrid.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from swinggrid.io_files import (
    FormatError,
    RunManifest,
    SWEEP_COLUMNS,
    TIMESERIES_COLUMNS,
    load_grid,
    load_layer,
    save_grid,
    save_layer,
    write_events,
    write_timeseries,
)

from conftest import DESK_FAULT_NODE, DESK_SCHEDULE, DESK_T_END, make_desk_grid, make_t2


@pytest.fixture
def desk_grid_file(tmp_path):
    path = tmp_path / "desk.grid"
    save_grid(path, make_desk_grid())
    return path


class TestGridRoundTrip:
    def test_lossless(self, tmp_path):
        grid = make_desk_grid()
        path = tmp_path / "g.grid"
        save_grid(path, grid)
        back = load_grid(path)
        assert back.nodes == grid.nodes
        # line endpoints are written normalized lower-to-higher
        assert ([(l.endpoints, l.coupling, l.capacity_fraction) for l in back.lines]
                == [(l.endpoints, l.coupling, l.capacity_fraction) for l in grid.lines])

    def test_seventeen_digit_floats_survive(self, tmp_path):
        grid = make_t2(coupling=11.000000000000002, alpha=0.8000000000000001)
        path = tmp_path / "g.grid"
        save_grid(path, grid)
        back = load_grid(path)
        assert back.lines[0].coupling == 11.000000000000002
        assert back.lines[0].capacity_fraction == 0.8000000000000001

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "g.grid"
        path.write_text(
            "format grid 1\n\n# a comment\n"
            "node 1 generator 1 10 1  # trailing comment\n"
            "node 2 load -1 10 1\n"
            "edge 1 2 11 0.8\n")
        grid = load_grid(path)
        assert grid.n_nodes == 2 and grid.n_lines == 1

    def test_one_based_ids_in_file(self, tmp_path):
        path = tmp_path / "g.grid"
        save_grid(path, make_t2())
        text = path.read_text()
        assert "node 1 generator" in text
        assert "edge 1 2" in text

    def test_wrong_major_rejected(self, tmp_path):
        path = tmp_path / "g.grid"
        path.write_text("format grid 2\n")
        with pytest.raises(FormatError):
            load_grid(path)

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "g.grid"
        path.write_text("format layer 1\n")
        with pytest.raises(FormatError):
            load_grid(path)

    def test_parse_error_reports_line_number(self, tmp_path):
        path = tmp_path / "g.grid"
        path.write_text("format grid 1\nnode 1 generator 1 10 1\nbogus line here\n")
        with pytest.raises(FormatError, match=r":3:"):
            load_grid(path)

    def test_invalid_grid_rejected_on_load(self, tmp_path):
        path = tmp_path / "g.grid"
        path.write_text(
            "format grid 1\n"
            "node 1 generator -1 10 1\n"  # generator with negative power
            "node 2 load -1 10 1\n"
            "edge 1 2 11 0.8\n")
        with pytest.raises(FormatError, match="invalid grid"):
            load_grid(path)


class TestLayerRoundTrip:
    def test_lossless_topology_and_pinning(self, tmp_path):
        layer = ControlLayer(gen_er(9, 0.4, seed=6),
                             np.array([1, 0, 1, 1, 0, 1, 0, 0, 1], dtype=np.int8),
                             3.5)
        path = tmp_path / "l.layer"
        save_layer(path, layer)
        back = load_layer(path)
        assert np.array_equal(back.adjacency, layer.adjacency)
        assert np.array_equal(back.pinning, layer.pinning)
        assert back.gain == 0.0  # the gain is a run-time parameter

    def test_missing_xi_coverage_rejected(self, tmp_path):
        path = tmp_path / "l.layer"
        path.write_text("format layer 1\nxi 1 1\nxi 3 1\n")
        with pytest.raises(FormatError):
            load_layer(path)

    def test_out_of_range_edge_rejected(self, tmp_path):
        path = tmp_path / "l.layer"
        path.write_text("format layer 1\nxi 1 1\nxi 2 1\nedge 1 5\n")
        with pytest.raises(FormatError):
            load_layer(path)

    def test_bad_xi_value_rejected(self, tmp_path):
        path = tmp_path / "l.layer"
        path.write_text("format layer 1\nxi 1 2\n")
        with pytest.raises(FormatError, match=r":2:"):
            load_layer(path)


class TestManifest:
    def test_hash_stable_under_key_order(self):
        m1 = RunManifest("simulate", config={"a": 1, "b": 2})
        m2 = RunManifest("simulate", config={"b": 2, "a": 1})
        assert m1.config_hash == m2.config_hash

    def test_hash_changes_with_config(self):
        m1 = RunManifest("simulate", config={"a": 1})
        m2 = RunManifest("simulate", config={"a": 2})
        assert m1.config_hash != m2.config_hash

    def test_embedded_in_outputs(self, tmp_path):
        manifest = RunManifest("simulate", preset="controlled-default",
                               seeds={"seed": 7})
        series = {col: np.zeros(2) for col in TIMESERIES_COLUMNS}
        path = tmp_path / "ts.csv"
        write_timeseries(path, series, manifest)
        first = path.read_text().splitlines()[0]
        assert first.startswith("# manifest ")
        payload = json.loads(first.removeprefix("# manifest "))
        assert payload["seeds"] == {"seed": 7}
        assert payload["config_hash"] == manifest.config_hash


class TestEventLog:
    def test_one_based_subjects(self, tmp_path):
        events = [Event(1.0, "node_removed", 0), Event(2.0, "line_tripped", 4),
                  Event(3.0, "unstable", -1)]
        path = tmp_path / "ev.json"
        write_events(path, events)
        payload = json.loads(path.read_text())
        subjects = [e["subject"] for e in payload["events"]]
        assert subjects == [1, 5, -1]


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


class TestCli:
    def test_validate_ok(self, desk_grid_file, capsys):
        assert run_cli("validate", desk_grid_file) == EXIT_OK
        assert "N=6" in capsys.readouterr().out

    def test_validate_bad_grid(self, tmp_path):
        path = tmp_path / "bad.grid"
        path.write_text("format grid 1\nnode 1 load 1 10 1\n")
        assert run_cli("validate", path) == EXIT_VALIDATION

    def test_missing_file_is_usage_error(self, tmp_path):
        assert run_cli("validate", tmp_path / "nope.grid") == EXIT_USAGE

    def test_unknown_command_is_usage_error(self):
        assert run_cli("frobnicate") == EXIT_USAGE

    def test_gen_er_reproducible(self, tmp_path):
        out1, out2 = tmp_path / "a.layer", tmp_path / "b.layer"
        assert run_cli("gen-er", "-n", 20, "-p", 0.3, "--seed", 5, "-o", out1) == EXIT_OK
        assert run_cli("gen-er", "-n", 20, "-p", 0.3, "--seed", 5, "-o", out2) == EXIT_OK
        l1, l2 = load_layer(out1), load_layer(out2)
        assert np.array_equal(l1.adjacency, l2.adjacency)
        assert np.array_equal(l1.adjacency, gen_er(20, 0.3, seed=5))

    def test_derive_topology_local(self, desk_grid_file, tmp_path):
        out = tmp_path / "loc.layer"
        assert run_cli("derive-topology", "local", "--grid", desk_grid_file,
                       "-o", out) == EXIT_OK
        layer = load_layer(out)
        # desk grid: only the four generator-adjacent lines survive
        assert layer.adjacency.sum() // 2 == 4
        assert layer.adjacency[2, 3] == 0
        assert layer.adjacency[3, 4] == 0

    def test_derive_topology_extended_adds_generator_clique(
            self, desk_grid_file, tmp_path):
        out = tmp_path / "ext.layer"
        assert run_cli("derive-topology", "extended", "--grid", desk_grid_file,
                       "-o", out) == EXIT_OK
        layer = load_layer(out)
        assert layer.adjacency[0, 5] == 1

    def test_simulate_writes_outputs(self, desk_grid_file, tmp_path, capsys):
        ts = tmp_path / "ts.csv"
        code = run_cli(
            "simulate", "--grid", desk_grid_file, "--node", DESK_FAULT_NODE + 1,
            "--gp", 20.0, "--t-on", DESK_SCHEDULE["t_on"],
            "--t-off", DESK_SCHEDULE["t_off"], "--t-end", DESK_T_END,
            "--relax-tol", 1e-4, "--timeseries", ts)
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "n_c_after=0" in out
        lines = ts.read_text().splitlines()
        assert lines[0].startswith("# manifest ")
        assert lines[1] == ",".join(TIMESERIES_COLUMNS)
        assert len(lines) == 2 + int(DESK_T_END / 0.1) + 1  # stride 10, dt 0.01

    def test_simulate_uncontrolled_reports_trips(self, desk_grid_file, capsys):
        code = run_cli(
            "simulate", "--grid", desk_grid_file, "--node", DESK_FAULT_NODE + 1,
            "--t-on", DESK_SCHEDULE["t_on"], "--t-off", DESK_SCHEDULE["t_off"],
            "--t-end", DESK_T_END, "--relax-tol", 1e-4)
        assert code == EXIT_OK
        assert "n_c_after=1" in capsys.readouterr().out

    def test_simulate_bad_schedule_is_usage_error(self, desk_grid_file):
        assert run_cli("simulate", "--grid", desk_grid_file, "--node", 1,
                       "--t-on", 100.0, "--t-off", 50.0) == EXIT_USAGE

    def test_simulate_events_file(self, desk_grid_file, tmp_path):
        ev = tmp_path / "ev.json"
        run_cli("simulate", "--grid", desk_grid_file, "--node", DESK_FAULT_NODE + 1,
                "--t-on", DESK_SCHEDULE["t_on"], "--t-off", DESK_SCHEDULE["t_off"],
                "--t-end", DESK_T_END, "--relax-tol", 1e-4, "--events", ev)
        payload = json.loads(ev.read_text())
        kinds = [e["kind"] for e in payload["events"]]
        assert "node_removed" in kinds and "node_reconnected" in kinds
        assert "line_tripped" in kinds

    def test_gp_curve_output(self, desk_grid_file, tmp_path):
        out = tmp_path / "curve.csv"
        code = run_cli(
            "gp-curve", "--grid", desk_grid_file, "--node", DESK_FAULT_NODE + 1,
            "--gp", "0,20", "--t-on", DESK_SCHEDULE["t_on"],
            "--t-off", DESK_SCHEDULE["t_off"], "--t-end", DESK_T_END,
            "--relax-tol", 1e-4, "-o", out)
        assert code == EXIT_OK
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert rows[0] == "gp,n_c"
        assert rows[1].split(",")[1] != "0"
        assert rows[2].split(",")[1] == "0"

    def test_sweep_output(self, desk_grid_file, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep", "--grid", desk_grid_file, "--node", DESK_FAULT_NODE + 1,
            "--gp", "0,20", "--gi", "0,20", "--t-on", DESK_SCHEDULE["t_on"],
            "--t-off", DESK_SCHEDULE["t_off"], "--t-end", DESK_T_END,
            "--relax-tol", 1e-4, "--record-stride", 100, "-o", out)
        assert code == EXIT_OK
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert rows[0] == ",".join(SWEEP_COLUMNS)
        assert len(rows) == 1 + 4

    def test_sweep_bad_gain_list_is_usage_error(self, desk_grid_file, tmp_path):
        assert run_cli("sweep", "--grid", desk_grid_file, "--node", 1,
                       "--gp", "5,1", "--gi", "0",
                       "-o", tmp_path / "s.csv") == EXIT_USAGE

    def test_critical_scan_output(self, desk_grid_file, tmp_path, capsys):
        out = tmp_path / "scan.csv"
        code = run_cli(
            "critical-scan", "--grid", desk_grid_file, "--preset", "none",
            "--t-on", DESK_SCHEDULE["t_on"], "--t-off", DESK_SCHEDULE["t_off"],
            "--t-end", DESK_T_END, "--relax-tol", 1e-4, "-o", out)
        assert code == EXIT_OK
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert rows[0] == "node,n_c,critical"
        assert len(rows) == 1 + 6
        by_node = {int(r.split(",")[0]): r.split(",") for r in rows[1:]}
        assert by_node[DESK_FAULT_NODE + 1][2] == "1"
