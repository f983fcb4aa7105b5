"""Experiment orchestration: node-fault runs, critical-node scans,
proportional gain curves, and (G_P, G_I) sweep maps.

A run follows one timeline: relax on [0, t_on] with controllers active,
remove the faulted node at t_on, reconnect it at t_off, observe to t_end.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    IntegralForm,
    MetricsScope,
    NumericalInstability,
    SimConfig,
    Simulation,
)
from .grid_model import LineStatus, NodeKind, PowerGrid
from .layer_topology import ControlLayer
from .metrics import count_failures, freq_std, order_parameter, power_loss


@dataclass(frozen=True)
class PerturbationSchedule:
    node: int
    t_on: float = 200.0
    t_off: float = 1200.0
    cyber_cofail: bool = False

    def check(self, t_end: float) -> None:
        if not (0 <= self.t_on < self.t_off <= t_end):
            raise ValueError(
                f"schedule must satisfy 0 <= t_on < t_off <= t_end "
                f"(got t_on={self.t_on}, t_off={self.t_off}, t_end={t_end})"
            )


@dataclass
class RunOutcome:
    n_c_during: int
    n_c_after: int
    n_active_final: int
    mean_delta_omega_during: float
    mean_delta_omega_after: float
    final_r: float
    stable: bool
    feasible: bool = True
    events: list = field(default_factory=list)


@dataclass
class SweepSpec:
    gp_values: list[float]
    gi_values: list[float]
    grid: PowerGrid
    prop_layer: ControlLayer
    int_layer: ControlLayer
    schedule: PerturbationSchedule
    config: SimConfig

    def check(self) -> None:
        for name, vals in (("gp_values", self.gp_values), ("gi_values", self.gi_values)):
            if len(vals) == 0:
                raise ValueError(f"{name} must be non-empty")
            if any(v < 0 for v in vals):
                raise ValueError(f"{name} must be >= 0")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing")


@dataclass
class SweepResult:
    gp_values: list[float]
    gi_values: list[float]
    outcomes: list[list[RunOutcome]]  # indexed [ip][ig]


def zero_layer(n: int) -> ControlLayer:
    return ControlLayer(np.zeros((n, n), dtype=np.int8), np.ones(n, dtype=np.int8), 0.0)


def pinning_mask(grid: PowerGrid, mode: str) -> np.ndarray:
    """Actuation presets: 'all' pins every node, 'generators' only N_g."""
    if mode == "all":
        return np.ones(grid.n_nodes, dtype=np.int8)
    if mode == "generators":
        mask = np.zeros(grid.n_nodes, dtype=np.int8)
        for i in grid.generator_ids:
            mask[i] = 1
        return mask
    raise ValueError(f"unknown pinning mode {mode!r}")


def line_status_timeline(grid: PowerGrid, events, sample_times: np.ndarray) -> np.ndarray:
    """Replay the event log into an (S, E) line-status matrix at the
    given sample times. Events at time t apply to samples with t_s >= t."""
    a = grid.arrays()
    e = grid.n_lines
    status = np.full(e, LineStatus.ACTIVE.value, dtype=np.int8)
    removed_nodes: set[int] = set()
    out = np.empty((sample_times.size, e), dtype=np.int8)
    ev = sorted(events, key=lambda x: x.time)
    k = 0
    eps = 1e-9

    def applies(evt, t):
        # trips happen before the same-time sample is recorded; node
        # removal/reconnection happens just after it
        if evt.kind == "line_tripped":
            return evt.time <= t + eps
        return evt.time < t - eps

    for s, t in enumerate(sample_times):
        while k < len(ev) and applies(ev[k], t):
            evt = ev[k]
            if evt.kind == "line_tripped":
                status[evt.subject] = LineStatus.TRIPPED_OVERLOAD.value
            elif evt.kind == "node_removed":
                removed_nodes.add(evt.subject)
                incident = (a["line_i"] == evt.subject) | (a["line_j"] == evt.subject)
                sel = incident & (status == LineStatus.ACTIVE.value)
                status[sel] = LineStatus.REMOVED_BY_NODE_FAULT.value
            elif evt.kind == "node_reconnected":
                removed_nodes.discard(evt.subject)
                incident = (a["line_i"] == evt.subject) | (a["line_j"] == evt.subject)
                sel = incident & (status == LineStatus.REMOVED_BY_NODE_FAULT.value)
                for idx in np.nonzero(sel)[0]:
                    other = a["line_j"][idx] if a["line_i"][idx] == evt.subject else a["line_i"][idx]
                    if other not in removed_nodes:
                        status[idx] = LineStatus.ACTIVE.value
            k += 1
        out[s] = status
    return out


def _consensus_block(adj: np.ndarray, x_block: np.ndarray) -> np.ndarray:
    """Row-wise consensus sums a_ij (x_j - x_i) for a block of samples."""
    degree = adj.sum(axis=1)
    return x_block @ adj.T - x_block * degree


def build_series(grid: PowerGrid, sim: Simulation,
                 schedule: PerturbationSchedule | None) -> dict[str, np.ndarray]:
    """Metrics time series from a finished run's recorded samples."""
    cfg = sim.config
    samples = sim.samples()
    t = samples["t"]
    s_count = t.size
    theta, omega, u_int = samples["theta"], samples["omega"], samples["u_integral"]
    statuses = line_status_timeline(grid, sim.state.events, t)

    # effective control inputs per sample, honoring any cyber co-failure
    # masks active inside the perturbation window
    def adj_from_runtime(rt, masked: bool) -> tuple[np.ndarray, np.ndarray]:
        adj = rt.layer.adjacency.astype(np.float64).copy()
        xi = rt.base_xi.copy()
        if masked and schedule is not None:
            adj[schedule.node, :] = 0.0
            adj[:, schedule.node] = 0.0
            xi[schedule.node] = 0.0
        return adj, xi

    cyber = schedule is not None and schedule.cyber_cofail
    # the node is removed just after the t_on sample and reconnected just
    # after the t_off sample, so "removed" samples are t in (t_on, t_off]
    in_window = (np.zeros(s_count, dtype=bool) if schedule is None else
                 (t > schedule.t_on + 1e-9) & (t <= schedule.t_off + 1e-9))
    u_p = np.zeros_like(omega)
    u_i = np.zeros_like(omega)
    for rows, masked in ((~in_window, False), (in_window, cyber)):
        if not rows.any():
            continue
        p_adj, p_xi = adj_from_runtime(sim.prop, masked)
        u_p[rows] = sim.prop.gain * p_xi * _consensus_block(p_adj, omega[rows])
        if cfg.integral_form is IntegralForm.PHASE_DIFFERENCE:
            i_adj, i_xi = adj_from_runtime(sim.intg, masked)
            u_i[rows] = sim.intg.gain * i_xi * _consensus_block(i_adj, theta[rows])
        else:
            u_i[rows] = u_int[rows]

    # a removed node delivers no control while it is out
    if schedule is not None:
        u_p[in_window, schedule.node] = 0.0
        u_i[in_window, schedule.node] = 0.0

    r = np.empty(s_count)
    phi = np.empty(s_count)
    dw = np.empty(s_count)
    mean_w = np.empty(s_count)
    ploss = np.empty(s_count)
    n_failed = np.empty(s_count, dtype=np.int64)
    n_active = np.empty(s_count, dtype=np.int64)
    all_nodes = np.ones(grid.n_nodes, dtype=bool)
    for s in range(s_count):
        scope = all_nodes
        if (cfg.metrics_scope is MetricsScope.ACTIVE_NODES_ONLY
                and schedule is not None and in_window[s]):
            scope = all_nodes.copy()
            scope[schedule.node] = False
        r[s], phi[s] = order_parameter(theta[s], scope)
        dw[s] = freq_std(omega[s], scope)
        mean_w[s] = float(np.mean(omega[s][scope]))
        ploss[s] = power_loss(grid, u_p[s] + u_i[s])
        n_failed[s], n_active[s], _ = count_failures(statuses[s])
    return {"t": t, "r": r, "phi": phi, "delta_omega": dw, "mean_omega": mean_w,
            "power_loss": ploss, "n_failed": n_failed, "n_active_links": n_active}


def _window_mean(t: np.ndarray, values: np.ndarray, t_lo: float, t_hi: float) -> float:
    sel = (t >= t_lo - 1e-9) & (t <= t_hi + 1e-9)
    if not sel.any():
        return float("nan")
    return float(np.mean(values[sel]))


def run_scenario(grid: PowerGrid, prop_layer: ControlLayer, int_layer: ControlLayer,
                 schedule: PerturbationSchedule, config: SimConfig,
                 record: bool = True) -> tuple[RunOutcome, dict[str, np.ndarray]]:
    """Relax, remove the faulted node at t_on, reconnect at t_off, observe
    to t_end. Returns the outcome summary and the metrics time series
    (empty when record=False)."""
    schedule.check(config.t_end)
    sim = Simulation(grid, prop_layer, int_layer, config, record=record)
    stable = True
    feasible = True
    try:
        sim.run_until(schedule.t_on)
        trips_at_on = sim._n_trips
        dw_relax = freq_std(sim.state.omega)
        if trips_at_on > 0 or dw_relax >= config.relax_tol:
            feasible = False
        sim.remove_node(schedule.node, cyber_cofail=schedule.cyber_cofail)
        sim.run_until(schedule.t_off)
        n_c_during = sim._n_trips
        sim.reconnect_node(schedule.node)
        sim.run_until(config.t_end)
    except NumericalInstability:
        stable = False
        n_c_during = sum(1 for tt, _ in sim.trip_log()
                         if schedule.t_on - 1e-9 <= tt <= schedule.t_off + 1e-9)
    n_c_after, n_active_final, _ = count_failures(sim.state.line_status)
    series: dict[str, np.ndarray] = {}
    mean_dw_during = mean_dw_after = final_r = float("nan")
    if record:
        series = build_series(grid, sim, schedule)
        mean_dw_during = _window_mean(series["t"], series["delta_omega"],
                                      schedule.t_on, schedule.t_off)
        mean_dw_after = _window_mean(series["t"], series["delta_omega"],
                                     schedule.t_off, config.t_end)
        if series["t"].size:
            final_r = float(series["r"][-1])
    outcome = RunOutcome(
        n_c_during=n_c_during,
        n_c_after=n_c_after,
        n_active_final=n_active_final,
        mean_delta_omega_during=mean_dw_during,
        mean_delta_omega_after=mean_dw_after,
        final_r=final_r,
        stable=stable,
        feasible=feasible,
        events=list(sim.state.events),
    )
    return outcome, series


@dataclass
class ScanResult:
    n_c_by_node: dict[int, int]
    critical: set[int]


def critical_scan(grid: PowerGrid, config: SimConfig,
                  t_on: float = 200.0, t_off: float = 1200.0) -> ScanResult:
    """Uncontrolled removal scan: run the node-fault schedule for every
    node and record the overload-trip count; critical nodes have n_c != 0.

    The relaxation phase is shared across nodes since it does not depend
    on which node will be faulted.
    """
    n = grid.n_nodes
    zl = zero_layer(n)
    base = Simulation(grid, zl, zl, config, record=False)
    base.run_until(t_on)
    if base._n_trips > 0:
        raise RuntimeError("grid tripped during relaxation; scan infeasible")
    if freq_std(base.state.omega) >= config.relax_tol:
        raise RuntimeError("grid failed to relax to synchrony; scan infeasible")
    relaxed = base.state
    n_c_by_node: dict[int, int] = {}
    for node in range(n):
        sim = Simulation(grid, zl, zl, config, state=relaxed.copy(), record=False)
        try:
            sim.remove_node(node)
            sim.run_until(t_off)
            sim.reconnect_node(node)
            sim.run_until(config.t_end)
        except NumericalInstability:
            pass
        n_c_by_node[node] = count_failures(sim.state.line_status)[0]
    critical = {node for node, c in n_c_by_node.items() if c != 0}
    return ScanResult(n_c_by_node=n_c_by_node, critical=critical)


def gp_curve(grid: PowerGrid, prop_layer: ControlLayer, node: int,
             gp_values: list[float], config: SimConfig,
             schedule: PerturbationSchedule | None = None) -> list[tuple[float, int]]:
    """Total overload trips per proportional gain for one faulted node
    (integral control off)."""
    if schedule is None:
        schedule = PerturbationSchedule(node=node)
    else:
        schedule = replace(schedule, node=node)
    zl = zero_layer(grid.n_nodes)
    curve = []
    for gp in gp_values:
        outcome, _ = run_scenario(grid, prop_layer.with_gain(gp), zl,
                                  schedule, config, record=False)
        curve.append((gp, outcome.n_c_after))
    return curve


def _sweep_cell(spec: SweepSpec, ip: int, ig: int) -> RunOutcome:
    gp = spec.gp_values[ip]
    gi = spec.gi_values[ig]
    try:
        outcome, _ = run_scenario(
            spec.grid, spec.prop_layer.with_gain(gp), spec.int_layer.with_gain(gi),
            spec.schedule, spec.config, record=True,
        )
    except Exception:
        outcome = RunOutcome(0, 0, 0, float("nan"), float("nan"), float("nan"),
                             stable=False, feasible=False)
    return outcome


def sweep_gains(spec: SweepSpec, parallelism: int = 1) -> SweepResult:
    """One scenario run per (G_P, G_I) pair; results are keyed by gain
    indices and identical for any worker count."""
    spec.check()
    cells = [(ip, ig) for ip in range(len(spec.gp_values))
             for ig in range(len(spec.gi_values))]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_sweep_cell, [spec] * len(cells),
                                    [c[0] for c in cells], [c[1] for c in cells]))
    else:
        results = [_sweep_cell(spec, ip, ig) for ip, ig in cells]
    outcomes = [[None] * len(spec.gi_values) for _ in spec.gp_values]
    for (ip, ig), outcome in zip(cells, results):
        outcomes[ip][ig] = outcome
    return SweepResult(list(spec.gp_values), list(spec.gi_values), outcomes)
