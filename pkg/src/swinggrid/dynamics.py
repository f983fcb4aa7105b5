"""Controlled swing-equation integration with overload tripping.

The public operations (compute_flows, check_overloads, derivatives,
rk4_step, apply_node_removal, apply_node_reconnection, relax_to_sync) all
delegate to the compiled kernels in _core, so a single-step call and a
long run follow bit-identical arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _core
from .grid_model import LineStatus, PowerGrid
from .layer_topology import ControlLayer


class IntegralForm(Enum):
    # integral state driven by frequency differences (default)
    FREQUENCY_INTEGRAL = "frequency-integral"
    # memoryless input from phase differences (comparison variant)
    PHASE_DIFFERENCE = "phase-difference"


class MetricsScope(Enum):
    ACTIVE_NODES_ONLY = "active-nodes-only"
    ALL_NODES = "all-nodes"


@dataclass
class SimConfig:
    dt: float = 0.01
    t_end: float = 1400.0
    record_stride: int = 1
    integral_form: IntegralForm = IntegralForm.FREQUENCY_INTEGRAL
    metrics_scope: MetricsScope = MetricsScope.ACTIVE_NODES_ONLY
    relax_time: float = 200.0
    relax_tol: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # line_tripped | node_removed | node_reconnected | unstable
    subject: int


@dataclass
class SimState:
    t: float
    theta: np.ndarray
    omega: np.ndarray
    u_integral: np.ndarray
    line_status: np.ndarray  # int64, LineStatus values
    removed_nodes: set[int] = field(default_factory=set)
    events: list[Event] = field(default_factory=list)

    @property
    def removed_mask(self) -> np.ndarray:
        mask = np.zeros(self.theta.size, dtype=np.bool_)
        for i in self.removed_nodes:
            mask[i] = True
        return mask

    def copy(self) -> "SimState":
        return SimState(
            t=self.t,
            theta=self.theta.copy(),
            omega=self.omega.copy(),
            u_integral=self.u_integral.copy(),
            line_status=self.line_status.copy(),
            removed_nodes=set(self.removed_nodes),
            events=list(self.events),
        )


def initial_state(grid: PowerGrid) -> SimState:
    n, e = grid.n_nodes, grid.n_lines
    return SimState(
        t=0.0,
        theta=np.zeros(n),
        omega=np.zeros(n),
        u_integral=np.zeros(n),
        line_status=np.zeros(e, dtype=np.int64),
    )


class NumericalInstability(RuntimeError):
    """Raised when the integrator produced a non-finite state."""

    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:g}; run aborted")
        self.t = t


class LayerRuntime:
    """A control layer plus its mutable cyber-failure mask."""

    def __init__(self, layer: ControlLayer):
        self.layer = layer
        self.ei, self.ej = layer.edge_arrays()
        self.base_xi = layer.pinning.astype(np.float64)
        self.gain = float(layer.gain)
        self.masked: set[int] = set()
        self._rebuild()

    def _rebuild(self):
        self.edge_on = np.ones(self.ei.size, dtype=np.bool_)
        self.xi = self.base_xi.copy()
        for node in self.masked:
            self.edge_on &= (self.ei != node) & (self.ej != node)
            self.xi[node] = 0.0

    def mask_node(self, node: int):
        self.masked.add(node)
        self._rebuild()

    def unmask_node(self, node: int):
        self.masked.discard(node)
        self._rebuild()


def _as_runtime(layer) -> LayerRuntime:
    return layer if isinstance(layer, LayerRuntime) else LayerRuntime(layer)


def compute_flows(grid: PowerGrid, state: SimState) -> np.ndarray:
    """Signed line flows, oriented from lower to higher node index;
    inactive lines report 0."""
    a = grid.arrays()
    flows = a["line_k"] * np.sin(state.theta[a["line_j"]] - state.theta[a["line_i"]])
    flows[state.line_status != LineStatus.ACTIVE.value] = 0.0
    return flows


def check_overloads(grid: PowerGrid, flows: np.ndarray, state: SimState) -> list[int]:
    """Active lines whose |flow| strictly exceeds capacity."""
    a = grid.arrays()
    active = state.line_status == LineStatus.ACTIVE.value
    return list(np.nonzero(active & (np.abs(flows) > a["line_cap"]))[0])


def _core_args(grid: PowerGrid, prop: LayerRuntime, intg: LayerRuntime,
               state: SimState, integral_form: IntegralForm):
    a = grid.arrays()
    return (
        a["power"], a["inertia"], a["damping"], state.removed_mask,
        a["line_i"], a["line_j"], a["line_k"], state.line_status,
        prop.ei, prop.ej, prop.edge_on, prop.xi, prop.gain,
        intg.ei, intg.ej, intg.edge_on, intg.xi, intg.gain,
        np.int64(1 if integral_form is IntegralForm.PHASE_DIFFERENCE else 0),
    )


def derivatives(grid: PowerGrid, layers, state: SimState,
                integral_form: IntegralForm = IntegralForm.FREQUENCY_INTEGRAL):
    """(dtheta/dt, domega/dt, du_integral/dt) at the current state."""
    prop, intg = (_as_runtime(l) for l in layers)
    for rt in (prop, intg):
        if rt.xi.size != grid.n_nodes:
            raise ValueError("layer size does not match grid")
    n = grid.n_nodes
    dtheta, domega, du = np.empty(n), np.empty(n), np.empty(n)
    args = _core_args(grid, prop, intg, state, integral_form)
    _core.derivs(state.theta, state.omega, state.u_integral, *args,
                 dtheta, domega, du)
    return dtheta, domega, du


def rk4_step(grid: PowerGrid, layers, state: SimState, dt: float,
             integral_form: IntegralForm = IntegralForm.FREQUENCY_INTEGRAL) -> SimState:
    """Advance the state by one RK4 step, then trip any overloaded lines.

    Mutates and returns `state`. Line statuses are frozen within the step.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    prop, intg = (_as_runtime(l) for l in layers)
    args = _core_args(grid, prop, intg, state, integral_form)
    _core.rk4_advance(state.theta, state.omega, state.u_integral, dt, *args)
    state.t += dt
    if not (np.all(np.isfinite(state.theta)) and np.all(np.isfinite(state.omega))
            and np.all(np.isfinite(state.u_integral))):
        state.events.append(Event(state.t, "unstable", -1))
        raise NumericalInstability(state.t)
    flows = compute_flows(grid, state)
    for e in check_overloads(grid, flows, state):
        state.line_status[e] = LineStatus.TRIPPED_OVERLOAD.value
        state.events.append(Event(state.t, "line_tripped", int(e)))
    return state


def apply_node_removal(state: SimState, grid: PowerGrid, node: int, t: float,
                       cyber_cofail: bool = False, layers=None) -> None:
    """Remove a node: freeze its state, drop its active lines, and (with
    cyber_cofail) mask its entries in both control layers."""
    if node in state.removed_nodes:
        raise ValueError(f"node {node} is already removed")
    a = grid.arrays()
    incident = (a["line_i"] == node) | (a["line_j"] == node)
    to_remove = incident & (state.line_status == LineStatus.ACTIVE.value)
    state.line_status[to_remove] = LineStatus.REMOVED_BY_NODE_FAULT.value
    state.removed_nodes.add(node)
    state.events.append(Event(t, "node_removed", node))
    if cyber_cofail:
        if layers is None:
            raise ValueError("cyber_cofail requires the layer runtimes")
        for rt in layers:
            rt.mask_node(node)


def apply_node_reconnection(state: SimState, grid: PowerGrid, node: int, t: float,
                            layers=None) -> None:
    """Reconnect a removed node: restore exactly its fault-removed lines
    (overload trips stay tripped) and lift any cyber masks."""
    if node not in state.removed_nodes:
        raise ValueError(f"node {node} is not removed")
    state.removed_nodes.discard(node)
    a = grid.arrays()
    incident = (a["line_i"] == node) | (a["line_j"] == node)
    removed = incident & (state.line_status == LineStatus.REMOVED_BY_NODE_FAULT.value)
    # a line only comes back if its other endpoint is active too
    for e in np.nonzero(removed)[0]:
        other = a["line_j"][e] if a["line_i"][e] == node else a["line_i"][e]
        if other not in state.removed_nodes:
            state.line_status[e] = LineStatus.ACTIVE.value
    state.events.append(Event(t, "node_reconnected", node))
    if layers is not None:
        for rt in layers:
            rt.unmask_node(node)


class Simulation:
    """Owns one run: grid + layer runtimes + state + recorded samples.

    The recording grid is global: a sample is taken at every step index
    divisible by record_stride, regardless of how the run is partitioned
    into segments by removal/reconnection events.
    """

    def __init__(self, grid: PowerGrid, prop_layer: ControlLayer,
                 int_layer: ControlLayer, config: SimConfig,
                 state: SimState | None = None, record: bool = True):
        self.grid = grid
        self.config = config
        self.prop = _as_runtime(prop_layer)
        self.intg = _as_runtime(int_layer)
        self.state = state if state is not None else initial_state(grid)
        self.record = record
        self._step = int(round(self.state.t / config.dt))
        e = grid.n_lines
        self._trip_step = np.empty(e, dtype=np.int64)
        self._trip_line = np.empty(e, dtype=np.int64)
        self._n_trips = 0
        self.sample_steps: list[np.ndarray] = []
        self.sample_theta: list[np.ndarray] = []
        self.sample_omega: list[np.ndarray] = []
        self.sample_uint: list[np.ndarray] = []
        if record and self._step % config.record_stride == 0:
            self._record_current()

    @property
    def t(self) -> float:
        return self._step * self.config.dt

    def _record_current(self):
        self.sample_steps.append(np.array([self._step], dtype=np.int64))
        self.sample_theta.append(self.state.theta.copy()[None, :])
        self.sample_omega.append(self.state.omega.copy()[None, :])
        self.sample_uint.append(self.state.u_integral.copy()[None, :])

    def run_until(self, t_target: float) -> None:
        """Integrate up to t_target (rounded to the step grid)."""
        cfg = self.config
        target_step = int(round(t_target / cfg.dt))
        n_steps = target_step - self._step
        if n_steps <= 0:
            return
        st = self.state
        stride = cfg.record_stride if self.record else max(n_steps + 1, 1)
        max_rec = n_steps // stride + 1
        rec_step = np.empty(max_rec, dtype=np.int64)
        n = self.grid.n_nodes
        rec_theta = np.empty((max_rec, n))
        rec_omega = np.empty((max_rec, n))
        rec_uint = np.empty((max_rec, n))
        a = self.grid.arrays()
        args = _core_args(self.grid, self.prop, self.intg, st, cfg.integral_form)
        # run_segment additionally needs the capacities, spliced after line_k
        args = args[:7] + (a["line_cap"],) + args[7:]
        n_trips_before = self._n_trips
        self._n_trips, n_rec, bad_step = _core.run_segment(
            st.theta, st.omega, st.u_integral, self._step, n_steps, cfg.dt,
            *args,
            stride, rec_step, rec_theta, rec_omega, rec_uint,
            self._trip_step, self._trip_line, self._n_trips,
        )
        for k in range(n_trips_before, self._n_trips):
            st.events.append(Event(self._trip_step[k] * cfg.dt, "line_tripped",
                                   int(self._trip_line[k])))
        if self.record and n_rec > 0:
            self.sample_steps.append(rec_step[:n_rec].copy())
            self.sample_theta.append(rec_theta[:n_rec].copy())
            self.sample_omega.append(rec_omega[:n_rec].copy())
            self.sample_uint.append(rec_uint[:n_rec].copy())
        if bad_step >= 0:
            self._step = bad_step
            st.t = self.t
            st.events.append(Event(st.t, "unstable", -1))
            raise NumericalInstability(st.t)
        self._step = target_step
        st.t = self.t

    def remove_node(self, node: int, cyber_cofail: bool = False) -> None:
        apply_node_removal(self.state, self.grid, node, self.t,
                           cyber_cofail, layers=(self.prop, self.intg))

    def reconnect_node(self, node: int) -> None:
        apply_node_reconnection(self.state, self.grid, node, self.t,
                                layers=(self.prop, self.intg))

    def samples(self) -> dict[str, np.ndarray]:
        """Stacked recorded samples: step, t, theta, omega, u_integral."""
        if not self.sample_steps:
            n = self.grid.n_nodes
            return {"step": np.empty(0, dtype=np.int64), "t": np.empty(0),
                    "theta": np.empty((0, n)), "omega": np.empty((0, n)),
                    "u_integral": np.empty((0, n))}
        step = np.concatenate(self.sample_steps)
        return {
            "step": step,
            "t": step * self.config.dt,
            "theta": np.vstack(self.sample_theta),
            "omega": np.vstack(self.sample_omega),
            "u_integral": np.vstack(self.sample_uint),
        }

    def trip_log(self) -> list[tuple[float, int]]:
        return [(self._trip_step[k] * self.config.dt, int(self._trip_line[k]))
                for k in range(self._n_trips)]


@dataclass
class RelaxResult:
    state: SimState
    delta_omega: float
    converged: bool
    tripped: bool


def relax_to_sync(grid: PowerGrid, layers, config: SimConfig) -> RelaxResult:
    """Integrate from rest for config.relax_time with controllers active.

    A trip during relaxation means the unperturbed grid is infeasible at
    the given capacities; a final frequency spread above relax_tol means
    the relaxation did not converge. Both are reported, not raised.
    """
    prop, intg = layers
    sim = Simulation(grid, prop, intg, config, record=False)
    try:
        sim.run_until(config.relax_time)
    except NumericalInstability:
        return RelaxResult(sim.state, float("inf"), False, sim._n_trips > 0)
    omega = sim.state.omega
    mask = ~sim.state.removed_mask
    dw = float(np.std(omega[mask]))
    tripped = sim._n_trips > 0
    return RelaxResult(sim.state, dw, dw < config.relax_tol and not tripped, tripped)
