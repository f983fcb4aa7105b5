import numpy as np
import pytest

from swinggrid import (
    ControlLayer,
    GridLine,
    GridNode,
    NodeKind,
    PowerGrid,
    SimConfig,
    Simulation,
    zero_layer,
)


def make_t2(coupling: float = 11.0, alpha: float = 0.8,
            inertia: float = 10.0, damping: float = 1.0) -> PowerGrid:
    """Two-node grid: one generator (+1) feeding one load (-1)."""
    return PowerGrid(
        nodes=[
            GridNode(0, NodeKind.GENERATOR, 1.0, inertia, damping),
            GridNode(1, NodeKind.LOAD, -1.0, inertia, damping),
        ],
        lines=[GridLine(0, 1, coupling, alpha)],
    )


def make_t3() -> PowerGrid:
    """Star: generator (+2) feeding two unit loads, K=11."""
    return PowerGrid(
        nodes=[
            GridNode(0, NodeKind.GENERATOR, 2.0, 10.0, 1.0),
            GridNode(1, NodeKind.LOAD, -1.0, 10.0, 1.0),
            GridNode(2, NodeKind.LOAD, -1.0, 10.0, 1.0),
        ],
        lines=[GridLine(0, 1, 11.0, 0.8), GridLine(0, 2, 11.0, 0.8)],
    )


def make_desk_grid() -> PowerGrid:
    """Cascade-prone 6-node grid: two balanced halves joined by a weak tie.

    Removing generator 5 forces the orphaned loads to draw through the
    tie (line index 4), whose capacity is too small, so it trips when
    uncontrolled.
    """
    nodes = [
        GridNode(0, NodeKind.GENERATOR, 2.0, 1.0, 1.0),
        GridNode(1, NodeKind.LOAD, -1.0, 1.0, 1.0),
        GridNode(2, NodeKind.LOAD, -1.0, 1.0, 1.0),
        GridNode(3, NodeKind.LOAD, -1.0, 1.0, 1.0),
        GridNode(4, NodeKind.LOAD, -1.0, 1.0, 1.0),
        GridNode(5, NodeKind.GENERATOR, 2.0, 1.0, 1.0),
    ]
    lines = [
        GridLine(0, 1, 3.0, 1.0),
        GridLine(0, 2, 3.0, 1.0),
        GridLine(5, 3, 3.0, 1.0),
        GridLine(5, 4, 3.0, 1.0),
        GridLine(2, 3, 3.0, 0.3),  # the weak tie
        GridLine(3, 4, 3.0, 1.0),
    ]
    return PowerGrid(nodes, lines)


DESK_FAULT_NODE = 5
DESK_SCHEDULE = dict(t_on=80.0, t_off=150.0)
DESK_T_END = 200.0


def complete_layer(n: int, gain: float = 0.0) -> ControlLayer:
    return ControlLayer((1 - np.eye(n)).astype(np.int8),
                        np.ones(n, dtype=np.int8), gain)


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the kernels once so timing assertions see warm code."""
    grid = make_t2()
    sim = Simulation(grid, zero_layer(2), zero_layer(2),
                     SimConfig(t_end=1.0), record=False)
    sim.run_until(0.1)
