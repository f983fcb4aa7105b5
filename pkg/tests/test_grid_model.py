import numpy as np

from swinggrid import (
    GridLine,
    GridNode,
    NodeKind,
    PowerGrid,
    power_imbalance,
    validate,
)

from conftest import make_t2, make_t3


def test_t2_is_valid():
    assert validate(make_t2()) == []


def test_load_with_positive_power_flagged():
    grid = PowerGrid(
        nodes=[
            GridNode(0, NodeKind.GENERATOR, 1.0, 10.0, 1.0),
            GridNode(1, NodeKind.LOAD, 1.0, 10.0, 1.0),
        ],
        lines=[GridLine(0, 1, 11.0, 0.8)],
    )
    violations = validate(grid)
    assert len(violations) == 1
    assert "node 1" in violations[0]


def test_duplicate_line_flagged():
    grid = PowerGrid(
        nodes=[
            GridNode(0, NodeKind.GENERATOR, 1.0, 10.0, 1.0),
            GridNode(1, NodeKind.LOAD, -1.0, 10.0, 1.0),
        ],
        lines=[GridLine(0, 1, 11.0, 0.8), GridLine(1, 0, 11.0, 0.8)],
    )
    violations = validate(grid)
    assert any("duplicate" in v for v in violations)


def test_bad_endpoint_and_parameters_flagged():
    grid = PowerGrid(
        nodes=[
            GridNode(0, NodeKind.GENERATOR, 1.0, -1.0, 0.0),
            GridNode(1, NodeKind.LOAD, -1.0, 10.0, 1.0),
        ],
        lines=[GridLine(0, 5, 11.0, 1.5)],
    )
    violations = validate(grid)
    assert any("inertia" in v for v in violations)
    assert any("damping" in v for v in violations)
    assert any("out of range" in v for v in violations)


def test_validate_is_idempotent():
    grid = make_t2()
    assert validate(grid) == validate(grid)


def test_power_imbalance_t2_and_t3():
    assert power_imbalance(make_t2()) == 0.0
    assert power_imbalance(make_t3()) == 0.0


def test_power_imbalance_literal_italian_parameters():
    # 34 generators at 2.735 against 93 unit loads leaves -0.01
    nodes = [GridNode(i, NodeKind.GENERATOR, 2.735, 10.0, 1.0) for i in range(34)]
    nodes += [GridNode(34 + i, NodeKind.LOAD, -1.0, 10.0, 1.0) for i in range(93)]
    grid = PowerGrid(nodes=nodes, lines=[])
    assert power_imbalance(grid) == 34 * 2.735 - 93
    assert abs(power_imbalance(grid) + 0.01) < 1e-12


def test_power_imbalance_matches_sum_on_random_grids():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 30))
        powers = rng.normal(size=n)
        powers[powers == 0] = 1.0
        nodes = [
            GridNode(i, NodeKind.GENERATOR if p > 0 else NodeKind.LOAD,
                     float(p), 1.0, 1.0)
            for i, p in enumerate(powers)
        ]
        grid = PowerGrid(nodes=nodes, lines=[])
        expected = float(np.sum([n.power for n in nodes]))
        assert abs(power_imbalance(grid) - expected) < 1e-12


def test_power_imbalance_exclusion_flag():
    grid = make_t3()
    assert power_imbalance(grid, exclude_nodes={0}) == -2.0


def test_capacity_is_exactly_alpha_times_coupling():
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = float(rng.uniform(0.1, 50.0))
        alpha = float(rng.uniform(0.0, 1.0))
        line = GridLine(0, 1, k, alpha)
        assert line.capacity == alpha * k
