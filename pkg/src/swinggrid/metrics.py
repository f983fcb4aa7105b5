"""Observables: order parameter, frequency spread, power loss, line counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import LineStatus, NodeKind, PowerGrid


@dataclass(frozen=True)
class MetricsSample:
    t: float
    r: float
    mean_phase: float
    delta_omega: float
    mean_omega: float
    power_loss: float
    n_failed: int
    n_active_links: int


def order_parameter(theta: np.ndarray, scope: np.ndarray | None = None) -> tuple[float, float]:
    """(R, Phi): modulus and argument of the mean unit phasor over scope."""
    theta = np.asarray(theta, dtype=np.float64)
    if scope is not None:
        theta = theta[scope]
    if theta.size == 0:
        raise ValueError("order_parameter needs a non-empty scope")
    z = np.mean(np.exp(1j * theta))
    return float(np.abs(z)), float(np.angle(z))


def freq_std(omega: np.ndarray, scope: np.ndarray | None = None) -> float:
    """Population standard deviation of the frequencies over scope."""
    omega = np.asarray(omega, dtype=np.float64)
    if scope is not None:
        omega = omega[scope]
    if omega.size == 0:
        raise ValueError("freq_std needs a non-empty scope")
    return float(np.sqrt(np.mean((omega - np.mean(omega)) ** 2)))


def power_loss(grid: PowerGrid, u_total: np.ndarray) -> float:
    """Mean control contribution over load nodes, computed as the
    difference of the perturbed and unperturbed load-power averages."""
    loads = np.array([n.kind is NodeKind.LOAD for n in grid.nodes])
    n_l = int(loads.sum())
    if n_l == 0:
        raise ValueError("power_loss requires at least one load node")
    p = grid.arrays()["power"]
    u_total = np.asarray(u_total, dtype=np.float64)
    perturbed = np.sum(p[loads] + u_total[loads]) / n_l
    baseline = np.sum(p[loads]) / n_l
    return float(perturbed - baseline)


def count_failures(line_status: np.ndarray) -> tuple[int, int, int]:
    """(n_tripped_by_overload, n_active, n_removed_by_node_fault)."""
    status = np.asarray(line_status)
    n_c = int(np.sum(status == LineStatus.TRIPPED_OVERLOAD.value))
    n_active = int(np.sum(status == LineStatus.ACTIVE.value))
    n_removed = int(np.sum(status == LineStatus.REMOVED_BY_NODE_FAULT.value))
    return n_c, n_active, n_removed
