"""Distributed control inputs.

Proportional input: u_i = G * xi_i * sum_j a_ij (w_j - w_i), evaluated
instantaneously from the frequencies. The integral controller has the same
consensus form but defines the time derivative of its state, which is
integrated alongside the grid dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layer_topology import ControlLayer


@dataclass(frozen=True)
class ControlInputs:
    u_p: np.ndarray
    u_i: np.ndarray

    @property
    def u_total(self) -> np.ndarray:
        return self.u_p + self.u_i


def _consensus(layer: ControlLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.n,):
        raise ValueError(f"vector length {x.shape} does not match layer size {layer.n}")
    a = layer.adjacency.astype(np.float64)
    degree = a.sum(axis=1)
    return layer.gain * layer.pinning * (a @ x - degree * x)


def proportional_input(layer: ControlLayer, omega: np.ndarray) -> np.ndarray:
    """Proportional control input per node for the given frequencies."""
    return _consensus(layer, omega)


def integral_state_derivative(layer: ControlLayer, omega: np.ndarray) -> np.ndarray:
    """Time derivative of the integral-control state per node."""
    return _consensus(layer, omega)
