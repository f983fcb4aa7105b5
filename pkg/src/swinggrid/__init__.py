"""Swing-equation power grids with capacity-based line tripping under
distributed proportional and integral control layers."""

from .controllers import ControlInputs, integral_state_derivative, proportional_input
from .dynamics import (
    Event,
    IntegralForm,
    MetricsScope,
    NumericalInstability,
    RelaxResult,
    SimConfig,
    SimState,
    Simulation,
    apply_node_reconnection,
    apply_node_removal,
    check_overloads,
    compute_flows,
    derivatives,
    initial_state,
    relax_to_sync,
    rk4_step,
)
from .grid_model import (
    GridLine,
    GridNode,
    LineStatus,
    NodeKind,
    PowerGrid,
    power_imbalance,
    validate,
)
from .layer_topology import (
    ControlLayer,
    component_count,
    derive_extended,
    derive_local,
    gen_er,
    validate_layer,
)
from .metrics import (
    MetricsSample,
    count_failures,
    freq_std,
    order_parameter,
    power_loss,
)
from .presets import PRESETS, ParameterPreset, build_grid
from .scenario import (
    PerturbationSchedule,
    RunOutcome,
    ScanResult,
    SweepResult,
    SweepSpec,
    build_series,
    critical_scan,
    gp_curve,
    line_status_timeline,
    pinning_mask,
    run_scenario,
    sweep_gains,
    zero_layer,
)

__version__ = "0.1.0"
