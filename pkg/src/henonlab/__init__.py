"""Classical and semiclassical Henon-Heiles dynamics with chaos diagnostics."""

from .diagnostics import (
    CrossingDetector,
    LyapunovSeries,
    NeighborPair,
    SectionPoint,
    detect_crossings,
    equal_energy_neighbor,
    hull_area,
    lyapunov_series,
)
from .dynamics import (
    ClassicalState,
    ClassicalSystem,
    JKMoments,
    SemiclassicalState,
    SemiclassicalSystem,
    classical_energy,
    classical_vector_field,
    effective_energy,
    jk_moments,
    potential_value,
    semiclassical_vector_field,
)
from .experiments import (
    RunSummary,
    ScenarioConfig,
    ScenarioResult,
    find_preset,
    hbar_sweep,
    potential_grid,
    preset_families,
    preset_scenarios,
    run_scenario,
    simulate,
)
from .integrator import (
    EnergyMonitor,
    IntegrationPlan,
    StepRecord,
    energy_drift,
    hermite_interpolate,
    integrate,
    propagate,
    rk4_step,
)

__version__ = "0.1.0"
