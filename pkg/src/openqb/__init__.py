"""Open quantum battery simulator.

Evolves battery-charger systems under Lindblad dynamics and its
photodetection/homodyne unravelings, and computes work-extraction figures of
merit (ergotropy, daemonic ergotropy, daemonic efficiency).
"""

from ._kernels import backend_name
from .hilbert import (
    DensityOp,
    DimensionMismatchError,
    HilbertError,
    LinearOp,
    PureState,
    SpaceLayout,
    embed,
    expectation,
    kron_compose,
    partial_trace,
    purity,
    trace_distance,
)
from .lindblad import (
    IntegratorOptions,
    UnconditionalSeries,
    default_dt,
    evolve_closed,
    evolve_unconditional,
    lindblad_rhs,
)
from .models import (
    DickeConfig,
    ModelInstance,
    SpinSpinConfig,
    build_dicke,
    build_spin_spin,
    charging_schedule,
    default_fock_cutoff,
)
from .thermo import (
    BatterySpectrum,
    DaemonicMetrics,
    WorkMetrics,
    battery_energy,
    charging_power,
    daemonic_efficiency,
    daemonic_ergotropy,
    enhancement_ratio,
    ergotropy,
)
from .trajectories import (
    EnsembleSummary,
    TrajectoryRecord,
    UnravelingKind,
    run_ensemble,
    run_hd_trajectory,
    run_pd_trajectory,
)

__version__ = "0.1.0"
