"""Two-oscillator Josephson thermal machine as a low-temperature thermometer.

Subpackages:

* ``units``     constants, conversions, machine/bath/noise types, config files
* ``fock``      full nonlinear model on a truncated two-mode Fock space
* ``gaussian``  analytic bilinear model (covariance matrix, current statistics)
* ``metrology`` symplectic diagonalization, Fisher information, precision bounds
* ``protocol``  noisy zero-current search, error budget, Monte Carlo validation
* ``cli``       command-line interface writing CSV tables and figures
"""

from .errors import BracketError, ConfigError, NumericalError
from .units import (
    BathState,
    MachineParams,
    MeasurementNoise,
    RunConfig,
    carnot_hot_temperature,
    default_config,
    default_config_path,
    load_config,
    resonance_voltage,
    thermal_occupation,
)
from .fock import (
    FockCutoff,
    Liouvillian,
    SteadyObservables,
    build_current_operator,
    build_dressing_operator,
    build_hamiltonian,
    build_liouvillian,
    choose_cutoff,
    laguerre_assoc,
    observables,
    steady_observables,
    steady_state,
)
from .gaussian import (
    BudgetBreakdown,
    GaussianParams,
    alpha,
    beta,
    current_variance,
    dcurrent_dtc,
    delta_tc_budget,
    mean_current,
    steady_covariance,
)
from .metrology import (
    QfiResult,
    SymplecticDecomposition,
    cramer_rao,
    error_propagation,
    qfi_carnot_closed,
    qfi_gaussian,
    qfi_gaussian_at,
    qfi_sld_oracle,
    williamson,
)
from .protocol import (
    EnsembleSummary,
    PrecisionRow,
    ProtocolConfig,
    ProtocolResult,
    current_at,
    error_budget,
    locate_carnot,
    precision_curve,
    run_protocol_ensemble,
)

__version__ = "0.1.0"
