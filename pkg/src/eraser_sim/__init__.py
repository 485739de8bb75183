"""Simulator and analysis toolkit for two coupled photon-pair interferometers.

Building blocks:

* :mod:`eraser_sim.optics` - element parameters, conventions, unit helpers
* :mod:`eraser_sim.model` - first-order biphoton rates and visibility laws
* :mod:`eraser_sim.oracle` - exact truncated Fock-space cross-check
* :mod:`eraser_sim.fringes` - Poisson count synthesis and sinusoid fitting
* :mod:`eraser_sim.scans` - named measurement scenarios and scan tables
* :mod:`eraser_sim.cli` - ``eraser-sim`` command line surface
"""

__version__ = "0.1.0"

from .errors import (
    ContractViolationError,
    InvalidParameterError,
    TruncationError,
    UndefinedVisibilityError,
)
from .optics import (
    BeamSplitterParams,
    Mode,
    MODE_ORDER,
    PortSign,
    SetupParams,
    SpdcSourceParams,
    default_setup,
    mixing_matrix,
    phase_from_path,
    validate_setup,
)
from .model import (
    FieldOperator,
    RatePair,
    balanced_coincidence_closed_form,
    coincidence_rate,
    detector_fields,
    eraser_visibility,
    rates,
    scan_visibility,
    singles_rate,
)
from .oracle import (
    FockStateVector,
    OracleReport,
    apply_beam_splitter,
    apply_block,
    apply_phase,
    apply_two_mode_squeezer,
    oracle_compare,
    run_exact,
    vacuum,
)
from .fringes import (
    FringeFit,
    FringeSamples,
    fit_sinusoid,
    synthesize_counts,
    visibility_from_extrema,
)
from .scans import (
    NoiseParams,
    ScanAxis,
    ScanSpec,
    ScanTable,
    Scenario,
    ScenarioName,
    resolve_scenario,
    run_scan,
    visibility_curve,
)
