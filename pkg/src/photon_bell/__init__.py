"""Few-photon interferometer simulation with a CHSH statistics layer."""

from .bell import (
    ChshResult,
    CorrelationEstimate,
    MeasurementSetting,
    VisibilityFit,
    analytic_correlation,
    chsh,
    correlation_from_counts,
    dip_visibility,
    fit_fringe,
    lhv_max,
)
from .circuit import Circuit, evolve, hom_test_circuit, paper_interferometer, transfer_matrix
from .detection import (
    CoincidenceRule,
    CountsTable,
    DetectorModel,
    conditional_polarization_ensemble,
    conditional_polarization_state,
    outcome_distribution,
    post_select,
    sample_counts,
)
from .state import (
    FockState,
    ModeLabel,
    TemporalWavepacket,
    apply_beamsplitter,
    apply_hwp,
    apply_pbs,
    apply_phase,
    apply_polarizer,
    fidelity,
    make_source_state,
    set_delay,
    temporal_overlap,
)

__version__ = "0.1.0"
