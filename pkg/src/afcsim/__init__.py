"""afcsim: desk-scale simulator and analysis toolkit for atomic-frequency-comb
optical quantum memories in inhomogeneously broadened absorbers.

Subpackages cover spectral tailoring (hole burning, comb synthesis,
Kramers-Kronig dispersion), echo propagation and multimode storage,
coherence and lifetime spectroscopy fits, photon-counting figures of merit,
experiment sequence compilation, and a scenario-driven CLI.
"""

from .spectral import (
    FrequencyGrid,
    SpectralProfile,
    ComplexResponse,
    beer_lambert_transmission,
    extract_od,
    kramers_kronig_phase,
)
from .comb import CombSpec, synthesize, storage_time, analytic_efficiency, comb_metrics
from .holes import (
    PumpModel,
    PersistenceModel,
    PopulationState,
    fresh_state,
    burn,
    decay,
    population_to_od,
    serrodyne_spectrum,
)
from .propagation import (
    TemporalWaveform,
    ModeTrain,
    gaussian_pulse,
    propagate,
    echo_efficiency,
    store_train,
    mode_capacity,
    hole_scan_match,
)
from .coherence import (
    EchoDecayModel,
    echo_intensity,
    synthesize_heterodyne,
    extract_echo_amplitude,
)
from .counting import (
    DetectorModel,
    CountHistogram,
    SourceModel,
    simulate_counts,
    snr,
    timebin_fidelity,
    classical_bound,
    g2_out,
    g2_cw_model,
    g2_pulsed_area_ratio,
    emg_model,
)
from .fitting import FitModel, FitResult, fit, initial_guess
from .sequencer import Phase, Timeline, compile_sequence, validate_timeline, acquisition_summary

__version__ = "0.1.0"
