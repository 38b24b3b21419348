"""tomokit: design, score, and simulate quantum state tomography protocols.

Builds measurement matrices for standard two-qubit protocols (and custom
ones from files), ranks them a priori by condition number, simulates
Poisson data acquisition, reconstructs density matrices (pseudo-inverse
plus maximum likelihood), and predicts fidelity-loss distributions with
quantile bounds.
"""

from .errors import NumericalError, TomokitError, ValidationError
from .fidstats import (CampaignEngine, LossDistribution, LossSpectrum, ZHistogram,
                       density_over_z, empirical_loss, information_matrix,
                       loss_spectrum, mean_loss, quantiles, sample_loss)
from .protocol import (BUILTIN_PROTOCOLS, MeasurementMatrix, MeasurementRow,
                       Protocol, assemble, build_b144, build_j16, build_r16,
                       expected_total, load_protocol, normalize_exposures,
                       predicted_rates, resolve_protocol, save_protocol,
                       tetrahedron_states, vec, unvec, waveplate)
from .qstate import (DensityMatrix, StateVector, bell_phi_minus,
                     density_from_vector, family_state, fidelity, load_state,
                     loss_scale, maximally_mixed, random_density_matrix,
                     random_state_vector, save_state)
from .reconstruct import (MLEOptions, ReconstructionResult, log_likelihood,
                          mle_refine, project_to_physical,
                          pseudo_inverse_estimate, reconstruct)
from .sampler import (CountsVector, counts_to_csv, load_counts, sample_counts,
                      save_counts)
from .spectral import SpectralReport, analyze, condition_number, svd_decompose

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_PROTOCOLS", "CampaignEngine", "CountsVector", "DensityMatrix",
    "LossDistribution", "LossSpectrum", "MLEOptions", "MeasurementMatrix",
    "MeasurementRow", "NumericalError", "Protocol", "ReconstructionResult",
    "SpectralReport", "StateVector", "TomokitError", "ValidationError",
    "ZHistogram", "analyze", "assemble", "bell_phi_minus", "build_b144",
    "build_j16", "build_r16", "condition_number", "counts_to_csv",
    "density_from_vector", "density_over_z", "empirical_loss",
    "expected_total", "family_state", "fidelity", "information_matrix",
    "load_counts", "load_protocol", "load_state", "log_likelihood",
    "loss_scale", "loss_spectrum", "maximally_mixed", "mean_loss",
    "mle_refine", "normalize_exposures", "predicted_rates",
    "project_to_physical", "pseudo_inverse_estimate", "quantiles",
    "random_density_matrix", "random_state_vector", "reconstruct",
    "resolve_protocol", "sample_counts", "sample_loss", "save_counts",
    "save_protocol", "save_state", "svd_decompose", "tetrahedron_states",
    "unvec", "vec", "waveplate",
]
