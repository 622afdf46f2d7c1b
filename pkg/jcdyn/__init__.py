"""jcdyn - QD-cavity Jaynes-Cummings Lindblad dynamics toolkit"""
__version__ = "0.1.0"

from .config import RunConfig, Settings, load_config, load_settings
from .errors import ConfigError, JcdynError, SolverError
from .liouville import Superoperator, evolve, full_liouvillian, no_gain_liouvillian, steady_state
from .operators import DensityMatrix, HilbertSpace, Operator, SystemParams, bare_operators, build_space, jc_hamiltonian
from .spectrum import Spectrum, emission_spectrum, find_peaks, lorentzian_fit, track_peaks
from .subspaces import SubspaceParams, exceptional_point, ngl_eigen, ngl_matrix, oracle_block
from .thermal import DEVICE_MODEL, ThermalModel, phonon_rate, resonance_temperature

__all__ = [
    "RunConfig",
    "Settings",
    "load_config",
    "load_settings",
    "ConfigError",
    "JcdynError",
    "SolverError",
    "Superoperator",
    "evolve",
    "full_liouvillian",
    "no_gain_liouvillian",
    "steady_state",
    "DensityMatrix",
    "HilbertSpace",
    "Operator",
    "SystemParams",
    "bare_operators",
    "build_space",
    "jc_hamiltonian",
    "Spectrum",
    "emission_spectrum",
    "find_peaks",
    "lorentzian_fit",
    "track_peaks",
    "SubspaceParams",
    "exceptional_point",
    "ngl_eigen",
    "ngl_matrix",
    "oracle_block",
    "DEVICE_MODEL",
    "ThermalModel",
    "phonon_rate",
    "resonance_temperature",
]
