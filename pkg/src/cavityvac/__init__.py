"""Vacuum energy densities near a quantum-fluctuating mirror, Casimir-Polder
probe energies, and resonance interactions of entangled atom pairs."""

__version__ = "0.1.0"

from .core import (CODATA, CavityConfig, ModeSpectrum, PhysicalConstants, ScaledCavity,
                   build_spectrum, mode_frequency, nondimensionalize)
from .errors import (CavityVacError, ConfigurationError, ConvergenceError, DomainError,
                     FitError, NonFiniteResultError)
from .mirror import (DensityProfile, DressedCoeffTable, coupling_C, dressed_coeff_D, dressed_table,
                     propagator_correction, propagator_static, scalar_density_correction,
                     static_scalar_density)
from .emfield import (EmDensityBreakdown, PolarizableProbe, b_density, casimir_polder_energy,
                      e_density, em_energy_density, smear_static_density)
from .resonance import (AtomPair, InteractionCurve, PhotonicCrystal, QuadratureSpec,
                        crystal_inside_gap_energy, crystal_outside_gap_energy, dos,
                        fit_far_zone_exponent, vacuum_resonance_energy)
