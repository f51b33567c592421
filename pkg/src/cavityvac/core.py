"""Constants, cavity configuration, mode spectra and unit scaling.

Public quantities are in SI units. Physics routines work internally in a
scaled system where lengths are measured in units of the equilibrium cavity
length ``L0`` and frequencies in units of the fundamental ``c*pi/L0``; the
mode with index ``j`` then has scaled frequency exactly ``j``.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import constants as _codata

from .errors import ConfigurationError, DomainError

THREADS_ENV = "CAVITYVAC_THREADS"

# omega_osc above this fraction of omega_cut triggers a warning
OSC_CUTOFF_RATIO_WARN = 1e-2


@dataclass(frozen=True)
class PhysicalConstants:
    """Speed of light (m/s) and reduced Planck constant (J s)."""

    c: float = _codata.c
    hbar: float = _codata.hbar

    def __post_init__(self):
        for name in ("c", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}", key=name)


CODATA = PhysicalConstants()


class CutoffWarning(UserWarning):
    """The mirror trap frequency is not small compared with the cutoff."""


def _count_modes(L0, omega_cut, constants):
    fundamental = constants.c * math.pi / L0
    n = int(math.floor(omega_cut / fundamental))
    # floor of a rounded ratio can be off by one at exact boundaries
    while (n + 1) * fundamental <= omega_cut:
        n += 1
    while n > 0 and n * fundamental > omega_cut:
        n -= 1
    return n


@dataclass(frozen=True)
class CavityConfig:
    """One-dimensional cavity with a fixed wall at 0 and a mobile wall at ``L0``.

    Parameters
    ----------
    L0 : float
        Equilibrium cavity length (m).
    M : float
        Mass of the mobile mirror (kg).
    omega_osc : float
        Angular frequency of the harmonic trap holding the mirror (1/s).
    omega_cut : float
        Sharp upper cutoff on the field mode frequencies (1/s).
    constants : PhysicalConstants
        Defaults to CODATA values.
    """

    L0: float
    M: float
    omega_osc: float
    omega_cut: float
    constants: PhysicalConstants = field(default=CODATA, compare=True)

    def __post_init__(self):
        for name in ("L0", "M", "omega_osc", "omega_cut"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise ConfigurationError(f"{name} must be a real number", key=name)
            value = float(value)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {value!r}", key=name)
            object.__setattr__(self, name, value)
        if _count_modes(self.L0, self.omega_cut, self.constants) == 0:
            raise ConfigurationError(
                "omega_cut lies below the fundamental c*pi/L0; no field mode survives the cutoff",
                key="omega_cut",
            )
        if self.omega_osc >= OSC_CUTOFF_RATIO_WARN * self.omega_cut:
            warnings.warn(
                f"omega_osc={self.omega_osc:g} is not small compared with omega_cut={self.omega_cut:g}; "
                "the perturbative mirror-field treatment assumes omega_osc << omega_cut",
                CutoffWarning,
                stacklevel=3,
            )

    @property
    def fundamental(self) -> float:
        """Frequency spacing ``c*pi/L0`` of the cavity modes (1/s)."""
        return self.constants.c * math.pi / self.L0

    @property
    def mode_count(self) -> int:
        return _count_modes(self.L0, self.omega_cut, self.constants)

    @property
    def position_variance(self) -> float:
        """Ground-state variance ``hbar/(2 M omega_osc)`` of the mirror position (m^2)."""
        return self.constants.hbar / (2.0 * self.M * self.omega_osc)

    def replace(self, **changes) -> "CavityConfig":
        values = dict(L0=self.L0, M=self.M, omega_osc=self.omega_osc,
                      omega_cut=self.omega_cut, constants=self.constants)
        values.update(changes)
        return CavityConfig(**values)


@dataclass(frozen=True)
class ModeSpectrum:
    """Dirichlet modes of the cavity below the cutoff (1-based indices)."""

    N: int
    frequencies: np.ndarray
    wavenumbers: np.ndarray

    def __post_init__(self):
        for arr in (self.frequencies, self.wavenumbers):
            arr.setflags(write=False)


def mode_frequency(j: int, config: CavityConfig) -> float:
    """Angular frequency ``c*j*pi/L0`` of mode ``j`` (1/s)."""
    if isinstance(j, bool) or int(j) != j:
        raise DomainError(f"mode index must be an integer, got {j!r}")
    if j < 1:
        raise DomainError(f"mode index must be >= 1 (Dirichlet walls have no zero mode), got {j}")
    return int(j) * config.fundamental


def build_spectrum(config: CavityConfig) -> ModeSpectrum:
    """All modes with frequency not above ``config.omega_cut``."""
    n = config.mode_count
    if n == 0:
        raise ConfigurationError("no field mode lies below the cutoff", key="omega_cut")
    j = np.arange(1, n + 1, dtype=float)
    return ModeSpectrum(N=n, frequencies=j * config.fundamental,
                        wavenumbers=j * (math.pi / config.L0))


@dataclass(frozen=True)
class ScaledCavity:
    """Cavity parameters in units of ``L0`` (length), ``c*pi/L0`` (frequency)
    and ``hbar/(L0**2 * c*pi/L0)`` (mass).

    The unit scales are carried along so that :meth:`to_config` restores the
    SI configuration.
    """

    length: float
    M: float
    omega_osc: float
    omega_cut: float
    length_unit: float
    frequency_unit: float
    mass_unit: float
    constants: PhysicalConstants = CODATA

    def to_config(self) -> CavityConfig:
        return CavityConfig(
            L0=self.length * self.length_unit,
            M=self.M * self.mass_unit,
            omega_osc=self.omega_osc * self.frequency_unit,
            omega_cut=self.omega_cut * self.frequency_unit,
            constants=self.constants,
        )

    def length_to_si(self, x):
        return np.asarray(x) * self.length_unit if np.ndim(x) else x * self.length_unit

    def length_from_si(self, x):
        return np.asarray(x) / self.length_unit if np.ndim(x) else x / self.length_unit

    def frequency_to_si(self, w):
        return np.asarray(w) * self.frequency_unit if np.ndim(w) else w * self.frequency_unit

    def frequency_from_si(self, w):
        return np.asarray(w) / self.frequency_unit if np.ndim(w) else w / self.frequency_unit


def nondimensionalize(config: CavityConfig) -> ScaledCavity:
    L0 = config.L0
    w1 = config.fundamental
    m_unit = config.constants.hbar / (L0 * L0 * w1)
    return ScaledCavity(
        length=L0 / L0,
        M=config.M / m_unit,
        omega_osc=config.omega_osc / w1,
        omega_cut=config.omega_cut / w1,
        length_unit=L0,
        frequency_unit=w1,
        mass_unit=m_unit,
        constants=config.constants,
    )


def resolve_threads(threads: int | None = None) -> int:
    """Thread count: explicit argument, else ``$CAVITYVAC_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}", key=THREADS_ENV)
        else:
            threads = 1
    if threads < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {threads}", key="threads")
    return threads


def evaluate_grid(func: Callable[[float], object], points: Sequence[float],
                  threads: int | None = None) -> list:
    """Evaluate ``func`` at every point, in order.

    Each point is evaluated by an independent call, so results do not depend
    on how the points are split between worker threads.
    """
    pts = [float(p) for p in points]
    n = resolve_threads(threads)
    if n == 1 or len(pts) < 2:
        return [func(p) for p in pts]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, pts))
