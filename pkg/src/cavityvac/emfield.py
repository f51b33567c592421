"""One-dimensional electromagnetic field in the mobile-mirror cavity.

The cavity axis is x, the electric field points along z and the magnetic
field along y. Field-squared expectation values follow from the scalar
correlation function: ``<E^2> = c**-2 d_t d_t' G`` and ``<B^2> = d_x d_x' G``
at coincident points. In the one-dimensional normalization used throughout,
both carry units of energy per length (J/m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CavityConfig
from .errors import ConfigurationError, DomainError
from .mirror import _check_position, _uniform_remainder_exponential, dressed_table

GAUSS_HERMITE_NODES = 64


@dataclass(frozen=True)
class PolarizableProbe:
    """Non-dispersive polarizable body at ``x0``.

    With the one-dimensional field normalization ``alpha * <E^2>`` is an
    energy, so the polarizabilities carry units of length.
    """

    alpha_E: float
    alpha_M: float
    x0: float

    def __post_init__(self):
        for name in ("alpha_E", "alpha_M"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value!r}", key=name)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "x0", float(self.x0))


@dataclass(frozen=True)
class EmDensityBreakdown:
    x: float
    e2_static: float
    e2_correction: float
    b2_static: float
    b2_correction: float

    @property
    def total_energy_density(self) -> float:
        return (self.e2_static + self.e2_correction + self.b2_static + self.b2_correction) / 2.0

    @property
    def correction_total(self) -> float:
        """Mirror-motion part of the energy density, ``(<E^2>_1 + <B^2>_1)/2``."""
        return (self.e2_correction + self.b2_correction) / 2.0

    @property
    def static_total(self) -> float:
        return (self.e2_static + self.b2_static) / 2.0


# -- fixed-wall parts ------------------------------------------------------------

def _static_squares(x, L, omega_cut, hbar, c):
    """Regulated ``(<E^2>_0, <B^2>_0)`` for walls at 0 and ``L``.

    With ``S(theta) = sum_n n exp(n(-eps + i theta)) = 1/(4 sinh^2((-eps + i theta)/2))``
    and ``eps = w1/omega_cut``, ``E^2 = w [S(0) - 1/eps^2 - Re S(2 pi x/L)]`` and
    ``B^2 = w [S(0) - 1/eps^2 + Re S(2 pi x/L)]`` with ``w = hbar w1/(2 L)``.
    """
    w1 = c * math.pi / L
    eps = w1 / omega_cut
    uniform = _uniform_remainder_exponential(eps)
    z = 0.5 * complex(-eps, 2.0 * math.pi * x / L)
    osc = (1.0 / (4.0 * np.sinh(z) ** 2)).real
    weight = hbar * w1 / (2.0 * L)
    return weight * (uniform - osc), weight * (uniform + osc)


def e2_static(x: float, config: CavityConfig) -> float:
    x = float(x)
    _check_position(x, config, open_interval=True)
    return _static_squares(x, config.L0, config.omega_cut, config.constants.hbar, config.constants.c)[0]


def b2_static(x: float, config: CavityConfig) -> float:
    x = float(x)
    _check_position(x, config, open_interval=True)
    return _static_squares(x, config.L0, config.omega_cut, config.constants.hbar, config.constants.c)[1]


# -- mirror-motion parts ---------------------------------------------------------

def _sinpi(a):
    # sin(pi a) with exact zeros at integers (a >= 0)
    r = np.fmod(a, 2.0)
    return np.where(r == np.floor(r), 0.0, np.sin(math.pi * r))


def _cospi(a):
    r = np.fmod(a, 2.0)
    return np.where(r == 0.5, 0.0, np.where(r == 1.5, 0.0, np.cos(math.pi * r)))


def _projected_amplitudes(x, config, trig):
    # u[l] = sum_j D[j, l] sqrt(j) trig(pi j x / L0)
    D = dressed_table(config).D
    idx = np.arange(1, D.shape[0] + 1, dtype=float)
    v = np.sqrt(idx) * trig(idx * (x / config.L0))
    return (D * v[:, None]).sum(axis=0)


def e2_correction(x: float, config: CavityConfig) -> float:
    """Mirror-motion change of ``<E_z^2>`` (J/m); vanishes on both walls."""
    x = float(x)
    _check_position(x, config, open_interval=False)
    u = _projected_amplitudes(x, config, _sinpi)
    return 8.0 * config.constants.hbar * config.fundamental / config.L0 * float((u * u).sum())


def b2_correction(x: float, config: CavityConfig) -> float:
    """Mirror-motion change of ``<B_y^2>`` (J/m); finite on the walls."""
    x = float(x)
    _check_position(x, config, open_interval=False)
    u = _projected_amplitudes(x, config, _cospi)
    return 8.0 * config.constants.hbar * config.fundamental / config.L0 * float((u * u).sum())


def e_density(x: float, config: CavityConfig) -> tuple[float, float]:
    """``(<E_z^2>_0, <E_z^2>_1)``: fixed-wall part and mirror-motion part."""
    return e2_static(x, config), e2_correction(x, config)


def b_density(x: float, config: CavityConfig) -> tuple[float, float]:
    """``(<B_y^2>_0, <B_y^2>_1)``."""
    return b2_static(x, config), b2_correction(x, config)


def em_energy_density(x: float, config: CavityConfig) -> EmDensityBreakdown:
    es, ec = e_density(x, config)
    bs, bc = b_density(x, config)
    return EmDensityBreakdown(float(x), es, ec, bs, bc)


def casimir_polder_energy(probe: PolarizableProbe, config: CavityConfig,
                          include_motion: bool = True) -> float:
    """Interaction energy ``-alpha_E <E^2>/2 - alpha_M <B^2>/2`` of the probe (J).

    With ``include_motion=False`` only the fixed-wall field fluctuations enter.
    """
    x0 = probe.x0
    if not 0.0 < x0 < config.L0:
        raise DomainError(f"probe position x0={x0!r} must lie strictly inside the cavity")
    e2 = e2_static(x0, config)
    b2 = b2_static(x0, config)
    if include_motion:
        e2 += e2_correction(x0, config)
        b2 += b2_correction(x0, config)
    return -0.5 * probe.alpha_E * e2 - 0.5 * probe.alpha_M * b2


def smear_static_density(x: float, config: CavityConfig, component: str = "total",
                         nodes: int = GAUSS_HERMITE_NODES) -> float:
    """Fixed-wall density averaged over the quantum position spread of the mobile wall.

    The mobile wall is displaced to ``L0 + delta`` with ``delta`` Gaussian of
    variance ``hbar/(2 M omega_osc)``; the density at ``x`` is recomputed for
    each displaced geometry and the average taken by Gauss-Hermite
    quadrature. Displacements that leave ``x`` outside the cavity contribute
    nothing (the field is confined between the walls).

    ``component`` selects ``"total"`` (``(E^2 + B^2)/2``), ``"electric"`` or
    ``"magnetic"``.
    """
    x = float(x)
    if not 0.0 < x:
        raise DomainError(f"x={x!r} must be > 0 (the fixed wall does not move)")
    if component not in ("total", "electric", "magnetic"):
        raise ValueError(f"unknown component {component!r}")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    sigma = math.sqrt(config.position_variance)
    hbar, c = config.constants.hbar, config.constants.c
    values = []
    for ti, wi in zip(t, w):
        L = config.L0 + math.sqrt(2.0) * sigma * ti
        if not x < L:
            values.append(0.0)
            continue
        e2, b2 = _static_squares(x, L, config.omega_cut, hbar, c)
        f = {"total": 0.5 * (e2 + b2), "electric": e2, "magnetic": b2}[component]
        values.append(wi * f)
    return math.fsum(values) / math.sqrt(math.pi)
