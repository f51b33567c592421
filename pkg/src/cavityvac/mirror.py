"""Scalar field in a cavity whose right-hand wall is a quantum oscillator.

The mirror-field coupling is treated to lowest order: the dressed ground
state carries amplitudes ``D[k, j]`` for a mechanical excitation plus a pair
of field quanta in modes ``k`` and ``j``. Everything observable here (energy
density shift, field correlation function) is built from that table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import CavityConfig, evaluate_grid
from .errors import DomainError

REGULATORS = ("sharp", "exponential")


@dataclass(frozen=True)
class DressedCoeffTable:
    """Dressed-state amplitudes ``D[k-1, j-1]`` for modes ``1..N``."""

    N: int
    D: np.ndarray
    config: CavityConfig

    def __post_init__(self):
        self.D.setflags(write=False)


@dataclass(frozen=True)
class DensityProfile:
    positions: np.ndarray
    values: np.ndarray
    label: str

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if pos.shape != val.shape or pos.ndim != 1:
            raise ValueError("positions and values must be 1-D arrays of equal length")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)


def _check_indices(k, j, config):
    n = config.mode_count
    for idx in (k, j):
        if isinstance(idx, bool) or int(idx) != idx or not 1 <= idx <= n:
            raise DomainError(f"mode index {idx!r} outside the spectrum 1..{n}")


def _check_position(x, config, *, open_interval):
    if not math.isfinite(x):
        raise DomainError(f"position must be finite, got {x!r}")
    if open_interval:
        if not 0.0 < x < config.L0:
            raise DomainError(
                f"x={x!r} is not strictly inside (0, L0={config.L0!r}); static densities diverge on the walls")
    elif not 0.0 <= x <= config.L0:
        raise DomainError(f"x={x!r} outside [0, L0={config.L0!r}]")


def coupling_C(k: int, j: int, config: CavityConfig) -> float:
    """Effective mirror-field coupling between modes ``k`` and ``j`` (J)."""
    _check_indices(k, j, config)
    hbar = config.constants.hbar
    wk = k * config.fundamental
    wj = j * config.fundamental
    sign = -1.0 if (k + j) % 2 else 1.0
    return sign * (hbar / 2.0) ** 1.5 / (config.L0 * math.sqrt(config.M)) * math.sqrt(wk * wj / config.omega_osc)


def dressed_coeff_D(k: int, j: int, config: CavityConfig) -> float:
    """Amplitude of the one-phonon, two-photon component ``|1_k 1_j, 1>``."""
    _check_indices(k, j, config)
    hbar = config.constants.hbar
    wk = k * config.fundamental
    wj = j * config.fundamental
    sign = -1.0 if (k + j) % 2 else 1.0
    return (sign / config.L0 * math.sqrt(hbar * wk * wj / (8.0 * config.M * config.omega_osc))
            / (config.omega_osc + wk + wj))


@lru_cache(maxsize=32)
def dressed_table(config: CavityConfig) -> DressedCoeffTable:
    """Full ``N x N`` table of dressed-state amplitudes.

    Built in scaled units: with ``w_j = j*w1`` the amplitude reduces to
    ``lam * (-1)**(k+j) * sqrt(k*j) / (nu + k + j)``.
    """
    n = config.mode_count
    idx = np.arange(1, n + 1, dtype=float)
    nu = config.omega_osc / config.fundamental
    lam = math.sqrt(config.constants.hbar / (8.0 * config.M * config.omega_osc)) / config.L0
    sign = np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)
    D = lam * np.outer(sign, sign) * np.sqrt(np.outer(idx, idx)) / (nu + idx[:, None] + idx[None, :])
    return DressedCoeffTable(N=n, D=D, config=config)


@lru_cache(maxsize=8)
def _two_step_table(config: CavityConfig) -> np.ndarray:
    """``(D @ D)[j, r]`` with the summation over the shared mode done elementwise."""
    D = dressed_table(config).D
    out = (D[:, :, None] * D[None, :, :]).sum(axis=1)
    out.setflags(write=False)
    return out


# -- energy density shift, direct triple sum ---------------------------------

def _eq6_prefactor(config):
    hbar = config.constants.hbar
    w1 = config.fundamental
    return hbar * hbar * w1 / (2.0 * config.L0 ** 3 * config.M * config.omega_osc)


def _mode_ratio(config):
    # R[l, j] = l / (nu + l + j); w_l w_j w_r / (..)(..) = w1 * j R[l, j] R[r, j]
    n = config.mode_count
    idx = np.arange(1, n + 1, dtype=float)
    nu = config.omega_osc / config.fundamental
    return idx, idx[:, None] / (nu + idx[:, None] + idx[None, :])


def _difference_cosines(n, xi):
    # C[l, r] = cos(pi * (l - r) * xi)
    m = np.arange(-(n - 1), n)
    cm = np.cos(np.pi * m * xi)
    li = np.arange(n)
    return cm[(li[:, None] - li[None, :]) + (n - 1)]


def _two_sum(a, b):
    # error-free transformation: a + b == s + e exactly
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def scalar_density_correction(x: float, config: CavityConfig) -> float:
    """Change of the renormalized scalar energy density due to mirror motion (J/m).

    The triple mode sum is accumulated in a fixed order: for every ``(j, r)``
    the terms are added over ``l`` with error-free two-sum steps, and the
    running sums and their rounding errors are combined with
    :func:`math.fsum`. The result is deterministic and carries at most a few
    ulps of accumulation error.
    """
    x = float(x)
    _check_position(x, config, open_interval=False)
    n = config.mode_count
    C = _difference_cosines(n, x / config.L0)
    idx, R = _mode_ratio(config)
    sign = np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)
    jw = idx[:, None] * R.T          # [j, l] = j R[l, j]
    RT = R.T * sign[None, :]         # [j, r] = R[r, j] (-1)**r
    acc = np.zeros((n, n))
    err = np.zeros((n, n))
    for l in range(n):
        term = (jw[:, l:l + 1] * sign[l]) * RT * C[l][None, :]
        acc, e = _two_sum(acc, term)
        err += e
    total = math.fsum(np.concatenate((acc.ravel(), err.ravel())))
    return _eq6_prefactor(config) * total


def scalar_density_correction_integral(config: CavityConfig) -> float:
    """Integral of :func:`scalar_density_correction` over ``[0, L0]`` (J).

    Cross terms with ``l != r`` integrate to zero, leaving a positive double sum.
    """
    idx, R = _mode_ratio(config)
    return _eq6_prefactor(config) * config.L0 * math.fsum((idx[None, :] * R * R).ravel())


def scalar_density_profile(positions: Sequence[float], config: CavityConfig,
                           threads: int | None = None) -> DensityProfile:
    values = evaluate_grid(lambda p: scalar_density_correction(p, config), positions, threads)
    return DensityProfile(np.asarray(positions, float), np.asarray(values), "scalar correction")


# -- fixed-wall baseline -------------------------------------------------------

def _uniform_remainder_exponential(eps):
    """``sum_n n exp(-eps n) - 1/eps**2`` = ``1/(4 sinh(eps/2)**2) - 1/eps**2``."""
    u = 0.5 * eps
    if u < 1.0:
        # u**2 - sinh(u)**2 = -sum_{n>=2} 2**(2n-1) u**(2n) / (2n)!
        term = 8.0 * u ** 4 / 24.0
        acc = []
        n = 2
        while abs(term) > 1e-18 * (abs(acc[0]) if acc else abs(term)):
            acc.append(term)
            term *= 4.0 * u * u / ((2 * n + 1) * (2 * n + 2))
            n += 1
        numer = -math.fsum(acc)
        s = math.sinh(u)
        return numer / (4.0 * u * u * s * s)
    return 1.0 / (4.0 * math.sinh(u) ** 2) - 1.0 / (eps * eps)


def _uniform_remainder_sharp(n):
    """Sharp truncation at mode ``n`` with the continuum subtracted.

    The cutoff-dependent Euler-Maclaurin terms at the upper limit,
    ``f(N)/2 + f'(N)/12`` for ``f(n) = n``, are wall self-energies that do
    not depend on the geometry and are removed together with the continuum.
    """
    modes = math.fsum(float(j) for j in range(1, n + 1))
    return modes - (0.5 * n * n + 0.5 * n + 1.0 / 12.0)


def static_scalar_density(x: float, config: CavityConfig, regulator: str = "sharp") -> float:
    """Renormalized energy density between fixed walls (J/m).

    In one dimension the position-dependent boundary terms of the electric
    and magnetic parts cancel in the sum, so the value is uniform and equal to
    ``-pi*hbar*c/(24*L0**2)`` up to regulator corrections.
    """
    x = float(x)
    _check_position(x, config, open_interval=True)
    if regulator == "sharp":
        rem = _uniform_remainder_sharp(config.mode_count)
    elif regulator == "exponential":
        rem = _uniform_remainder_exponential(config.fundamental / config.omega_cut)
    else:
        raise ValueError(f"unknown regulator {regulator!r}; expected one of {REGULATORS}")
    return config.constants.hbar * config.fundamental / (2.0 * config.L0) * rem


# -- correlation function ------------------------------------------------------

def _log_pair(s, a):
    # log(1 - exp(-s + i pi a)) + log(1 - exp(-s - i pi a))
    return np.log(1.0 - np.exp(-s + 1j * math.pi * a)) + np.log(1.0 - np.exp(-s - 1j * math.pi * a))


def propagator_static_parts(x, t, xp, tp, config: CavityConfig):
    """Bounded-cavity and free-space pieces of the fixed-wall correlation function.

    Both carry the exponential regulator ``exp(-w/omega_cut)``. The
    one-dimensional free massless correlator is infrared divergent; the
    free piece is made finite by subtracting the constant
    ``(hbar c / 2 pi) * int dn exp(-n) / n`` (``n = k L0 / pi``), which drops
    out of every derivative. Returns ``(bounded, free)``; the renormalized
    propagator is ``bounded - free``.
    """
    for p in (x, xp):
        _check_position(float(p), config, open_interval=False)
    xi, xip = x / config.L0, xp / config.L0
    s = config.fundamental / config.omega_cut + 1j * config.fundamental * (t - tp)
    pref = config.constants.hbar * config.constants.c / (2.0 * math.pi)
    delta, total = xi - xip, xi + xip
    bounded = 0.5 * pref * (_log_pair(s, total) - _log_pair(s, delta))
    free = -0.5 * pref * (np.log(s + 1j * math.pi * delta) + np.log(s - 1j * math.pi * delta))
    return complex(bounded), complex(free)


def propagator_static(x, t, xp, tp, config: CavityConfig) -> complex:
    """Renormalized fixed-wall correlation ``<phi(x,t) phi(x',t')>`` (J m)."""
    bounded, free = propagator_static_parts(x, t, xp, tp, config)
    return bounded - free


def propagator_correction(x, t, xp, tp, config: CavityConfig) -> float:
    """Change of the correlation function caused by the mirror's zero-point motion (J m)."""
    for p in (x, xp):
        _check_position(float(p), config, open_interval=False)
    n = config.mode_count
    idx = np.arange(1, n + 1, dtype=float)
    w1 = config.fundamental
    a = np.sin(math.pi * idx * (x / config.L0)) / np.sqrt(idx)
    b = np.sin(math.pi * idx * (xp / config.L0)) / np.sqrt(idx)
    ph1, ph2 = idx * (w1 * t), idx * (w1 * tp)
    DD = _two_step_table(config)
    terms = DD * (np.outer(a * np.cos(ph1), b * np.cos(ph2)) + np.outer(a * np.sin(ph1), b * np.sin(ph2)))
    pref = 8.0 * config.constants.hbar * config.constants.c / math.pi
    return float(pref * terms.sum())
