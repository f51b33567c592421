"""Resonance interaction between two identical atoms sharing one excitation.

Energies follow the Gaussian-form expressions (no ``1/(4 pi eps0)``) and are
converted to SI joules at the boundary: with dipoles in C m and distances in
m, the Gaussian-form value is multiplied by ``1/(4 pi eps0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import constants as _codata
from scipy import stats
from scipy.special import spherical_jn

from .core import CODATA, PhysicalConstants, evaluate_grid
from .errors import ConfigurationError, ConvergenceError, DomainError, FitError

GAUSSIAN_TO_SI = 1.0 / (4.0 * math.pi * _codata.epsilon_0)
UNIT_CONVENTION = ("SI joules; Gaussian-form dipole expressions multiplied by 1/(4 pi eps0), "
                   "dipoles in C m, distances in m")

ENVIRONMENTS = ("vacuum", "crystal-outside", "crystal-inside")


class PerturbativeValidityWarning(UserWarning):
    """Transition frequency too close to a band edge for second-order theory."""


def _vec3(v, name):
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be a finite 3-vector", key=name)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AtomPair:
    """Two identical two-level atoms in the state ``(|g e> + symmetry |e g>)/sqrt(2)``.

    ``r_vec`` is ``r_B - r_A``; ``symmetry`` is +1 (symmetric, superradiant)
    or -1 (antisymmetric, subradiant).
    """

    r_vec: np.ndarray
    omega_a: float
    mu_A: np.ndarray
    mu_B: np.ndarray
    symmetry: int = 1
    constants: PhysicalConstants = field(default=CODATA)

    def __post_init__(self):
        object.__setattr__(self, "r_vec", _vec3(self.r_vec, "r_vec"))
        object.__setattr__(self, "mu_A", _vec3(self.mu_A, "mu_A"))
        object.__setattr__(self, "mu_B", _vec3(self.mu_B, "mu_B"))
        if not float(np.linalg.norm(self.r_vec)) > 0:
            raise DomainError("atoms must be separated (|r_vec| > 0)")
        w = float(self.omega_a)
        if not (math.isfinite(w) and w > 0):
            raise ConfigurationError(f"omega_a must be positive, got {self.omega_a!r}", key="omega_a")
        object.__setattr__(self, "omega_a", w)
        if self.symmetry not in (1, -1):
            raise ConfigurationError(f"symmetry must be +1 or -1, got {self.symmetry!r}", key="symmetry")
        object.__setattr__(self, "symmetry", int(self.symmetry))

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.r_vec))

    @property
    def r_hat(self) -> np.ndarray:
        return self.r_vec / self.r

    @property
    def k_a(self) -> float:
        return self.omega_a / self.constants.c

    def at_distance(self, r: float) -> "AtomPair":
        """Same orientation and dipoles, separation scaled to ``r``."""
        return AtomPair(self.r_hat * float(r), self.omega_a, self.mu_A, self.mu_B,
                        self.symmetry, self.constants)

    def swapped(self) -> "AtomPair":
        """Relabel the atoms: ``r -> -r`` and ``mu_A <-> mu_B``."""
        return AtomPair(-self.r_vec, self.omega_a, self.mu_B, self.mu_A, self.symmetry, self.constants)

    def with_symmetry(self, symmetry: int) -> "AtomPair":
        return AtomPair(self.r_vec, self.omega_a, self.mu_A, self.mu_B, symmetry, self.constants)


@dataclass(frozen=True)
class PhotonicCrystal:
    """Isotropic band-gap model with effective-mass bands.

    Below the gap ``w(k) = omega_l - A (k - k0)**2`` for ``0 <= k <= k0``;
    above it ``w(k) = omega_u + A (k - k0)**2`` for ``k >= k0``. The curvature
    is tied to the lower edge by ``omega_l = A k0**2``, which makes the lower
    band linear (``w ~ 2 A k0 k``) for long wavelengths. ``A`` may be passed
    explicitly but must satisfy that relation.
    """

    omega_l: float
    omega_u: float
    k0: float
    A: float | None = None

    def __post_init__(self):
        for name in ("omega_l", "omega_u", "k0"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}", key=name)
            object.__setattr__(self, name, value)
        if not self.omega_l < self.omega_u:
            raise ConfigurationError("omega_l must be below omega_u", key="omega_u")
        implied = self.omega_l / (self.k0 * self.k0)
        if self.A is None:
            object.__setattr__(self, "A", implied)
        else:
            a = float(self.A)
            if not (math.isfinite(a) and a > 0) or abs(a - implied) > 1e-9 * implied:
                raise ConfigurationError(
                    f"A={a!r} violates omega_l = A k0**2 (expected {implied!r})", key="A")
            object.__setattr__(self, "A", a)

    def band_frequency(self, k):
        k = np.asarray(k, dtype=float)
        q = k - self.k0
        return np.where(k <= self.k0, self.omega_l - self.A * q * q, self.omega_u + self.A * q * q)


@dataclass(frozen=True)
class InteractionCurve:
    distances: np.ndarray
    energies: np.ndarray
    environment: str

    def __post_init__(self):
        r = np.asarray(self.distances, dtype=float)
        e = np.asarray(self.energies, dtype=float)
        if r.ndim != 1 or r.shape != e.shape:
            raise ValueError("distances and energies must be 1-D arrays of equal length")
        if r.size > 1 and np.any(np.diff(r) <= 0):
            raise ValueError("distances must be strictly increasing")
        if not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite")
        if self.environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.environment!r}")
        object.__setattr__(self, "distances", r)
        object.__setattr__(self, "energies", e)


# -- dipole tensor algebra ---------------------------------------------------------

def _contractions(pair):
    # symmetric in (mu_A, mu_B) and even in r_hat, so exchange is exact
    rh = pair.r_hat
    return float(np.dot(pair.mu_A, pair.mu_B)), float(np.dot(pair.mu_A, rh)) * float(np.dot(pair.mu_B, rh))


def _bracket(dot_ab, dot_ar_br, k, r):
    """``mu_A.[(1 - 3 rr)(cos kr + kr sin kr) - (1 - rr)(kr)^2 cos kr].mu_B / r^3``."""
    kr = k * r
    cs, sn = math.cos(kr), math.sin(kr)
    P = cs + kr * sn
    Q = kr * kr * cs
    return (dot_ab * (P - Q) - dot_ar_br * (3.0 * P - Q)) / r ** 3


def dipole_tensor_operator(r_vec, k: float) -> np.ndarray:
    """``(-lap delta_ij + d_i d_j) cos(k r)/r`` as a 3x3 matrix (1/m^3)."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if not r > 0:
        raise DomainError("operator undefined at r = 0")
    rh = r_vec / r
    kr = k * r
    P = math.cos(kr) + kr * math.sin(kr)
    Q = kr * kr * math.cos(kr)
    eye = np.eye(3)
    rr = np.outer(rh, rh)
    return -((eye - 3.0 * rr) * P - (eye - rr) * Q) / r ** 3


def vacuum_resonance_energy(pair: AtomPair) -> float:
    """Free-space resonance interaction energy (J)."""
    ab, arbr = _contractions(pair)
    return pair.symmetry * _bracket(ab, arbr, pair.k_a, pair.r) * GAUSSIAN_TO_SI


def static_dipole_energy(pair: AtomPair) -> float:
    """Near-zone limit ``+/- mu_A.(1 - 3 rr).mu_B / r^3`` of the vacuum result (J)."""
    ab, arbr = _contractions(pair)
    return pair.symmetry * (ab - 3.0 * arbr) / pair.r ** 3 * GAUSSIAN_TO_SI


def outside_gap_prefactor(pair: AtomPair, crystal: PhotonicCrystal) -> float:
    """``omega_u / (2 sqrt(A (omega_a - omega_u)))`` (1/m)."""
    detuning = pair.omega_a - crystal.omega_u
    if not detuning > 0:
        raise DomainError("omega_a is inside the gap or below its upper edge; use crystal_inside_gap_energy")
    return crystal.omega_u / (2.0 * math.sqrt(crystal.A * detuning))


def outside_gap_enhancement(pair: AtomPair, crystal: PhotonicCrystal) -> float:
    """Ratio of far-zone envelopes, crystal over vacuum, at equal distance.

    Both fall off as ``1/r`` with amplitude ``k**2 mu_A.(1 - rr).mu_B`` times the
    respective prefactor, so the ratio is ``F k0 / k_a**2``.
    """
    return outside_gap_prefactor(pair, crystal) * crystal.k0 / pair.k_a ** 2


def crystal_outside_gap_energy(pair: AtomPair, crystal: PhotonicCrystal,
                               validity_threshold: float = 1e-6) -> float:
    """Resonance energy for a transition just above the upper band edge (J).

    Warns with :class:`PerturbativeValidityWarning` when
    ``omega_a - omega_u < validity_threshold * omega_u``.
    """
    F = outside_gap_prefactor(pair, crystal)
    if pair.omega_a - crystal.omega_u < validity_threshold * crystal.omega_u:
        warnings.warn(
            f"omega_a - omega_u = {pair.omega_a - crystal.omega_u:g} 1/s is below "
            f"{validity_threshold:g} omega_u; the edge enhancement is outside the perturbative regime",
            PerturbativeValidityWarning, stacklevel=2)
    ab, arbr = _contractions(pair)
    # F * (-lap + grad grad) cos(k0 r)/(k0 r) = -(F/k0) * bracket(k0)
    return -pair.symmetry * (F / crystal.k0) * _bracket(ab, arbr, crystal.k0, pair.r) * GAUSSIAN_TO_SI


# -- transition frequency inside the gap -------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule over the two bands, refined by doubling.

    Panels are graded towards the band edge at ``k0`` (``grading`` > 1).
    The rule is applied with ``panels * 2**i`` panels per band for
    ``i = 0..levels-1``; the last two levels must agree to ``rtol``.
    """

    panels: int = 32
    order: int = 16
    levels: int = 3
    rtol: float = 1e-6
    grading: float = 2.0
    k_max_factor: float = 2.0

    def __post_init__(self):
        if self.panels < 1 or self.order < 2 or self.levels < 2:
            raise ConfigurationError("quadrature needs panels >= 1, order >= 2, levels >= 2", key="quadrature")
        if not self.rtol > 0:
            raise ConfigurationError("quadrature rtol must be positive", key="quadrature.rtol")
        if not self.grading >= 1:
            raise ConfigurationError("quadrature grading must be >= 1", key="quadrature.grading")
        if not self.k_max_factor > 1:
            raise ConfigurationError("k_max_factor must exceed 1", key="quadrature.k_max_factor")


@lru_cache(maxsize=64)
def _band_nodes(k0, k_max, panels, order, grading):
    x, w = np.polynomial.legendre.leggauss(order)
    t = np.linspace(0.0, 1.0, panels + 1)
    lower = k0 * (1.0 - (1.0 - t) ** grading)
    upper = k0 + (k_max - k0) * t ** grading
    ks, ws = [], []
    for edges in (lower, upper):
        a, b = edges[:-1, None], edges[1:, None]
        half = 0.5 * (b - a)
        ks.append((half * x + 0.5 * (a + b)).ravel())
        ws.append((half * w).ravel())
    k, wt = np.concatenate(ks), np.concatenate(ws)
    k.setflags(write=False)
    wt.setflags(write=False)
    return k, wt


def _radial_integrals(r, omega_a, crystal, k, wt):
    """``I(r) = (1/pi) int g(k) j0(k r) dk`` and its first two r-derivatives."""
    om = crystal.band_frequency(k)
    g = om * (1.0 / (om - omega_a) + 1.0 / (om + omega_a)) / math.pi
    kr = k * r
    j0 = spherical_jn(0, kr)
    j1 = spherical_jn(1, kr)
    f0 = g * j0 * wt
    f1 = -g * k * j1 * wt
    f2 = g * k * k * (2.0 * j1 / kr - j0) * wt
    vals = np.array([f0.sum(), f1.sum(), f2.sum()])
    scales = np.array([np.abs(f0).sum(), np.abs(f1).sum(), np.abs(f2).sum()])
    return vals, scales


def inside_gap_radial(r: float, omega_a: float, crystal: PhotonicCrystal,
                      quadrature: QuadratureSpec | None = None):
    """Radial integral and derivatives with refinement diagnostics.

    Returns ``(values, diagnostics)`` where ``values = (I, dI/dr, d2I/dr2)``
    (1/m, 1/m^2, 1/m^3) at the finest level.
    """
    q = quadrature or QuadratureSpec()
    if not crystal.omega_l < omega_a < crystal.omega_u:
        raise DomainError("omega_a must lie strictly inside the band gap")
    k_max = q.k_max_factor * crystal.k0
    history = []
    changes = []
    prev = None
    for level in range(q.levels):
        panels = q.panels * 2 ** level
        k, wt = _band_nodes(crystal.k0, k_max, panels, q.order, q.grading)
        vals, scales = _radial_integrals(r, omega_a, crystal, k, wt)
        history.append(vals)
        if prev is not None:
            changes.append(float(np.max(np.abs(vals - prev) / scales)))
        prev = vals
    diag = {"panels": [q.panels * 2 ** i for i in range(q.levels)], "relative_changes": changes,
            "rtol": q.rtol, "k_max": k_max, "r": r}
    if changes[-1] > q.rtol:
        raise ConvergenceError(
            f"in-gap quadrature not converged at r={r:g} m: last refinement changed the result by "
            f"{changes[-1]:.3g} (rtol {q.rtol:g})", diagnostics=diag)
    return tuple(float(v) for v in history[-1]), diag


def crystal_inside_gap_energy(pair: AtomPair, crystal: PhotonicCrystal,
                              quadrature: QuadratureSpec | None = None) -> float:
    """Resonance energy for a transition frequency inside the band gap (J).

    Second-order shift with the field modes of the effective-mass bands,
    ``-/+ mu_A.(-lap + grad grad).mu_B I(r)`` where
    ``I(r) = (1/pi) int dk w_k [1/(w_k - w_a) + 1/(w_k + w_a)] j0(k r)``.
    With ``w_k = c k`` this reduces to ``cos(k_a r)/r`` and the free-space
    result. The integral runs over ``0 <= k <= k_max_factor * k0``, the
    range where the band model is meaningful; contributions from higher
    bands are not modelled. No energy denominator vanishes because no mode
    lies in the gap.
    """
    (I, dI, d2I), _ = inside_gap_radial(pair.r, pair.omega_a, crystal, quadrature)
    r = pair.r
    ab, arbr = _contractions(pair)
    op = -ab * (d2I + dI / r) + arbr * (d2I - dI / r)
    return -pair.symmetry * op * GAUSSIAN_TO_SI


def dos(omega, crystal: PhotonicCrystal):
    """Photon density of states ``k**2 |dk/dw| / pi**2`` (s/m^3).

    Zero inside the gap, divergent as ``|w - w_edge|**-1/2`` at both edges
    (``inf`` exactly on an edge), and ``~ w**2`` for ``w -> 0``.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise DomainError("frequency must be non-negative")
    A, k0 = crystal.A, crystal.k0
    out = np.zeros_like(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = w < crystal.omega_l
        root = np.sqrt(np.where(lower, (crystal.omega_l - w) / A, 0.0))
        # k0 - sqrt(k0**2 - w/A), rationalized for small w
        k_low = (w / A) / (k0 + root)
        out = np.where(lower, k_low ** 2 / (2.0 * A * root) / math.pi ** 2, out)
        upper = w > crystal.omega_u
        root_u = np.sqrt(np.where(upper, (w - crystal.omega_u) / A, 0.0))
        k_up = k0 + root_u
        out = np.where(upper, k_up ** 2 / (2.0 * A * root_u) / math.pi ** 2, out)
    out = np.where((w == crystal.omega_l) | (w == crystal.omega_u), np.inf, out)
    return float(out) if out.ndim == 0 else out


# -- curves and power-law fits -------------------------------------------------------

def interaction_curve(distances: Sequence[float], pair: AtomPair, environment: str = "vacuum",
                      crystal: PhotonicCrystal | None = None,
                      quadrature: QuadratureSpec | None = None,
                      threads: int | None = None) -> InteractionCurve:
    """Energy versus separation along ``pair.r_hat``."""
    if environment == "vacuum":
        f = lambda r: vacuum_resonance_energy(pair.at_distance(r))
    elif environment == "crystal-outside":
        f = lambda r: crystal_outside_gap_energy(pair.at_distance(r), crystal)
    elif environment == "crystal-inside":
        f = lambda r: crystal_inside_gap_energy(pair.at_distance(r), crystal, quadrature)
    else:
        raise ValueError(f"unknown environment {environment!r}")
    if environment != "vacuum" and crystal is None:
        raise ConfigurationError("crystal parameters are required", key="crystal")
    energies = evaluate_grid(f, distances, threads)
    return InteractionCurve(np.asarray(distances, float), np.asarray(energies), environment)


def envelope_maxima(r, values):
    """Local maxima of ``|values|``, refined by a parabola through three samples.

    Returns ``(positions, magnitudes)``.
    """
    r = np.asarray(r, dtype=float)
    m = np.abs(np.asarray(values, dtype=float))
    inner = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])) + 1
    pos, mag = [], []
    for i in inner:
        x0, x1, x2 = r[i - 1], r[i], r[i + 1]
        y0, y1, y2 = m[i - 1], m[i], m[i + 1]
        d01, d12 = (y1 - y0) / (x1 - x0), (y2 - y1) / (x2 - x1)
        curv = (d12 - d01) / (x2 - x0)
        if curv < 0:
            xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv)
            if x0 <= xv <= x2:
                yv = y1 + d01 * (xv - x1) + curv * (xv - x0) * (xv - x1)
                pos.append(xv)
                mag.append(max(yv, y1))
                continue
        pos.append(x1)
        mag.append(y1)
    return np.asarray(pos), np.asarray(mag)


def fit_far_zone_exponent(curve: InteractionCurve, window: tuple[float, float] | None = None,
                          mode: str = "auto", min_points: int = 10) -> tuple[float, float]:
    """Power-law exponent of ``|dE|`` versus ``r`` by least squares in log-log.

    ``mode="extrema"`` fits the local maxima of ``|dE|`` (the envelope of an
    oscillating curve), ``mode="raw"`` fits every sample (monotone curves),
    and ``"auto"`` picks extrema when at least ``min_points`` are found and
    falls back to raw samples when ``|dE|`` has no interior maxima.
    Returns ``(slope, standard_error)``.
    """
    r, e = curve.distances, curve.energies
    if window is not None:
        lo, hi = window
        sel = (r >= lo) & (r <= hi)
        r, e = r[sel], e[sel]
    if mode not in ("auto", "extrema", "raw"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode in ("auto", "extrema"):
        px, py = envelope_maxima(r, e)
        if px.size >= min_points:
            x, y = px, py
        elif mode == "extrema" or px.size > 0:
            raise FitError(f"found {px.size} local extrema in the window, need at least {min_points}")
        else:
            x, y = r, np.abs(e)
    else:
        x, y = r, np.abs(e)
    good = y > 0
    x, y = x[good], y[good]
    if x.size < min_points:
        raise FitError(f"only {x.size} usable samples in the window, need at least {min_points}")
    res = stats.linregress(np.log(x), np.log(y))
    return float(res.slope), float(res.stderr)
