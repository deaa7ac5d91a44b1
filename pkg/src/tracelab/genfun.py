"""Probability generating functions of M and W, inversion of g_M along the
unit circle, and maxima of {-1,0,1} polynomials on short arcs.

W is the law of the (0-based) replication offset inside a block,
``W(j) = Pr[j + 1 in R] / E|R|``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .channel import ChannelSpec, m_pmf, replication_profile
from .errors import ConvergenceError, DomainError

DEFAULT_TRUNC_EPS = 1e-15
# coefficient vectors are never extended past this index
_MAX_TERMS = 200_000


class PgfValue(NamedTuple):
    value: complex
    error: float


@dataclass(frozen=True, eq=False)
class Pgf:
    """Truncated power series of a PGF with an explicit tail envelope.

    Coefficients past the stored ones obey ``p_j <= kappa * exp(-alpha * j)``
    (``envelope = (kappa, alpha)``); ``envelope is None`` means the stored
    coefficients are the whole series.  ``source(K)`` returns exact
    coefficients 0..K so evaluation can extend the series on demand.
    """

    coefficients: np.ndarray
    discarded_mass: float
    radius: float
    envelope: tuple | None = None
    closed_form: Callable | None = None
    source: Callable | None = None
    label: str = ""

    @property
    def trunc_point(self) -> int:
        return len(self.coefficients) - 1

    def tail_error(self, z, K=None) -> float:
        """Bound on |sum_{j>K} p_j z^j|."""
        if self.envelope is None:
            return 0.0
        K = self.trunc_point if K is None else K
        kappa, alpha = self.envelope
        rho = abs(z) * math.exp(-alpha)
        if rho >= 1.0:
            return math.inf
        bound = kappa * rho ** (K + 1) / (1.0 - rho)
        if abs(z) <= 1.0 and K == self.trunc_point:
            bound = min(bound, self.discarded_mass)
        return bound

    def terms_for(self, r: float, target: float) -> int:
        """Smallest K whose tail bound at |z| = r is <= target (capped)."""
        if self.envelope is None:
            return self.trunc_point
        kappa, alpha = self.envelope
        rho = r * math.exp(-alpha)
        if rho >= 1.0:
            return _MAX_TERMS
        if rho == 0.0:
            return self.trunc_point
        need = math.log(target * (1.0 - rho) / kappa) / math.log(rho) - 1.0
        return int(min(_MAX_TERMS, max(self.trunc_point, math.ceil(need))))

    def extended(self, K: int) -> Pgf:
        if K <= self.trunc_point or self.source is None:
            return self
        coeffs = self.source(K)
        return replace(self, coefficients=coeffs, discarded_mass=max(0.0, 1.0 - math.fsum(coeffs)))

    def __call__(self, z):
        return eval_pgf(self, z).value


def _polyval(z, coeffs):
    return npoly.polyval(z, coeffs)


def eval_pgf(pgf: Pgf, z, target: float = 1e-9) -> PgfValue:
    """Evaluate at complex ``z`` together with a truncation-error bound.

    The series is extended until the envelope bound drops to ``target``
    when that is possible.
    """
    z = complex(z)
    if abs(z) >= pgf.radius:
        raise DomainError(f"|z|={abs(z):.6g} outside the disk of convergence (radius {pgf.radius:.6g})")
    p = pgf
    if p.tail_error(z) > target:
        p = p.extended(p.terms_for(abs(z), target))
    return PgfValue(complex(_polyval(z, p.coefficients)), p.tail_error(z))


def eval_derivative(pgf: Pgf, z, target: float = 1e-9) -> complex:
    z = complex(z)
    if abs(z) >= pgf.radius:
        raise DomainError(f"|z|={abs(z):.6g} outside the disk of convergence")
    p = pgf
    if p.tail_error(z) > target:
        p = p.extended(p.terms_for(abs(z), target))
    c = p.coefficients
    return complex(_polyval(z, c[1:] * np.arange(1, len(c))))


def _terms_for_mass(kappa, alpha, eps, scale=1.0):
    # smallest K with scale * kappa e^{-alpha (K+1)} / (1 - e^{-alpha}) <= eps
    need = math.log(scale * kappa / (eps * (1.0 - math.exp(-alpha)))) / alpha - 1.0
    return max(0, math.ceil(need))


def pgf_of_M(spec: ChannelSpec, trunc_eps: float = DEFAULT_TRUNC_EPS) -> Pgf:
    if not 0.0 < trunc_eps <= 1e-6:
        raise DomainError("trunc_eps must lie in (0, 1e-6]")
    closed = spec.law.pgf_m
    if spec.support_max is not None:
        coeffs = np.array(m_pmf(spec, spec.support_max))
        return Pgf(coeffs, 0.0, math.inf, None, closed, None, "g_M")
    K = _terms_for_mass(spec.kappa, spec.alpha, trunc_eps)
    coeffs = np.array(m_pmf(spec, K))

    def source(k):
        return np.array(m_pmf(spec, k))

    return Pgf(
        coeffs,
        max(0.0, 1.0 - math.fsum(coeffs)),
        spec.radius,
        (spec.kappa, spec.alpha),
        closed,
        source,
        "g_M",
    )


@lru_cache(maxsize=64)
def _profile(law, K):
    r = np.asarray(law.profile(K), dtype=float)
    r.setflags(write=False)
    return r


def pgf_of_W(spec: ChannelSpec, trunc_eps: float = DEFAULT_TRUNC_EPS) -> Pgf:
    if not 0.0 < trunc_eps <= 1e-6:
        raise DomainError("trunc_eps must lie in (0, 1e-6]")
    e_r = spec.expected_replications
    closed = spec.law.pgf_w
    if spec.support_max is not None:
        prof = replication_profile(spec, max(1, spec.support_max))
        return Pgf(np.array(prof.r) / e_r, 0.0, math.inf, None, closed, None, "g_W")
    # W(j) <= Pr[M >= j + 1] / E|R| <= (kappa e^{-alpha} / E|R|) e^{-alpha j}
    kappa_w = spec.kappa * math.exp(-spec.alpha) / e_r
    K = _terms_for_mass(kappa_w, spec.alpha, trunc_eps)

    def source(k):
        return np.array(_profile(spec.law, k + 1)) / e_r

    coeffs = source(K)
    return Pgf(
        coeffs,
        max(0.0, 1.0 - math.fsum(coeffs)),
        spec.radius,
        (kappa_w, spec.alpha),
        closed,
        source,
        "g_W",
    )


def derivative_at_one(pgf: Pgf) -> float:
    """sum_j j p_j, i.e. the mean of the underlying law."""
    p = pgf
    if p.envelope is not None:
        kappa, alpha = p.envelope
        K = p.trunc_point
        # sum_{j>K} j kappa e^{-alpha j} <= kappa (K+1) e^{-alpha(K+1)} / (1-e^{-alpha})^2
        while kappa * (K + 1) * math.exp(-alpha * (K + 1)) / (1.0 - math.exp(-alpha)) ** 2 > 1e-14:
            K = int(K * 1.5) + 8
        p = p.extended(K)
    c = p.coefficients
    return math.fsum(np.arange(len(c)) * c)


# ---------------------------------------------------------------------------
# inversion of g_M near z = 1

_NEWTON_ITERS = 40
_MIN_STEP = 1e-7
_MAX_STEPS = 20_000
_EVAL_TARGET = 1e-15
_NEWTON_MAX_TERMS = 4096  # iterates needing longer series sit too close to the radius


def _admissible(g: Pgf, z: complex) -> bool:
    r = abs(z)
    if not cmath.isfinite(z) or r >= g.radius:
        return False
    return g.tail_error(z) <= _EVAL_TARGET or g.terms_for(r, _EVAL_TARGET) <= _NEWTON_MAX_TERMS


def _newton(g: Pgf, z: complex, w: complex, tol: float):
    """Newton iteration for g(z) = w; returns the root or None."""
    for _ in range(_NEWTON_ITERS):
        val = eval_pgf(g, z, _EVAL_TARGET).value
        resid = val - w
        if abs(resid) <= tol:
            return z
        d = eval_derivative(g, z, _EVAL_TARGET)
        if d == 0:
            return None
        step = resid / d
        z_new = z - step
        if not _admissible(g, z_new):
            return None
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            z = z_new
            break
        z = z_new
    val = eval_pgf(g, z, _EVAL_TARGET).value
    return z if abs(val - w) <= tol else None


def invert_on_arc(spec: ChannelSpec, phi: float, tol: float = 1e-12, pgf: Pgf | None = None) -> complex:
    """Solve g_M(z) = e^{i phi} on the branch through z = 1.

    Newton continuation along the homotopy ``w(t) = e^{i phi t}``, ``t`` from
    0 to 1: an Euler predictor followed by a Newton corrector at each step.
    A step whose corrector fails, leaves the disk of convergence (or gets so
    close to its edge that the series needs more than 4096 terms), or lands
    far from its predictor is halved.  The step budget is exhausted when the step
    falls below 1e-7 or after 20000 accepted steps; either raises
    :class:`ConvergenceError`.
    """
    if not 0.0 < tol <= 1e-8:
        raise DomainError("tol must lie in (0, 1e-8]")
    phi = float(phi)
    if phi == 0.0:
        return 1.0 + 0.0j
    g = pgf if pgf is not None else pgf_of_M(spec)
    z = 1.0 + 0.0j
    t = 0.0
    h = min(1.0, 0.05 / abs(phi))
    steps = 0
    inner_tol = tol * 0.1
    while t < 1.0:
        if h < _MIN_STEP or steps > _MAX_STEPS:
            raise ConvergenceError(
                f"continuation stalled at t={t:.6g} (phi={phi:.6g}, z={z:.6g}); "
                "phi is outside the locally invertible neighbourhood"
            )
        t_new = min(1.0, t + h)
        w_old = cmath.exp(1j * phi * t)
        w_new = cmath.exp(1j * phi * t_new)
        try:
            d = eval_derivative(g, z, _EVAL_TARGET)
            pred = z + (w_new - w_old) / d
            z_new = _newton(g, pred, w_new, inner_tol) if _admissible(g, pred) else None
        except DomainError:
            z_new = None
        if z_new is None or abs(z_new - pred) > 0.5 * abs(pred - z) + 1e-12:
            h *= 0.5
            continue
        z, t = z_new, t_new
        steps += 1
        h = min(1.0, h * 1.5)
    final = eval_pgf(g, z, _EVAL_TARGET).value
    if abs(final - cmath.exp(1j * phi)) > tol:
        raise ConvergenceError(f"inversion residual {abs(final - cmath.exp(1j * phi)):.3e} > tol")
    return z


@dataclass(frozen=True)
class ArcBoundReport:
    phis: np.ndarray
    z: np.ndarray
    ratios: np.ndarray  # (|z| - 1) / phi^2, 0 at phi = 0
    abs_gw: np.ndarray
    c_prime: float  # max ratio over the grid
    bounded: bool  # ratios stabilise as phi -> 0
    lower_ok: np.ndarray  # |z| >= 1 - 1e-9
    gw_ok: np.ndarray  # |g_W(z)| >= 1/2
    gw_threshold: float  # largest |phi| below which every grid point has |g_W| >= 1/2


def arc_quadratic_bound_check(spec: ChannelSpec, phis, tol: float = 1e-12) -> ArcBoundReport:
    """Invert g_M on a grid of angles and measure how |z_phi| grows.

    ``phis`` should shrink in magnitude; the ratio sequence is called bounded
    when its last two entries agree to 10% (or 1e-6 absolutely).
    """
    phis = np.asarray(phis, dtype=float)
    gm, gw = pgf_of_M(spec), pgf_of_W(spec)
    zs = np.array([invert_on_arc(spec, p, tol, pgf=gm) for p in phis])
    mod = np.abs(zs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(phis == 0.0, 0.0, (mod - 1.0) / phis**2)
    abs_gw = np.array([abs(eval_pgf(gw, z).value) for z in zs])
    gw_ok = abs_gw >= 0.5
    order = np.argsort(np.abs(phis))
    threshold = 0.0
    for i in order:
        if not gw_ok[i]:
            break
        threshold = abs(phis[i])
    if len(ratios) >= 2:
        a, b = ratios[-2], ratios[-1]
        bounded = bool(abs(a - b) <= 0.1 * max(abs(a), abs(b)) + 1e-6)
    else:
        bounded = True
    return ArcBoundReport(
        phis,
        zs,
        ratios,
        abs_gw,
        float(np.max(ratios)) if len(ratios) else 0.0,
        bounded,
        mod >= 1.0 - 1e-9,
        gw_ok,
        threshold,
    )


# ---------------------------------------------------------------------------
# arc maxima


@dataclass(frozen=True)
class ArcSpec:
    """The arc {e^{i phi} : |phi| <= pi / L}."""

    L: float
    grid_points: int = 1024

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError("L must be positive")
        if self.grid_points < 16:
            raise DomainError("grid_points must be >= 16")

    @property
    def half_width(self) -> float:
        return math.pi / self.L


class ArcMax(NamedTuple):
    w_star: complex
    max_abs: float
    phi_star: float


def _abs_on_arc(coeffs, phis):
    return np.abs(npoly.polyval(np.exp(1j * phis), coeffs))


def arc_max(coeffs, arc: ArcSpec) -> ArcMax:
    """Maximum of |A(w)|, A(w) = sum_j coeffs[j] w^j, over the arc.

    Every local maximum of a uniform grid of max(grid_points, 1024, 64 len)
    points is refined by ternary search inside its two neighbouring grid
    cells.  The returned value is an attained value, hence never above the
    true maximum.
    """
    a = np.asarray(coeffs, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise DomainError("coefficients must be a non-empty vector")
    if not np.all(np.isin(a, (-1.0, 0.0, 1.0))):
        raise DomainError("coefficients must lie in {-1, 0, 1}")
    if not np.any(a):
        raise DomainError("all-zero coefficient vector")
    h = arc.half_width
    npts = max(arc.grid_points, 1024, 64 * len(a))
    grid = np.linspace(-h, h, npts)
    vals = _abs_on_arc(a, grid)

    left = np.concatenate(([-np.inf], vals[:-1]))
    right = np.concatenate((vals[1:], [-np.inf]))
    peaks = np.flatnonzero((vals >= left) & (vals >= right))
    lo = grid[np.maximum(peaks - 1, 0)]
    hi = grid[np.minimum(peaks + 1, npts - 1)]
    for _ in range(200):
        if np.all(hi - lo <= 1e-14):
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        up = _abs_on_arc(a, m1) < _abs_on_arc(a, m2)
        lo = np.where(up, m1, lo)
        hi = np.where(up, hi, m2)
    refined = 0.5 * (lo + hi)
    cand_phi = np.concatenate((grid[peaks], refined))
    cand_val = _abs_on_arc(a, cand_phi)
    best = int(np.argmax(cand_val))
    phi = float(cand_phi[best])
    return ArcMax(cmath.exp(1j * phi), float(cand_val[best]), phi)
