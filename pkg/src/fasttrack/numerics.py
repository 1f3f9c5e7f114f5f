"""Low-level numerics: normal distribution, adaptive quadrature, root finding.

Every routine here is a pure function.  All integrands passed to
:func:`integrate` must be vectorized (accept and return numpy arrays); the
quadrature evaluates whole Gauss panels in single calls.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri


class ConvergenceError(RuntimeError):
    """Quadrature failed to meet its tolerance; carries the best estimate."""

    def __init__(self, message: str, best_estimate: float, error_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class BracketError(ValueError):
    """A root bracket without a sign change, or bracket expansion gave up."""


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances and budget for adaptive quadrature."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 400
    tail_halfwidth: float = 8.5

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be a positive integer")
        if self.tail_halfwidth < 8:
            raise ValueError("tail_halfwidth must be at least 8")


@dataclass(frozen=True)
class RootSettings:
    """Tolerances and budget for bracketing root searches."""

    x_tol: float = 1e-9
    f_tol: float = 1e-10
    max_iter: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self):
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.bracket_growth <= 1:
            raise ValueError("bracket_growth must exceed 1")


DEFAULT_QUAD = QuadratureSettings()
DEFAULT_ROOT = RootSettings()

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def std_normal_cdf(x):
    """Standard normal distribution function Phi, vectorized.

    Raises ValueError on non-finite scalar input.
    """
    if np.isscalar(x) or isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"std_normal_cdf requires finite input, got {x}")
        return float(ndtr(x))
    return ndtr(np.asarray(x, dtype=float))


def std_normal_quantile(p):
    """Inverse of the standard normal distribution function, vectorized.

    Scalar input must lie strictly inside (0, 1).
    """
    if np.isscalar(p) or isinstance(p, float):
        if not (0.0 < p < 1.0):
            raise ValueError(f"std_normal_quantile requires p in (0, 1), got {p}")
        return float(ndtri(p))
    return ndtri(np.asarray(p, dtype=float))


def std_normal_pdf(x):
    """Standard normal density, vectorized."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


_G7_X, _G7_W = leggauss(7)
_G15_X, _G15_W = leggauss(15)


def _panel(f: Callable, a: float, b: float) -> tuple[float, float]:
    """G15 estimate over [a, b] with |G15 - G7| as the error estimate."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = np.concatenate((mid + half * _G15_X, mid + half * _G7_X))
    y = np.asarray(f(x), dtype=float)
    i15 = half * float(np.dot(_G15_W, y[:15]))
    i7 = half * float(np.dot(_G7_W, y[15:]))
    return i15, abs(i15 - i7)


def integrate(
    f: Callable,
    lo: float,
    hi: float,
    settings: QuadratureSettings = DEFAULT_QUAD,
    split_points: Sequence[float] = (),
) -> float:
    """Adaptive panel quadrature of a vectorized integrand on [lo, hi].

    Infinite endpoints are truncated at +-tail_halfwidth standard normal
    deviations; this is only adequate for integrands dominated by a standard
    normal density centred near zero (callers with shifted weights must
    truncate themselves).  Known kink abscissas can be passed via
    ``split_points`` so that panel boundaries coincide with them.
    """
    if math.isinf(lo):
        lo = -settings.tail_halfwidth
    if math.isinf(hi):
        hi = settings.tail_halfwidth
    if not lo < hi:
        raise ValueError(f"integrate requires lo < hi, got [{lo}, {hi}]")

    cuts = sorted({lo, hi, *(p for p in split_points if lo < p < hi)})
    heap: list[tuple[float, float, float, float]] = []
    total, total_err = 0.0, 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        est, err = _panel(f, a, b)
        heapq.heappush(heap, (-err, a, b, est))
        total += est
        total_err += err

    n_panels = len(heap)
    while total_err > max(settings.abs_tol, settings.rel_tol * abs(total)):
        if n_panels >= settings.max_subdivisions:
            raise ConvergenceError(
                f"quadrature used {n_panels} panels without reaching tolerance "
                f"(estimate {total!r}, error {total_err!r})",
                best_estimate=total,
                error_estimate=total_err,
            )
        neg_err, a, b, est = heapq.heappop(heap)
        total -= est
        total_err += neg_err  # neg_err == -err
        mid = 0.5 * (a + b)
        for aa, bb in ((a, mid), (mid, b)):
            e, r = _panel(f, aa, bb)
            heapq.heappush(heap, (-r, aa, bb, e))
            total += e
            total_err += r
        n_panels += 1
    return total


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    settings: RootSettings = DEFAULT_ROOT,
) -> float:
    """Root of a continuous scalar function on a sign-changing bracket."""
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) <= settings.f_tol:
        return lo
    if abs(f_hi) <= settings.f_tol:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(
            f"no sign change on [{lo}, {hi}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )
    return float(
        brentq(f, lo, hi, xtol=settings.x_tol, maxiter=settings.max_iter)
    )


def solve_monotone(
    g: Callable[[float], float],
    target: float,
    lo_guess: float,
    settings: RootSettings = DEFAULT_ROOT,
) -> tuple[float, bool]:
    """Smallest x >= lo_guess with g(x) = target, for non-decreasing g.

    Returns ``(x, already_satisfied)``: if g(lo_guess) already meets the
    target, ``lo_guess`` is returned with the flag set.  The upper bracket is
    found by geometric expansion.
    """
    g_lo = g(lo_guess)
    if g_lo >= target - settings.f_tol:
        return lo_guess, True

    step = max(abs(lo_guess), 1.0)
    lo, hi = lo_guess, lo_guess + step
    for _ in range(settings.max_iter):
        if g(hi) >= target:
            break
        lo = hi
        step *= settings.bracket_growth
        hi = lo + step
    else:
        raise BracketError(
            f"bracket expansion from {lo_guess} did not reach target {target}"
        )
    x = find_root(lambda t: g(t) - target, lo, hi, settings)
    return x, False


def tail_upper_limit(center: float, settings: QuadratureSettings = DEFAULT_QUAD) -> float:
    """Truncation point for integrals weighted by a normal density at ``center``."""
    return center + settings.tail_halfwidth
