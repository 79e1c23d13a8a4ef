"""Product-form equilibrium and fixed-point solver.

The stationary one-station law of the symmetric network is the
truncated product form of a four-queue cycle, one queue per station
role: spaces reserved ahead of a trip (``w``, infinite-server rate
``nu``), cars inbound (``x``, infinite-server rate ``mu``), cars parked
and available (``y``, single-server), and parked cars reserved for
departure (``z``, infinite-server rate ``nu``), truncated to total
occupancy at most ``K``.  With traffic intensities
``(eta1, rho1, rho2, eta2)`` the unnormalized weight of state
``(w, x, y, z)`` is::

    eta1^w / w!  *  rho1^x / x!  *  rho2^y  *  eta2^z / z!

The self-consistent intensities solve a fixed point: each of
``eta1 = eta2 = (lam/nu) (1 - P[no available car])`` and
``rho1 = (lam/mu) (1 - P[no available car])`` ties the inflow seen by a
queue to the acceptance probability, ``rho2`` balances the available
queue against saturation, and the car density must hit the prescribed
fill ``s``.

Solving goes through a two-variable reduction.  Aggregating the three
infinite-server roles (valid exactly when ``eta1 = eta2 = (mu/nu)
rho1``) collapses the state to ``(i, j) = (w + x + z, y)`` with weights
``t^i / i! * r^j`` where ``t = (1 + 2 mu/nu) rho1``.  On that family:

* ``f_simple(t, r, a, K) = 0`` encodes the first fixed-point equation,
  with ``a = (lam/mu)(1 + 2 mu/nu)``;
* ``solve_phi`` inverts it, giving the unique ``r = phi(t)`` per ``t``;
* the car density along the curve is a weighted mean that must equal
  ``s``, which an outer bisection on ``t`` enforces.

The remaining balance equation for ``rho2`` holds identically on the
curve and is asserted, never solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Measure, ModelParams, count_arrays, fill_vector

__all__ = [
    "RateRatios",
    "SolveReport",
    "SimpleSolveReport",
    "MultipleEquilibriaError",
    "partition_function",
    "product_form",
    "pi_no_available",
    "pi_saturated",
    "pi_mean_fill",
    "simple_partition",
    "simple_form",
    "simple_no_available",
    "simple_saturated",
    "f_simple",
    "solve_phi",
    "g_mean",
    "fill_along_curve",
    "solve_equilibrium",
    "solve_simple_reservation",
]


# ============================================================
# Rate ratios and the truncated product form
# ============================================================

@dataclass(frozen=True)
class RateRatios:
    """Traffic intensities ``(eta1, rho1, rho2, eta2)`` of the four
    station roles, ordered to match ``StationState`` as
    ``(w, x, y, z)``."""

    eta1: float
    rho1: float
    rho2: float
    eta2: float

    def __post_init__(self) -> None:
        vals = (self.eta1, self.rho1, self.rho2, self.eta2)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"ratios must be finite and >= 0, got {vals}")

    @property
    def rho1_tilde(self) -> float:
        """Aggregated intensity of the three infinite-server roles,
        ``eta1 + rho1 + eta2`` (equals ``(1 + 2 mu/nu) rho1`` on
        consistent ratios)."""
        return self.eta1 + self.rho1 + self.eta2


@lru_cache(maxsize=None)
def _factorials(K: int) -> np.ndarray:
    f = np.array([math.factorial(n) for n in range(K + 1)], dtype=np.float64)
    f.setflags(write=False)
    return f


@lru_cache(maxsize=None)
def _log_factorials(K: int) -> np.ndarray:
    f = np.array([math.lgamma(n + 1) for n in range(K + 1)], dtype=np.float64)
    f.setflags(write=False)
    return f


def _raw_weights(rho: RateRatios, K: int) -> np.ndarray:
    w, x, y, z = count_arrays(K)
    f = _factorials(K)
    return (
        rho.eta1 ** w / f[w]
        * (rho.rho1 ** x / f[x])
        * rho.rho2 ** y
        * (rho.eta2 ** z / f[z])
    )


def _normalized_weights(rho: RateRatios, K: int) -> np.ndarray:
    """Product-form probabilities; falls back to log-space arithmetic
    when the plain weights over- or underflow."""
    with np.errstate(over="ignore"):
        wts = _raw_weights(rho, K)
        total = wts.sum()
    if np.isfinite(total) and total > 0.0:
        return wts / total
    w, x, y, z = count_arrays(K)
    lf = _log_factorials(K)

    def xlogr(counts: np.ndarray, r: float) -> np.ndarray:
        if r > 0.0:
            return counts * math.log(r)
        return np.where(counts == 0, 0.0, -np.inf)

    logw = (
        xlogr(w, rho.eta1) + xlogr(x, rho.rho1)
        + xlogr(y, rho.rho2) + xlogr(z, rho.eta2)
        - lf[w] - lf[x] - lf[z]
    )
    logw -= logw.max()
    e = np.exp(logw)
    return e / e.sum()


def partition_function(rho: RateRatios, K: int) -> float:
    """Normalizing constant of the truncated product form.

    Sum of the unnormalized weights over all admissible states; returns
    ``inf`` honestly if the weights overflow double precision.
    """
    with np.errstate(over="ignore"):
        return float(_raw_weights(rho, K).sum())


def product_form(rho: RateRatios, K: int) -> Measure:
    """Truncated product-form measure with intensities ``rho``."""
    return Measure(_normalized_weights(rho, K), K)


def pi_no_available(rho: RateRatios, K: int) -> float:
    """Product-form mass of states with no available car (y = 0)."""
    p = _normalized_weights(rho, K)
    _, _, y, _ = count_arrays(K)
    return float(p[y == 0].sum())


def pi_saturated(rho: RateRatios, K: int) -> float:
    """Product-form mass of states with all ``K`` spaces taken."""
    p = _normalized_weights(rho, K)
    w, x, y, z = count_arrays(K)
    return float(p[w + x + y + z == K].sum())


def pi_mean_fill(rho: RateRatios, K: int) -> float:
    """Product-form mean car count ``E[x + y + z]``."""
    p = _normalized_weights(rho, K)
    return float(p @ fill_vector(K))


# ============================================================
# Two-variable reduction (aggregated infinite-server roles)
# ============================================================

def _exp_partial(x: float, K: int) -> float:
    """Partial exponential sum ``sum_{i<=K} x^i / i!``."""
    total = 1.0
    term = 1.0
    for i in range(K):
        term *= x / (i + 1)
        total += term
    return total


def simple_partition(x: float, y: float, K: int) -> float:
    """Normalizing constant ``sum_{i+j<=K} x^i/i! y^j`` of the reduced
    two-coordinate family."""
    if x < 0 or y < 0:
        raise ValueError("intensities must be >= 0")
    total = 0.0
    xt = 1.0  # x^i / i!
    for i in range(K + 1):
        geo = 1.0
        t = 1.0
        for _ in range(K - i):
            t *= y
            geo += t
        total += xt * geo
        xt *= x / (i + 1)
    return total


def _simple_raw(x: float, y: float, K: int) -> np.ndarray:
    """Unnormalized reduced weights on the triangle, shape (K+1, K+1),
    zero outside ``i + j <= K``.  Scaled by ``y^-K`` when ``y > 1`` so
    large intensities cannot overflow; ratios are unaffected."""
    i = np.arange(K + 1, dtype=np.float64)
    xi = np.power(x, i) / _factorials(K)
    if y > 1.0:
        yj = np.power(y, i - K)
    else:
        yj = np.power(y, i)
    wts = np.outer(xi, yj)
    ii, jj = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    wts[ii + jj > K] = 0.0
    return wts


def _log_simple_weights(x: float, y: float, K: int) -> np.ndarray:
    """Log of the reduced weights, -inf outside the triangle."""
    i = np.arange(K + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x) if x > 0 else -np.inf
        ly = np.log(y) if y > 0 else -np.inf
        li = np.where(i > 0, i * lx, 0.0) - _log_factorials(K)
        lj = np.where(i > 0, i * ly, 0.0)
    lw = li[:, None] + lj[None, :]
    ii, jj = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    lw[ii + jj > K] = -np.inf
    return lw


def simple_form(x: float, y: float, K: int) -> np.ndarray:
    """Normalized reduced measure as a (K+1, K+1) array over
    ``(i, j) = (aggregated reservations, available cars)``."""
    if x < 0 or y < 0:
        raise ValueError("intensities must be >= 0")
    with np.errstate(over="ignore"):
        wts = _simple_raw(x, y, K)
        total = wts.sum()
    if np.isfinite(total) and total > 0.0:
        return wts / total
    # x^i/i! alone can overflow a double; rescale in log space
    lw = _log_simple_weights(x, y, K)
    p = np.exp(lw - lw.max())
    return p / p.sum()


def simple_no_available(x: float, y: float, K: int) -> float:
    """Reduced-family mass of ``j = 0`` (no available car)."""
    return float(simple_form(x, y, K)[:, 0].sum())


def simple_saturated(x: float, y: float, K: int) -> float:
    """Reduced-family mass of the full diagonal ``i + j = K``."""
    p = simple_form(x, y, K)
    return float(np.fliplr(p).trace())


def f_simple(x: float, y: float, a: float, K: int) -> float:
    """Fixed-point function of the reduced family.

    ``f(x, y) = (a - x) Z(x, y) - a sum_{i<=K} x^i/i!`` with ``Z`` the
    reduced normalizing constant.  For ``0 < x < a`` it is strictly
    increasing in ``y`` and crosses zero exactly once; the zero ties the
    aggregated intensity ``x`` to the acceptance probability.
    """
    return (a - x) * simple_partition(x, y, K) - a * _exp_partial(x, K)


def solve_phi(x: float, a: float, K: int, tol_factor: float = 1e-12,
              max_iter: int = 400) -> float:
    """Solve ``f_simple(x, y, a, K) = 0`` for ``y`` at fixed ``x``.

    Requires ``0 < x < a``.  Brackets by doubling (``f(x, 0) < 0`` and
    ``f`` grows like ``y^K``), then bisects until
    ``|f| <= tol_factor * a * Z(x, y)``.

    Raises
    ------
    RuntimeError
        If the tolerance is not reached within ``max_iter`` bisections.
    """
    if not 0.0 < x < a:
        raise ValueError(f"x must lie in (0, a) = (0, {a}), got {x}")
    lo = 0.0
    hi = 1.0
    while f_simple(x, hi, a, K) < 0.0:
        lo = hi
        hi *= 2.0
        if hi == math.inf:
            raise RuntimeError("failed to bracket the root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f_simple(x, mid, a, K)
        if abs(fm) <= tol_factor * a * simple_partition(x, mid, K):
            return mid
        if fm < 0.0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"no convergence after {max_iter} bisections at x={x}")


def _simple_mean(x: float, y: float, K: int, ci: float) -> float:
    """Weighted mean ``E[ci * i + j]`` under the reduced family."""
    p = simple_form(x, y, K)
    ii, jj = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    return float(((ci * ii + jj) * p).sum())


def g_mean(x: float, y: float, K: int) -> float:
    """Mean total count ``E[i + j]`` under the reduced family.

    This is the car density of the instantaneous-reservation variant;
    it increases strictly in both intensities and tends to ``K`` as
    ``y`` grows."""
    if x < 0 or y < 0:
        raise ValueError("intensities must be >= 0")
    return _simple_mean(x, y, K, 1.0)


def fill_along_curve(t: float, a: float, c: float, K: int) -> float:
    """Car density at aggregated intensity ``t`` on the fixed-point
    curve ``y = phi(t)``, with inbound/parked split weight ``c``.

    ``c = (1 + mu/nu) / (1 + 2 mu/nu)`` converts aggregated
    reservations into cars: of the three aggregated roles, inbound and
    reserved cars count, spaces reserved ahead do not.
    """
    y = solve_phi(t, a, K)
    return _simple_mean(t, y, K, c)


# ============================================================
# Fixed-point solvers
# ============================================================

class MultipleEquilibriaError(RuntimeError):
    """The fill equation admits several roots; refusing to pick one."""

    def __init__(self, roots: list[float], s: float):
        self.roots = list(roots)
        self.s = s
        super().__init__(
            f"fill target {s} is attained at {len(roots)} distinct "
            f"aggregated intensities: {roots}"
        )


@dataclass(frozen=True)
class SolveReport:
    """Outcome of the full fixed-point solve."""

    params: ModelParams
    s_target: float
    rho: RateRatios
    residuals: dict
    outer_iterations: int
    fill_evaluations: int
    monotone_ok: bool
    fallback_roots: tuple = ()

    @property
    def max_residual(self) -> float:
        return max(abs(v) for v in self.residuals.values())

    def to_dict(self) -> dict:
        return {
            "params": {
                "lam": self.params.lam,
                "mu": self.params.mu,
                "nu": self.params.nu,
                "K": self.params.K,
            },
            "s_target": self.s_target,
            "ratios": {
                "eta1": self.rho.eta1,
                "rho1": self.rho.rho1,
                "rho2": self.rho.rho2,
                "eta2": self.rho.eta2,
                "rho1_tilde": self.rho.rho1_tilde,
            },
            "residuals": dict(self.residuals),
            "max_residual": self.max_residual,
            "iterations": {
                "outer": self.outer_iterations,
                "fill_evaluations": self.fill_evaluations,
            },
            "monotone_ok": self.monotone_ok,
            "fallback_roots": list(self.fallback_roots),
        }


@dataclass(frozen=True)
class SimpleSolveReport:
    """Outcome of the instantaneous-reservation solve."""

    lam: float
    mu: float
    s_target: float
    K: int
    rho1: float
    rho2: float
    residuals: dict
    outer_iterations: int
    monotone_ok: bool

    @property
    def max_residual(self) -> float:
        return max(abs(v) for v in self.residuals.values())


def _bisect_fill(a: float, c: float, K: int, s: float, fill_tol: float,
                 max_outer: int):
    """Outer bisection of the fill equation on t in (0, a).

    The virtual endpoint values are 0 and K, so the sign bracket
    ``fill(lo) < s < fill(hi)`` is maintained without evaluating at the
    endpoints.  Returns the root, every (t, fill) evaluation made, and
    whether those evaluations were increasing in t.
    """
    evals = []

    def fill_at(t: float) -> float:
        val = fill_along_curve(t, a, c, K)
        evals.append((t, val))
        return val

    lo, hi = 0.0, a
    t_star = None
    outer = 0
    for outer in range(1, max_outer + 1):
        mid = 0.5 * (lo + hi)
        val = fill_at(mid)
        if abs(val - s) < fill_tol:
            t_star = mid
            break
        if val < s:
            lo = mid
        else:
            hi = mid
    if t_star is None:
        raise RuntimeError(f"fill bisection did not converge in {max_outer} steps")
    ordered = sorted(evals)
    slack = 1e-12 * max(1.0, float(K))
    monotone = all(b[1] >= a_[1] - slack for a_, b in zip(ordered, ordered[1:]))
    return t_star, outer, evals, monotone


def _scan_fill_roots(a: float, c: float, K: int, s: float, fill_tol: float,
                     n_grid: int = 4096) -> list[float]:
    """Grid scan + local bisection, reporting every root of
    ``fill(t) = s``.  Used when the bisection trace was not monotone."""
    ts = [a * k / (n_grid + 1) for k in range(1, n_grid + 1)]
    vals = [fill_along_curve(t, a, c, K) - s for t in ts]
    roots = []
    for (t0, v0), (t1, v1) in zip(zip(ts, vals), zip(ts[1:], vals[1:])):
        if v0 == 0.0:
            roots.append(t0)
            continue
        if v0 * v1 < 0.0:
            lo, hi = t0, t1
            vlo = v0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                vm = fill_along_curve(mid, a, c, K) - s
                if abs(vm) < fill_tol:
                    roots.append(mid)
                    break
                if (vm < 0.0) == (vlo < 0.0):
                    lo, vlo = mid, vm
                else:
                    hi = mid
            else:
                roots.append(0.5 * (lo + hi))
    if vals and vals[-1] == 0.0:
        roots.append(ts[-1])
    return roots


def solve_equilibrium(p: ModelParams, s: float, fill_tol: float = 1e-11,
                      max_outer: int = 200) -> SolveReport:
    """Solve the full fixed point at car density ``s``.

    Bisects the fill equation along the one-parameter curve of
    solutions to the acceptance equation, then reconstructs the four
    intensities and evaluates all five fixed-point residuals against
    the untruncated four-coordinate product form.

    Raises
    ------
    ValueError
        If ``s`` is outside ``(0, K)`` or ``lam`` is zero.
    MultipleEquilibriaError
        If the evaluations were not monotone and a grid scan finds more
        than one root of the fill equation.
    """
    if p.lam <= 0:
        raise ValueError("lam must be > 0 to solve the fixed point")
    if not 0.0 < s < p.K:
        raise ValueError(f"target fill must lie in (0, {p.K}), got {s}")
    r = p.mu / p.nu
    a = (p.lam / p.mu) * (1.0 + 2.0 * r)
    c = (1.0 + r) / (1.0 + 2.0 * r)

    t_star, outer, evals, monotone = _bisect_fill(a, c, p.K, s, fill_tol, max_outer)
    fallback_roots: tuple = ()
    if not monotone:
        roots = _scan_fill_roots(a, c, p.K, s, fill_tol)
        if len(roots) > 1:
            raise MultipleEquilibriaError(roots, s)
        if roots:
            t_star = roots[0]
        fallback_roots = tuple(roots)

    rho2 = solve_phi(t_star, a, p.K)
    rho1 = t_star / (1.0 + 2.0 * r)
    eta = r * rho1
    rho = RateRatios(eta, rho1, rho2, eta)

    p0v = pi_no_available(rho, p.K)
    psat = pi_saturated(rho, p.K)
    accept = 1.0 - p0v
    residuals = {
        "eta1": rho.eta1 - (p.lam / p.nu) * accept,
        "rho1": rho.rho1 - (p.lam / p.mu) * accept,
        "rho2": rho.rho2 - accept / (1.0 - psat),
        "eta2": rho.eta2 - (p.lam / p.nu) * accept,
        "fill": s - pi_mean_fill(rho, p.K),
    }
    # The rho2 balance holds identically on the curve; it is asserted,
    # never solved for.
    if abs(residuals["rho2"]) > 1e-12 * max(1.0, rho2):
        raise AssertionError(
            f"identity residual for rho2 is {residuals['rho2']!r}; "
            "the reduced and full forms disagree"
        )
    return SolveReport(
        params=p,
        s_target=s,
        rho=rho,
        residuals=residuals,
        outer_iterations=outer,
        fill_evaluations=len(evals),
        monotone_ok=monotone,
        fallback_roots=fallback_roots,
    )


def solve_simple_reservation(lam: float, mu: float, s: float, K: int,
                             fill_tol: float = 1e-11,
                             max_outer: int = 200) -> SimpleSolveReport:
    """Solve the instantaneous-reservation fixed point (the limit of
    vanishing reservation holding time).

    Same bisection scheme as :func:`solve_equilibrium` with the
    aggregated intensity equal to ``rho1`` itself and unit car weight.
    """
    if lam <= 0 or mu <= 0:
        raise ValueError("lam and mu must be > 0")
    if not 0.0 < s < K:
        raise ValueError(f"target fill must lie in (0, {K}), got {s}")
    a = lam / mu
    t_star, outer, _evals, monotone = _bisect_fill(a, 1.0, K, s, fill_tol, max_outer)
    if not monotone:
        roots = _scan_fill_roots(a, 1.0, K, s, fill_tol)
        if len(roots) > 1:
            raise MultipleEquilibriaError(roots, s)
        if roots:
            t_star = roots[0]
    rho2 = solve_phi(t_star, a, K)
    residuals = {
        "rho1": t_star - a * (1.0 - simple_no_available(t_star, rho2, K)),
        "rho2": rho2 * (1.0 - simple_saturated(t_star, rho2, K))
        - (1.0 - simple_no_available(t_star, rho2, K)),
        "fill": s - g_mean(t_star, rho2, K),
    }
    return SimpleSolveReport(
        lam=lam,
        mu=mu,
        s_target=s,
        K=K,
        rho1=t_star,
        rho2=rho2,
        residuals=residuals,
        outer_iterations=outer,
        monotone_ok=monotone,
    )
