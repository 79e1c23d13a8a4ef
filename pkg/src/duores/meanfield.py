"""Mean-field dynamics of the station-state distribution.

As the number of stations grows with car density held fixed, the
empirical distribution of station states follows a deterministic flow
on the probability simplex.  Five transition families drive it; writing
``pV`` for the mass of states with an available car and ``pF`` for the
mass of unsaturated states, a station in state ``(w, x, y, z)``:

1. gains a reservation for an inbound trip, ``w -> w + 1``, at rate
   ``lam * pV`` if a space is free (the trip starts wherever a car is
   available);
2. converts a reserved space into an inbound car, ``(w, x) ->
   (w - 1, x + 1)``, at rate ``nu * w``;
3. parks an inbound car, ``(x, y) -> (x - 1, y + 1)``, at rate
   ``mu * x``;
4. has an available car reserved for departure, ``(y, z) ->
   (y - 1, z + 1)``, at rate ``lam * pF`` if ``y > 0`` (the trip ends
   wherever a space is free);
5. sends a reserved car away, ``z -> z - 1``, at rate ``nu * z``.

The flow is nonlinear only through the scalars ``pV`` and ``pF``.
Integration is fixed-step classical Runge-Kutta; the step must satisfy
``dt * (lam + nu K + mu K) <= 0.5``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import (
    Measure,
    ModelParams,
    count_arrays,
    no_available_mask,
    num_states,
    occupancy_vector,
    ranks_of,
    saturated_mask,
)

__all__ = ["DriftVector", "drift", "integrate", "integrate_at",
           "stationarity_residual"]


@dataclass(frozen=True)
class DriftVector:
    """Signed time derivative of a measure; entries sum to zero.

    The zero-sum check is scaled by the total flow magnitude: at unit
    rates it is the plain 1e-12, at large rates the same relative
    accuracy is required.
    """

    entries: np.ndarray
    K: int

    def __post_init__(self) -> None:
        e = np.array(self.entries, dtype=np.float64, copy=True)
        if e.shape != (num_states(self.K),):
            raise ValueError(
                f"expected {num_states(self.K)} entries for capacity {self.K}"
            )
        tol = 1e-12 * max(1.0, float(np.abs(e).sum()))
        if abs(float(e.sum())) > tol:
            raise ValueError(f"drift entries sum to {e.sum()!r}, not 0")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.entries).max())


@dataclass(frozen=True)
class _Stencils:
    """Per-capacity transition stencils: source rank, destination rank
    and count weight for each family, plus the functional masks."""

    n: int
    avail_f: np.ndarray    # 1.0 where y > 0
    notfull_f: np.ndarray  # 1.0 where occupancy < K
    families: tuple       # five (src, dst, weight) triples


@lru_cache(maxsize=None)
def _stencils(K: int) -> _Stencils:
    w, x, y, z = count_arrays(K)
    occ = occupancy_vector(K)
    n = num_states(K)
    idx = np.arange(n)

    def fam(mask, dw, dx, dy, dz, weight):
        src = idx[mask]
        dst = ranks_of(w[mask] + dw, x[mask] + dx, y[mask] + dy, z[mask] + dz, K)
        return src, dst, np.asarray(weight[mask], dtype=np.float64)

    ones = np.ones(n)
    families = (
        fam(occ < K, +1, 0, 0, 0, ones),
        fam(w > 0, -1, +1, 0, 0, w.astype(np.float64)),
        fam(x > 0, 0, -1, +1, 0, x.astype(np.float64)),
        fam(y > 0, 0, 0, -1, +1, ones),
        fam(z > 0, 0, 0, 0, -1, z.astype(np.float64)),
    )
    avail_f = (~no_available_mask(K)).astype(np.float64)
    notfull_f = (~saturated_mask(K)).astype(np.float64)
    avail_f.setflags(write=False)
    notfull_f.setflags(write=False)
    return _Stencils(n=n, avail_f=avail_f, notfull_f=notfull_f, families=families)


def _drift_raw(v: np.ndarray, p: ModelParams, st: _Stencils) -> np.ndarray:
    """Drift of a raw vector; also accepts the slightly off-simplex
    vectors that appear inside Runge-Kutta stages."""
    p_avail = float(v @ st.avail_f)
    p_free = float(v @ st.notfull_f)
    coeffs = (p.lam * p_avail, p.nu, p.mu, p.lam * p_free, p.nu)
    out = np.zeros(st.n)
    for coeff, (src, dst, wgt) in zip(coeffs, st.families):
        flux = coeff * wgt * v[src]
        out += np.bincount(dst, weights=flux, minlength=st.n)
        out -= np.bincount(src, weights=flux, minlength=st.n)
    return out


def drift(m: Measure, p: ModelParams) -> DriftVector:
    """Instantaneous drift of ``m`` under the five transition families."""
    if m.K != p.K:
        raise ValueError(f"measure capacity {m.K} != model capacity {p.K}")
    return DriftVector(_drift_raw(m.probs, p, _stencils(p.K)), p.K)


def stationarity_residual(m: Measure, p: ModelParams) -> float:
    """Largest absolute drift entry; zero exactly at fixed points."""
    return drift(m, p).max_abs


def _check_step(p: ModelParams, dt: float) -> None:
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    guard = dt * p.rate_bound
    if guard > 0.5:
        raise ValueError(
            f"dt * (lam + nu K + mu K) = {guard:.3g} exceeds the stability "
            "bound 0.5; shrink dt"
        )


def _rk4_step(v: np.ndarray, p: ModelParams, st: _Stencils, dt: float) -> np.ndarray:
    k1 = _drift_raw(v, p, st)
    k2 = _drift_raw(v + 0.5 * dt * k1, p, st)
    k3 = _drift_raw(v + 0.5 * dt * k2, p, st)
    k4 = _drift_raw(v + dt * k3, p, st)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_NEG_TOL = -1e-12


def _as_measure(v: np.ndarray, K: int, t: float) -> Measure:
    """Validate an integrator state as a probability vector.

    Roundoff negatives above -1e-12 are clamped to zero without
    renormalizing; anything lower aborts the run.
    """
    lo = float(v.min())
    if lo < _NEG_TOL:
        raise RuntimeError(
            f"integration produced mass {lo!r} at t={t}; the step is unstable"
        )
    out = v.copy()
    np.clip(out, 0.0, None, out=out)
    return Measure(out, K)


def integrate(
    m0: Measure, p: ModelParams, T: float, dt: float
) -> list[tuple[float, Measure]]:
    """Integrate the mean-field flow from ``m0`` over ``[0, T]``.

    Classical fixed-step fourth-order Runge-Kutta on the grid
    ``{0, dt, 2 dt, ..., T}``; if ``T`` is not an integer multiple of
    ``dt`` the final step is shortened to land exactly on ``T``.  Every
    output is validated as a probability measure.
    """
    if m0.K != p.K:
        raise ValueError(f"measure capacity {m0.K} != model capacity {p.K}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    _check_step(p, dt)
    st = _stencils(p.K)
    n_full = int(np.floor(T / dt + 1e-9))
    v = m0.probs.copy()
    out = [(0.0, m0)]
    t = 0.0
    for k in range(n_full):
        v = _rk4_step(v, p, st, dt)
        t = (k + 1) * dt
        out.append((t, _as_measure(v, p.K, t)))
    if T - t > 1e-9 * max(1.0, T):
        v = _rk4_step(v, p, st, T - t)
        out.append((T, _as_measure(v, p.K, T)))
    return out


def integrate_at(
    m0: Measure, p: ModelParams, times: Sequence[float], dt_max: float
) -> list[Measure]:
    """Measures at the given increasing ``times``, starting from ``m0``
    at time 0.

    Each segment between consecutive output times is covered by equal
    steps no longer than ``dt_max``, so outputs land exactly on the
    requested instants.
    """
    if m0.K != p.K:
        raise ValueError(f"measure capacity {m0.K} != model capacity {p.K}")
    _check_step(p, dt_max)
    st = _stencils(p.K)
    prev = 0.0
    v = m0.probs.copy()
    out = []
    for t in times:
        if t < prev:
            raise ValueError("output times must be nondecreasing")
        span = t - prev
        if span > 0:
            n = max(1, int(np.ceil(span / dt_max - 1e-12)))
            h = span / n
            for _ in range(n):
                v = _rk4_step(v, p, st, h)
        out.append(_as_measure(v, p.K, t))
        prev = t
    return out
