"""Event-driven simulation of the closed finite network.

``N`` stations with ``K`` spaces each share ``M`` cars.  A reservation
request arrives at each station at rate ``lam`` and draws a uniform
destination (possibly the origin).  The request succeeds only if the
origin has an available car and the destination has a free space; it
then reserves both at once: origin ``y -> z``, destination ``w += 1``.
Each pending reservation is picked up at rate ``nu`` (origin ``z -= 1``,
destination ``w -> x``), and each driving car parks at rate ``mu``
(destination ``x -> y``).

Event times are exponential races simulated by inversion.  Every event
consumes exactly four uniform draws from the generator, in a fixed
order, whether or not each draw ends up used:

1. holding time,
2. event class (arrival vs pickup vs return),
3. origin station (used by arrivals only),
4. destination station, or the index into the pending-pickup or
   driving list.

Keeping the draw count fixed makes trajectories reproducible byte for
byte across refactorings of the branch logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Measure, ModelParams, num_states, ranks_of

__all__ = [
    "SimConfig",
    "SimState",
    "SimInvariantError",
    "init_uniform",
    "step",
    "run",
    "empirical_measure",
    "pair_empirical",
]


class SimInvariantError(RuntimeError):
    """A structural invariant of the simulated state was violated."""


@dataclass(frozen=True)
class SimConfig:
    """Run shape: network size, car count, horizon, snapshot times."""

    N: int
    M: int
    T: float
    sample_times: tuple
    seed: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.M < 0:
            raise ValueError(f"M must be >= 0, got {self.M}")
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        ts = tuple(float(t) for t in self.sample_times)
        if any(t < 0 or t > self.T for t in ts):
            raise ValueError("sample times must lie within [0, T]")
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be nondecreasing")
        object.__setattr__(self, "sample_times", ts)


@dataclass
class SimState:
    """Mutable network state.

    Arrays hold per-station counts; ``pickups`` lists pending
    reservations as ``(origin, destination)`` pairs and ``driving``
    lists destinations of cars on the road.  List lengths are the
    event-rate multiplicities.
    """

    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    pickups: list = field(default_factory=list)
    driving: list = field(default_factory=list)
    t: float = 0.0

    @property
    def N(self) -> int:
        return len(self.w)

    @property
    def car_total(self) -> int:
        return int(self.x.sum() + self.y.sum() + self.z.sum())

    def copy(self) -> "SimState":
        return SimState(
            self.w.copy(), self.x.copy(), self.y.copy(), self.z.copy(),
            list(self.pickups), list(self.driving), self.t,
        )

    def counts(self) -> np.ndarray:
        """Snapshot of per-station counts, shape ``(N, 4)``."""
        return np.stack([self.w, self.x, self.y, self.z], axis=1)

    def total_rate(self, p: ModelParams) -> float:
        return p.lam * self.N + p.nu * len(self.pickups) + p.mu * len(self.driving)

    def check_invariants(self, K: int, M: int, deep: bool = False) -> None:
        """Raise :class:`SimInvariantError` on any structural violation.

        The cheap checks (nonnegativity, capacity, car conservation,
        list lengths vs count sums) run after every event in audit
        mode; ``deep=True`` additionally reconciles the lists against
        the per-station counts.
        """
        arrs = (self.w, self.x, self.y, self.z)
        if min(int(a.min()) for a in arrs) < 0:
            raise SimInvariantError(f"negative count at t={self.t}")
        occ = self.w + self.x + self.y + self.z
        if int(occ.max()) > K:
            raise SimInvariantError(f"station over capacity at t={self.t}")
        if self.car_total != M:
            raise SimInvariantError(
                f"car total {self.car_total} != {M} at t={self.t}"
            )
        P = len(self.pickups)
        if P != int(self.z.sum()) or P != int(self.w.sum()):
            raise SimInvariantError(f"pending-pickup count mismatch at t={self.t}")
        if len(self.driving) != int(self.x.sum()):
            raise SimInvariantError(f"driving count mismatch at t={self.t}")
        if deep:
            N = self.N
            orig = np.bincount([i for i, _ in self.pickups], minlength=N)
            dest = np.bincount([j for _, j in self.pickups], minlength=N)
            drv = np.bincount(self.driving, minlength=N)
            if not (np.array_equal(orig, self.z) and np.array_equal(dest, self.w)
                    and np.array_equal(drv, self.x)):
                raise SimInvariantError(f"list/count reconciliation failed at t={self.t}")


def _init_with_rng(N: int, M: int, K: int, rng: np.random.Generator) -> SimState:
    if M > N * K:
        raise ValueError(f"cannot place {M} cars on {N} stations of capacity {K}")
    y = np.zeros(N, dtype=np.int64)
    eligible = list(range(N))
    for _ in range(M):
        slot = int(rng.integers(len(eligible)))
        i = eligible[slot]
        y[i] += 1
        if y[i] == K:
            eligible[slot] = eligible[-1]
            eligible.pop()
    zeros = np.zeros(N, dtype=np.int64)
    return SimState(zeros.copy(), zeros.copy(), y, zeros.copy())


def init_uniform(N: int, M: int, K: int, seed: int) -> SimState:
    """Place ``M`` available cars one at a time, uniformly among the
    stations still below capacity.  No reservations are pending."""
    return _init_with_rng(N, M, K, np.random.default_rng(seed))


def _apply(state: SimState, p: ModelParams, u: np.ndarray) -> str:
    """Apply the event selected by draws ``u[1:]`` to the current
    state.  The caller has already consumed ``u[0]`` for the holding
    time; rates here must match those at draw time, so nothing may
    change the state in between."""
    N = state.N
    P = len(state.pickups)
    D = len(state.driving)
    rate = p.lam * N + p.nu * P + p.mu * D
    r = u[1] * rate
    if r < p.lam * N:
        i = min(int(u[2] * N), N - 1)
        j = min(int(u[3] * N), N - 1)
        occ_j = int(state.w[j] + state.x[j] + state.y[j] + state.z[j])
        if state.y[i] > 0 and occ_j < p.K:
            state.y[i] -= 1
            state.z[i] += 1
            state.w[j] += 1
            state.pickups.append((i, j))
            return "arrival"
        return "blocked"
    if r < p.lam * N + p.nu * P:
        idx = min(int(u[3] * P), P - 1)
        i, j = state.pickups[idx]
        state.pickups[idx] = state.pickups[-1]
        state.pickups.pop()
        state.z[i] -= 1
        state.w[j] -= 1
        state.x[j] += 1
        state.driving.append(j)
        return "pickup"
    idx = min(int(u[3] * D), D - 1)
    j = state.driving[idx]
    state.driving[idx] = state.driving[-1]
    state.driving.pop()
    state.x[j] -= 1
    state.y[j] += 1
    return "return"


def step(state: SimState, p: ModelParams, rng: np.random.Generator):
    """Advance by one event, mutating ``state`` in place.

    Returns ``(state, holding_time, tag)`` with ``tag`` one of
    ``"arrival"``, ``"blocked"``, ``"pickup"``, ``"return"``.  Blocked
    arrivals consume time and draws but change nothing.  Requires at
    least one active transition (``total_rate > 0``).
    """
    rate = state.total_rate(p)
    if rate <= 0.0:
        raise ValueError("no active transitions: total rate is zero")
    u = rng.random(4)
    dt = -math.log1p(-u[0]) / rate
    state.t += dt
    tag = _apply(state, p, u)
    return state, dt, tag


def run(
    p: ModelParams,
    config: SimConfig,
    initial: SimState | None = None,
    audit: bool = False,
) -> list[tuple[float, np.ndarray]]:
    """Simulate on ``[0, T]`` and snapshot at the configured times.

    Returns ``(time, counts)`` pairs where ``counts`` has shape
    ``(N, 4)``.  Paths are right-continuous: a snapshot exactly at an
    event time sees the post-event state.  The generator is seeded from
    ``config.seed`` and used first for initial placement (skipped when
    ``initial`` is given), then for events.

    With ``audit=True`` every event is followed by the cheap invariant
    checks and every snapshot by the deep list reconciliation.
    """
    if config.M > config.N * p.K:
        raise ValueError(
            f"cannot place {config.M} cars on {config.N} stations of capacity {p.K}"
        )
    rng = np.random.default_rng(config.seed)
    if initial is None:
        state = _init_with_rng(config.N, config.M, p.K, rng)
    else:
        if initial.N != config.N or initial.car_total != config.M:
            raise ValueError("initial state does not match config shape")
        state = initial.copy()
        state.t = 0.0
    out: list[tuple[float, np.ndarray]] = []
    samples = list(config.sample_times)
    ptr = 0
    pending: tuple | None = None  # (event time, draws)
    while ptr < len(samples):
        if pending is None:
            rate = state.total_rate(p)
            if rate <= 0.0:
                # Frozen network: nothing can ever fire again.
                for tau in samples[ptr:]:
                    out.append((tau, state.counts()))
                    if audit:
                        state.check_invariants(p.K, config.M, deep=True)
                ptr = len(samples)
                break
            u = rng.random(4)
            pending = (state.t - math.log1p(-u[0]) / rate, u)
        if samples[ptr] < pending[0]:
            out.append((samples[ptr], state.counts()))
            if audit:
                state.check_invariants(p.K, config.M, deep=True)
            ptr += 1
            continue
        t_event, u = pending
        state.t = t_event
        _apply(state, p, u)
        if audit:
            state.check_invariants(p.K, config.M)
        pending = None
    return out


def empirical_measure(counts: np.ndarray, K: int) -> Measure:
    """Empirical station-state distribution of a snapshot."""
    counts = np.asarray(counts)
    ranks = ranks_of(counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3], K)
    N = counts.shape[0]
    return Measure(np.bincount(ranks, minlength=num_states(K)) / N, K)


def pair_empirical(counts: np.ndarray, K: int) -> np.ndarray:
    """Joint distribution of the states of an ordered station pair
    ``(i, j)``, ``i != j``, drawn uniformly.

    Returns an ``(n, n)`` array over rank pairs.  Both marginals equal
    the one-station empirical measure exactly.
    """
    counts = np.asarray(counts)
    N = counts.shape[0]
    if N < 2:
        raise ValueError("pair statistics need at least two stations")
    ranks = ranks_of(counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3], K)
    c = np.bincount(ranks, minlength=num_states(K)).astype(np.float64)
    joint = np.outer(c, c) - np.diag(c)
    return joint / (N * (N - 1))
