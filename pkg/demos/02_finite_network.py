"""Event-driven simulation of a finite closed network.

Every trip is double-reserved: the user reserves a car at the origin
and a parking space at the destination in the same instant, holds both
through a pickup delay, drives, and releases the space on arrival.
Cars never enter or leave, so the fleet size is conserved exactly; a
station refuses new reservations when all its spaces are taken.

The script runs one audited trajectory and prints how the empirical
station-state distribution drifts from its initial shape.
"""

from duores import (
    ModelParams,
    SimConfig,
    empirical_measure,
    mean_fill,
    prob_no_available,
    run,
    tv_distance,
)


def main() -> None:
    p = ModelParams(lam=1.0, mu=1.0, nu=2.0, K=3)
    N, M = 200, 300  # 200 stations, 300 cars: fill 1.5 of capacity 3
    cfg = SimConfig(N=N, M=M, T=10.0,
                    sample_times=tuple(float(t) for t in range(11)),
                    seed=20260817)
    print(f"simulating N={N} stations, M={M} cars, K={p.K}, T={cfg.T}")
    print(f"rates: reservation {p.lam}, pickup {p.nu}, trip completion {p.mu}")

    traj = run(p, cfg, audit=True)  # audit rechecks invariants per event
    m0 = empirical_measure(traj[0][1], p.K)

    print("\n  t    TV from start   mean fill   P[station has no car]")
    for t, counts in traj:
        m = empirical_measure(counts, p.K)
        print(f"  {t:4.1f}     {tv_distance(m, m0):.4f}       "
              f"{mean_fill(m):.4f}          {prob_no_available(m):.4f}")

    final = traj[-1][1]
    print(f"\ncars at the end: {final[:, 1:].sum()} (placed {M})")
    print(f"fullest station occupancy: {final.sum(axis=1).max()} of {p.K}")
    print("audit mode revalidated every event; no invariant violations")


if __name__ == "__main__":
    main()
