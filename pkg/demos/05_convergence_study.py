"""Finite networks approach the mean-field flow as they grow.

For each network size N the study runs a batch of independent replicas
from one shared initial placement, averages their empirical
station-state distributions at fixed times, and measures the distance
to the deterministic flow started from the same point.  The distance
shrinks roughly like 1/sqrt(N); the fitted log-log slope makes that
visible.  A second pass checks pair decorrelation: the joint law of two
distinct stations approaches the product of the single-station law
with itself.
"""

from duores import ModelParams
from duores.experiments import chaos_experiment, convergence_experiment


def main() -> None:
    p = ModelParams(lam=1.0, mu=1.0, nu=2.0, K=3)
    sizes = (10, 30, 90)
    print(f"replica-averaged empirical law vs flow, sizes {sizes}")
    rep = convergence_experiment(
        p, N_list=sizes, replicas=16, T=4.0,
        sample_times=(0.0, 1.0, 2.0, 3.0, 4.0), seed0=7, s=1.5,
    )
    print("  N     TV at t=4")
    for row in rep.rows:
        print(f"  {row['N']:3d}    {row['tv_final']:.4f}")
    print(f"fitted slope: {rep.metrics['slope']:.3f} "
          f"(1/sqrt(N) scaling would be -0.5)")

    print("\npair decorrelation on the same runs")
    rep2 = chaos_experiment(
        p, N_list=sizes, replicas=16, T=4.0,
        sample_times=(0.0, 1.0, 2.0, 3.0, 4.0), seed0=7, s=1.5,
    )
    print("  N     pair TV at t=4")
    for row in rep2.rows:
        print(f"  {row['N']:3d}    {row['pair_tv_final']:.4f}")
    print(f"marginal consistency of the pair law: "
          f"{rep2.metrics['marginal_err_max']:.1e} (exact by construction)")


if __name__ == "__main__":
    main()
