"""
Convergence rates at desk scale
===============================

A Monte Carlo run of the two-stage estimator over a grid of sample sizes,
with the threshold and Lepski constants taken from a pure-noise pilot.
The fitted log-log slope is compared with the minimax exponent.
"""
from dataclasses import replace

from irregwave import EstimatorConfig, Scenario, power_density, run_monte_carlo
from irregwave.bench import calibrate, get_function

sc = Scenario(
    get_function("trig"),
    power_density(0.5, 1.0),
    N=1,
    n_grid=(1024, 2048, 4096, 8192),
    R=10,
    seed=0,
)

# %%
# The pilot simulates pure noise (f = 0) with the scenario's design, so it
# never sees the target.  It returns quantiles of the largest normalized
# noise coefficient (for d) and of the Lepski ratio at m1 (for lambda).
d, lam = calibrate(sc, R=10, seed=1)
print(f"pilot constants: d = {d:.3f}, lambda = {lam:.3f}")
sc = replace(sc, cfg=EstimatorConfig(d=d, lam=lam, constants="calibrated"))

report = run_monte_carlo(sc)
for n, r, se, mh in zip(report.n_grid, report.mean_risk, report.stderr, report.m_hat):
    print(f"n={n:6d}  risk={r:.4f} +- {se:.4f}  levels chosen: {sorted(set(mh))}")
print(f"slope {report.slope:.3f}, minimax exponent {report.theory:.3f}, within 0.15: {report.passed}")
