"""Tuning the pseudocount to hit a target before synthesizing.

Two a-priori targets are supported for every family:

* match-zeros: pick alpha* so the synthetic data are expected to have
  exactly the original proportion of zeros (closed form);
* tau4-equals: pick alpha* so the expected share of synthetic uniques
  that are true uniques equals a chosen p (bisection).

Run:  python demos/03_tuning_alpha.py
"""

from satsynth import (
    CountModelSpec,
    SynthesisJob,
    alpha_star_match_zeros,
    esc_like_spec,
    generate_table,
    scaled_spec,
    solve_alpha_for_tau4_target,
    synthesize,
    tau1_expected,
    tau4_expected,
    tau2_of_table,
    tau_empirical,
)

table = generate_table(scaled_spec(esc_like_spec(), 300_000), seed=31)
dist = tau2_of_table(table)
print(f"tau2(0) = {dist.proportion(0):.5f} (proportion of random zeros)")

print("\nmatch-zeros alpha* per family at sigma* = 1:")
for family in ("poisson", "nbi", "pig"):
    sigma = 0.0 if family == "poisson" else 1.0
    alpha = alpha_star_match_zeros(dist, family, sigma)
    achieved = tau1_expected(dist, family, sigma, alpha, 0)
    print(f"  {family:8s} alpha* = {alpha:.6f}   expected tau1(0) = {achieved:.5f}")

# confirm empirically for the NBI
alpha = alpha_star_match_zeros(dist, "nbi", 1.0)
syn = synthesize(table, SynthesisJob(CountModelSpec("nbi", 1.0, alpha), master_seed=7))[0]
emp = tau_empirical(table, syn, k_report=0)
print(f"\none NBI synthesis at alpha*: empirical tau1(0) = {emp.tau1[0]:.5f} "
      f"vs tau2(0) = {dist.proportion(0):.5f}")

print("\ntau4-equals: dial the uniqueness risk down to a chosen level")
baseline = tau4_expected(dist, "poisson", 0.0, 0.0, 1)
print(f"  Poisson, alpha=0: tau4(1) = {baseline:.4f} (the achievable maximum)")
for p in (0.6, 0.5, 0.4):
    res = solve_alpha_for_tau4_target(dist, "poisson", 0.0, p)
    print(f"  target tau4(1) = {p:.2f}: alpha* = {res.alpha_star:.6f} "
          f"(residual {res.residual:+.1e}, {res.iterations} evaluations)")
