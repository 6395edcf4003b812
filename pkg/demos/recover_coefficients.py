"""Fit logistic models on synthetic shots and compare with the truth.

Run with ``python3 demos/recover_coefficients.py``.
"""

import numpy as np

from bayesxg.analysis import feature_sweep
from bayesxg.features import build_design_matrix, outcomes
from bayesxg.glm import fit_logistic
from bayesxg.synth import REALISTIC_BETA, TruthConfig, generate_shots

rows, p_true = generate_shots(TruthConfig(beta=REALISTIC_BETA, n=20_000, seed=1, realistic=True))
y = outcomes(rows)
print(f"{len(rows)} shots, goal rate {y.mean():.3f}, mean true xG {p_true.mean():.3f}")

# the fit runs on standardised columns; raw_scale() maps back for comparison
design = build_design_matrix(rows, "baseline")
fit = fit_logistic(design, y)
print(f"\nbaseline fit, {fit.iterations} IRLS iterations")
for name, est in fit.raw_scale().items():
    print(f"  {name:<28} {est:+.4f}   truth {REALISTIC_BETA.get(name, 0.0):+.4f}")
print("  (the intercept soaks up the omitted blocks, so only the slopes line up)")

full = fit_logistic(build_design_matrix(rows, "extended", drop_constant=True), y)
raw = full.raw_scale()
worst = max(raw, key=lambda c: abs(raw[c] - REALISTIC_BETA.get(c, 0.0)))
print(f"\nextended fit, {len(raw)} coefficients")
print(f"  intercept {raw['intercept']:+.4f}   truth {REALISTIC_BETA.get('intercept', 0.0):+.4f}")
errs = [abs(raw[c] - REALISTIC_BETA.get(c, 0.0)) for c in raw]
print(f"  median absolute error {np.median(errs):.3f}")
# rare count levels have only a handful of shots and few goals
print(f"  largest miss: {worst} {raw[worst]:+.4f} vs {REALISTIC_BETA.get(worst, 0.0):+.4f}")

# distance and angle alone miss most of what the freeze frame carries
print("\nadding predictor blocks one at a time (reference = true probability)")
print(f"  {'k':>2}  {'block':<26} {'brier':>7} {'r2':>7}")
for k, block, report in feature_sweep(rows):
    print(f"  {k:>2}  {block:<26} {report.brier:7.4f} {report.r2:7.3f}")

print(f"\nbrier of the true probabilities: {np.mean((p_true - y) ** 2):.4f}")
