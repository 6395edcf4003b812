"""Player intercepts and season totals on synthetic shots.

One player finishes far above the shot-quality baseline and one far below.
Summing per-shot xG over a season, the player-adjusted totals land closer
to the goals actually scored.
"""

from bayesxg.analysis import fit_bayes, fit_frequentist, select_players, totals_report
from bayesxg.bayes.fit import SamplerConfig
from bayesxg.bayes.model import ModelSpec
from bayesxg.synth import REALISTIC_BETA, TruthConfig, generate_shots

offsets = {"Finisher": 1.0, "Wasteful": -1.0, **{f"squad_{i}": 0.0 for i in range(8)}}
rows, _ = generate_shots(TruthConfig(beta=REALISTIC_BETA, group_offsets=offsets, grouping="player", n=5000, seed=5, realistic=True))

print("conversion (at least 50 shots)")
for player, shots, goals, rate in select_players(rows).render()[:4]:
    print(f"  {player:<10} {shots:>4} {goals:>4} {rate:>7}")

spec = ModelSpec(predictors="baseline", grouping="player", players=("Finisher", "Wasteful", "squad_0"))
samples, adjusted = fit_bayes(rows, spec, SamplerConfig(chains=2, draws=600, warmup=200, seed=0))
_, baseline = fit_frequentist(rows, "baseline")

print(f"\n{'player':<10} {'shots':>5} {'goals':>5} {'baseline':>9} {'adjusted':>9}  closer")
for t in totals_report(samples, rows, baseline, list(spec.players), adjusted_pred=adjusted):
    print(f"{t.player:<10} {t.shots:>5} {t.goals:>5} {t.baseline_xg:9.1f} {t.adjusted_xg:9.1f}  {t.closer}")
