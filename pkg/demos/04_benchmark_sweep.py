"""Benchmark the engine on the synthetic fixtures and sweep the
structural/semantic weighting simplex.

Shows the coverage-vs-budget curve on the 50-question distractor fixture,
then demonstrates that the hybrid weighting beats either pure setting on
the adversarial two-family fixture.
"""

from kgpaths import run_benchmark
from kgpaths.loop import ScriptedReasoner
from kgpaths.synthetic import adversarial_fixture, coverage_fixture

print("coverage vs candidate budget K (50 questions, 3-hop gold chains")
print("competing with 5..180 one-hop distractors):")
fx = coverage_fixture()
for k in (10, 25, 50, 100, 200):
    report = run_benchmark(fx.records, fx.graph, fx.config.with_overrides(K=k),
                           ScriptedReasoner(fx.graph), fx.embeddings)
    cov = report["overall"]["coverage"]
    print(f"  K={k:3d}  coverage={cov:.2f}  " + "#" * int(cov * 40))

print("\nweighting ablation on the adversarial fixture")
print("(structure-trap + semantics-trap query families):")
for label, (a, b, g) in [
    ("structural only", (1.0, 0.0, 0.0)),
    ("semantic only  ", (0.0, 1.0, 0.0)),
    ("hybrid default ", (0.4, 0.4, 0.2)),
]:
    fx = adversarial_fixture()
    config = fx.config.with_overrides(alpha=a, beta=b, gamma=g)
    report = run_benchmark(fx.records, fx.graph, config,
                           ScriptedReasoner(fx.graph), fx.embeddings)
    print(f"  {label} (a={a:.1f} b={b:.1f} g={g:.1f})  "
          f"coverage={report['overall']['coverage']:.2f}")

print("\nefficiency counters (hybrid run, median +/- MAD):")
for name, stats in report["efficiency"].items():
    print(f"  {name}: {stats['median']} +/- {stats['mad']}")
