"""Replay the two-round self-correction scenario end to end.

Round 1 answers Boston (a spurious based_in path) below the confidence
threshold; the scripted reasoner emits a VERIFY diagnostic, the probe
refutes (Boston, host_event, 1976_Summer_Olympics), and round 2 lands on
New_York_City after a single graph update.
"""

import json

from kgpaths import SeedCandidate, run_loop
from kgpaths.loop import ScriptedReasoner
from kgpaths.synthetic import argo_fixture

fx = argo_fixture()
record = fx.records[0]
print(f"question: {record.question}")
print(f"gold answer: {sorted(record.answers)[0]}")
print(f"confidence threshold: {fx.config.conf_threshold}\n")

reasoner = ScriptedReasoner(fx.graph, conf_threshold=fx.config.conf_threshold,
                            probes=fx.probes)
seeds = [SeedCandidate(fx.graph.entity_id(e), c) for e, c in record.seeds]
result = run_loop(record.question, seeds, fx.graph, fx.config, reasoner,
                  fx.embeddings)

for i, state in enumerate(result.rounds, start=1):
    rec = state.to_record()
    print(f"round {i}: answer={rec['answer']} "
          f"confidence={rec['confidence']:.4f}")
    if rec["diagnostic"]:
        print(f"  diagnostic: {rec['diagnostic']}")
    for edit in rec["edits"]:
        print(f"  edit: {edit}")
    print("  paths injected:")
    for line in rec["selected"]:
        print(f"    {json.dumps(line)}")

print(f"\nfinal: {result.answer} (confidence {result.confidence:.4f}, "
      f"{len(result.rounds)} rounds, {result.edits_applied} graph updates)")
