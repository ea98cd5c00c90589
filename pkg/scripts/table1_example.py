#!/usr/bin/env python3
"""Walk through the two-class, four-item example: max-weight envies, round-robin does not."""

from pathlib import Path

from classmatch import Instance, audit, max_weight_mechanism, round_robin
from classmatch.core_graph import assignment_valuation

inst = Instance.load(Path(__file__).resolve().parent / "configs" / "table1.json")
print("utilities\n", inst.utilities)

for name, matching in [("max-weight", max_weight_mechanism(inst)),
                       ("round-robin", round_robin(inst)[0])]:
    print(f"\n{name}: {list(matching.pairs)}")
    for p in range(inst.num_classes):
        own = assignment_valuation(inst, p, matching.bundle(inst, p))
        others = [assignment_valuation(inst, p, matching.bundle(inst, q))
                  for q in range(inst.num_classes) if q != p]
        print(f"  class {p}: own value {own:g}, value of other bundles {others}")
    print("  verdicts:", audit(inst, matching).verdicts)

_, trace = round_robin(inst)
print("\nround-robin picks")
for pick in trace.picks:
    print(f"  round {pick.round} class {pick.class_index} takes item {pick.item} (gain {pick.gain:g})")
