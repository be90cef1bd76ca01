"""Coordination without communication: the lexicographic meta-strategy.

Once the test is public, each separated party can locally enumerate all
deterministic strategies, keep the optimal ones, and play its part of the
lexicographically first.  All parties land on the same strategy without
exchanging a bit, and deterministic strategies already achieve the global
maximum of any test's acceptance, so knowing the test is enough to beat it
as well as anything can.
"""

from noniid.correlations import Transcript
from noniid.hypothesis import enumerate_deterministic_max
from noniid.triangle import AttackDemoConfig, balanced_agreement_test, meta_strategy

test = balanced_agreement_test(2)
best, winners = enumerate_deterministic_max(test, 2)
print(f"test: accept iff both rounds agree and the two agree-values balance (n=2)")
print(f"deterministic maximum: {float(best)}")
print(f"optimal strategies ({len(winners)}):")
for w in winners:
    print("  ", ["".join(map(str, seq)) for seq in w.party_sequences])

strategies = [meta_strategy(test, 2) for _ in range(3)]
print("three independent executions pick:",
      ["".join(map(str, seq)) for seq in strategies[0].party_sequences])
print("bit-identical across executions:", strategies[0] == strategies[1] == strategies[2])
print()

# the same coordination against a bootstrap frequency test
ktest = AttackDemoConfig(n=6).make_test(6)
kbest, kwinners = enumerate_deterministic_max(ktest, 6)
kstrategy = meta_strategy(ktest, 6)
achieved = ktest.decision(Transcript([0] * 6, list(kstrategy.flattened_outputs())))
print(f"K-sigma agreement test at n=6: {len(kwinners)} optimal strategies out of 8^6")
print("lexicographically first:", ["".join(map(str, seq)) for seq in kstrategy.party_sequences])
print(f"achieves the enumerated maximum: {float(achieved)} = {float(kbest)}")
