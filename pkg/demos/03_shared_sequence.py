"""Pre-shared randomness: a deterministic strategy no n-round test can catch.

If the three parties agree on an n-bit random string before the experiment
and each just replays it, the transcript has exactly the same distribution
as n iid uses of the shared coin.  No test whatsoever can tell them apart;
the only cost is the prior communication needed to share the string.
"""

import numpy as np

from noniid.correlations import Behavior, Transcript, frequency_estimate, l1_distance
from noniid.devices import derive_rng, iid_device, shared_sequence_device
from noniid.hypothesis import ksigma_frequency_test, monte_carlo_acceptance
from noniid.triangle import SCENARIO, agreement_witness, shared_coin

n, trials = 1000, 400
test = ksigma_frequency_test(agreement_witness(0.9), alpha=0.9, K=3.0, n=n)

# one fixed pre-shared string, replayed identically by all three parties
bits = derive_rng(99).integers(0, 2, size=n)
replay = shared_sequence_device(bits)
outs = replay.respond_rounds(np.arange(n), np.zeros(n, dtype=int), derive_rng(0))
ft = frequency_estimate(Transcript(np.zeros(n, dtype=int), outs), SCENARIO.alphabet)
dist = l1_distance(Behavior(SCENARIO.alphabet, ft.estimate), shared_coin())
print(f"one pre-shared string: l1 distance of frequencies from the coin = {dist:.4f}")

# over fresh strings per trial the acceptance matches the genuine iid coin
fresh_accept = []
for name, device in (("iid shared coin", iid_device(shared_coin())),):
    report = monte_carlo_acceptance(test, device, trials=trials, master_seed=1)
    fresh_accept.append(report.accept_rate)
    print(f"{name:>18}: accept rate {report.accept_rate:.3f}")

from noniid.triangle import FreshSharedSequenceDevice

report = monte_carlo_acceptance(test, FreshSharedSequenceDevice(), trials=trials, master_seed=1)
print(f"{'pre-shared string':>18}: accept rate {report.accept_rate:.3f}")
print()
print(f"difference: {abs(report.accept_rate - fresh_accept[0]):.3f} (the two are the same distribution)")
