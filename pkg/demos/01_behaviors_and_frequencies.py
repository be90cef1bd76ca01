"""Single-round behaviors, transcripts and frequency estimation.

A behavior P(a|x) is the one-round description of a black-box device.  An
experimenter who assumes iid rounds estimates it from observed frequencies;
this script samples a known behavior and watches the estimate converge.
"""

import numpy as np

from noniid.correlations import Alphabet, Behavior, Transcript, frequency_estimate, l1_distance
from noniid.devices import derive_rng, iid_device

alphabet = Alphabet(input_size=2, output_size=3)
rng = derive_rng(2024)
P = Behavior(alphabet, rng.dirichlet(np.ones(3), size=2).T)
print("true behavior P(a|x):")
print(np.round(P.as_float(), 4))

device = iid_device(P)
for n in (100, 1000, 10_000, 100_000):
    xs = derive_rng(1, n).integers(0, 2, size=n)
    outs = device.respond_rounds(np.arange(n), xs, derive_rng(2, n))
    estimate = frequency_estimate(Transcript(xs, outs), alphabet)
    dist = l1_distance(Behavior(alphabet, estimate.estimate), P)
    print(f"n = {n:>7}: worst-input l1 error of the frequency estimate = {dist:.4f}")

print()
print("the estimate converges because this device really is iid;")
print("every other script in this directory is about what happens when it is not.")
