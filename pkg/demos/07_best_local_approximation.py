"""How close can fresh-sources triangle models get to the shared coin?

Three parties each read two of three independent sources.  Searching over
source distributions and response tables (block-coordinate multiplicative
updates, random restarts) recovers exactly representable targets to machine
precision but stalls far from the shared coin: perfect three-way agreement
with uniform marginals needs correlations the network cannot produce in any
single round.  The achieved distance is a heuristic upper bound on how well
the network can do, not a certified minimum.
"""

from noniid.correlations import Behavior
from noniid.devices import TriangleLocalModel, derive_rng, triangle_exact_distribution
from noniid.triangle import SCENARIO, best_local_approx, shared_coin

# an exactly representable target: recovered essentially perfectly
target = triangle_exact_distribution(TriangleLocalModel.random(derive_rng(42)))
model, value = best_local_approx(target, "distance", restarts=10, iters=400, seed=0)
print(f"random local target : achieved l1 distance {value:.2e}")

uniform = Behavior.uniform(SCENARIO.alphabet)
model, value = best_local_approx(uniform, "distance", restarts=10, iters=400, seed=0)
print(f"uniform target      : achieved l1 distance {value:.2e}")

model, value = best_local_approx(shared_coin(), "distance", restarts=30, iters=500, seed=0)
dist = triangle_exact_distribution(model).as_float()[:, 0]
print(f"shared-coin target  : achieved l1 distance {value:.4f} (heuristic)")
print("  best model's distribution over (a1,a2,a3):")
for idx in range(8):
    if dist[idx] > 1e-4:
        print(f"    {SCENARIO.unflatten(idx)}: {dist[idx]:.4f}")
print()
print("an exhaustive sweep over deterministic binary-source models gives 0.75,")
print("matching where the heuristic lands; the coin stays out of reach.")
