"""Why no test can certify membership in a non-convex set.

The acceptance probability of any n-round test is linear in the n-round
behavior.  If a target distribution decomposes as a mixture of allowed
single-round behaviors, the test's acceptance of the iid target equals the
mixture of its acceptances on products of allowed behaviors, and so can
never exceed the best of them.  Exhibited here exactly, in rational
arithmetic, for the shared coin = 1/2 (all zeros) + 1/2 (all ones).
"""

from noniid.convexity import membership, linearity_demo
from noniid.hypothesis import FunctionTest
from noniid.triangle import SCENARIO, all_agree_point, shared_coin


def make_test(n):
    # accept iff the observed outcome counts match the coin exactly
    def decide(history):
        outs = list(history.outputs)
        return 1.0 if outs.count(0) == outs.count(7) == n // 2 and n % 2 == 0 else 0.0
    return FunctionTest(n, SCENARIO.alphabet, decide, descriptor="frequencies equal the coin")


decomposition = membership(shared_coin(exact=True),
                           [all_agree_point(0, exact=True), all_agree_point(1, exact=True)])
print("decomposition of the shared coin:",
      [str(w) for w in decomposition.weights], f"residual = {decomposition.residual}")
print()

rows = linearity_demo(make_test, shared_coin(exact=True), decomposition, n_max=4)
print(" n | accept(coin^n) | weighted component sum | max component tuple")
for row in rows:
    print(f" {row.n} | {float(row.acceptance_mixture):>14.6f} | {float(row.weighted_sum):>22.6f}"
          f" | {float(row.max_tuple_acceptance):>19.6f}")
print()
print("the first two columns agree to machine precision (exactly, in rational mode):")
print("acceptance of the mixture can never exceed the best allowed product, so a")
print("family of tests that both detects the coin and rejects all allowed behaviors")
print("cannot exist.  Only membership in the convex hull is certifiable.")
