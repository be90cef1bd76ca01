import numpy as np
import pytest

from noniid.correlations import (
    Alphabet,
    AlphabetMismatch,
    Behavior,
    BehaviorError,
    LinearWitness,
    NegativeEntry,
    NotNormalized,
    Transcript,
    evaluate_witness,
    flatten_symbols,
    frequency_estimate,
    iid_behavior,
    l1_distance,
    load_behavior,
    product_behavior,
    save_behavior,
    unflatten_symbol,
    validate_behavior,
)
from noniid.devices import clock_device, derive_rng, iid_device
from noniid.triangle import agreement_witness, all_agree_point, shared_coin

TRIANGLE = Alphabet(1, 8)


def binary(p0: float) -> Behavior:
    return Behavior(Alphabet(1, 2), np.array([[p0], [1 - p0]]))


def random_behavior(rng, A=4, X=2) -> Behavior:
    return Behavior(Alphabet(X, A), rng.dirichlet(np.ones(A), size=X).T)


class TestAlphabet:
    def test_bounds(self):
        with pytest.raises(ValueError):
            Alphabet(0, 2)
        with pytest.raises(ValueError):
            Alphabet(1, 1)

    def test_flatten_roundtrip(self):
        sizes = (2, 3, 4)
        for idx in range(24):
            assert flatten_symbols(unflatten_symbol(idx, sizes), sizes) == idx

    def test_flatten_row_major(self):
        # (a1, a2, a3) -> a1*4 + a2*2 + a3 for binary parties
        assert flatten_symbols((1, 0, 0), (2, 2, 2)) == 4
        assert flatten_symbols((0, 1, 1), (2, 2, 2)) == 3


class TestValidateBehavior:
    def test_uniform_ok(self):
        assert validate_behavior(Behavior.uniform(Alphabet(2, 2))) == []

    def test_not_normalized(self):
        bad = Behavior.__new__(Behavior)
        bad.alphabet = Alphabet(1, 2)
        bad.exact = False
        bad.probs = np.array([[0.6], [0.5]])
        reports = validate_behavior(bad)
        assert reports == [NotNormalized(0, pytest.approx(0.1))]
        with pytest.raises(BehaviorError):
            Behavior(Alphabet(1, 2), np.array([[0.6], [0.5]]))

    def test_negative_entry(self):
        bad = Behavior.__new__(Behavior)
        bad.alphabet = Alphabet(1, 2)
        bad.exact = False
        bad.probs = np.array([[-0.1], [1.1]])
        reports = validate_behavior(bad)
        assert any(isinstance(r, NegativeEntry) and (r.a, r.x) == (0, 0) for r in reports)


class TestFrequencyEstimate:
    def test_direct_counts(self):
        t = Transcript([0, 0, 1], [1, 0, 1])
        ft = frequency_estimate(t, Alphabet(2, 2))
        assert ft.estimate[1, 0] == pytest.approx(0.5)
        assert ft.estimate[1, 1] == pytest.approx(1.0)
        assert ft.undefined_inputs == frozenset()

    def test_clock_transcript(self):
        # 4 rounds of the clock give the shared-coin frequencies exactly
        dev = clock_device((0, 0, 0))
        rng = derive_rng(0)
        hist = Transcript()
        for _ in range(4):
            hist = hist.extended(0, dev.respond(0, hist, rng))
        ft = frequency_estimate(hist, TRIANGLE)
        assert ft.estimate[0, 0] == 0.5
        assert ft.estimate[7, 0] == 0.5

    def test_empty_transcript(self):
        ft = frequency_estimate(Transcript(), Alphabet(3, 2))
        assert ft.undefined_inputs == frozenset({0, 1, 2})
        assert ft.counts.sum() == 0

    def test_convergence_iid(self):
        # at n = 1e4 the estimate is within 0.1 of the truth in >= 99/100 seeds
        P = binary(0.3)
        dev = iid_device(P)
        hits = 0
        for seed in range(100):
            rng = derive_rng(seed)
            outs = dev.respond_rounds(np.arange(10**4), np.zeros(10**4, dtype=int), rng)
            ft = frequency_estimate(Transcript(np.zeros(10**4, dtype=int), outs), P.alphabet)
            hits += l1_distance(Behavior(P.alphabet, ft.estimate), P) < 0.1
        assert hits >= 99


class TestL1Distance:
    def test_identity(self):
        P = binary(0.37)
        assert l1_distance(P, P) == 0.0

    def test_disjoint_deterministic(self):
        P = Behavior.deterministic(Alphabet(1, 2), 0)
        Q = Behavior.deterministic(Alphabet(1, 2), 1)
        assert l1_distance(P, Q) == pytest.approx(2.0)

    def test_pc_vs_all_zeros(self):
        # oracle: direct sum over the 8 outcomes
        pc, p0 = shared_coin(), all_agree_point(0)
        direct = sum(abs(pc.as_float()[a, 0] - p0.as_float()[a, 0]) for a in range(8))
        assert direct == pytest.approx(1.0)
        assert l1_distance(pc, p0) == pytest.approx(direct)

    def test_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            l1_distance(binary(0.5), Behavior.uniform(Alphabet(1, 3)))

    def test_metric_properties(self):
        rng = derive_rng(7)
        for _ in range(100):
            P, Q, R = (random_behavior(rng) for _ in range(3))
            assert l1_distance(P, Q) == pytest.approx(l1_distance(Q, P), abs=1e-12)
            assert l1_distance(P, R) <= l1_distance(P, Q) + l1_distance(Q, R) + 1e-12
            assert l1_distance(P, P) <= 1e-12
        assert l1_distance(binary(0.2), binary(0.2001)) > 0


class TestWitness:
    def test_zero_functional(self):
        w = LinearWitness(TRIANGLE, np.zeros((8, 1)), 0.0, (0.0, 0.0))
        assert evaluate_witness(w, shared_coin()) == 0.0
        assert evaluate_witness(w, Behavior.uniform(TRIANGLE)) == 0.0

    def test_agreement_values(self):
        # oracles: 1/2 + 1/2 at the shared coin, 2/8 at uniform
        w = agreement_witness()
        assert evaluate_witness(w, shared_coin()) == pytest.approx(1.0)
        assert evaluate_witness(w, Behavior.uniform(TRIANGLE)) == pytest.approx(0.25)

    def test_linearity(self):
        rng = derive_rng(3)
        alph = Alphabet(2, 3)
        w = LinearWitness(alph, rng.random((3, 2)), 0.0, (0.0, 1.0))
        for _ in range(50):
            P, Q = random_behavior(rng, A=3, X=2), random_behavior(rng, A=3, X=2)
            lam = rng.random()
            mix = Behavior(alph, lam * P.probs + (1 - lam) * Q.probs)
            expected = lam * evaluate_witness(w, P) + (1 - lam) * evaluate_witness(w, Q)
            assert evaluate_witness(w, mix) == pytest.approx(expected, abs=1e-12)

    def test_score_range_brackets(self):
        with pytest.raises(ValueError):
            LinearWitness(TRIANGLE, np.full((8, 1), 2.0), 0.0, (0.0, 1.0))


class TestProductBehavior:
    def test_single_round(self):
        P = binary(0.3)
        prod = product_behavior([P])
        assert prod.n == 1
        assert np.array_equal(prod.marginal(0, Transcript()), P.probs)

    def test_clock_block(self):
        # the two-round block (P_0, P_1) gives the (000),(111) transcript probability 1
        block = product_behavior([all_agree_point(0, exact=True), all_agree_point(1, exact=True)])
        assert block.transcript_probability(Transcript([0, 0], [0, 7])) == 1
        assert block.transcript_probability(Transcript([0, 0], [7, 0])) == 0

    def test_uniform_product(self):
        P = binary(0.5)
        prod = product_behavior([P, P])
        for a1 in range(2):
            for a2 in range(2):
                assert prod.transcript_probability(Transcript([0, 0], [a1, a2])) == pytest.approx(0.25)

    def test_mismatch(self):
        with pytest.raises(AlphabetMismatch):
            product_behavior([binary(0.5), Behavior.uniform(Alphabet(1, 3))])

    def test_iid_shorthand(self):
        prod = iid_behavior(binary(0.25), 3)
        assert prod.n == 3


class TestBehaviorFiles:
    def test_roundtrip(self, tmp_path):
        rng = derive_rng(11)
        P = random_behavior(rng, A=3, X=2)
        path = tmp_path / "p.beh"
        save_behavior(P, path)
        Q = load_behavior(path)
        assert Q.alphabet == P.alphabet
        assert np.abs(Q.as_float() - P.as_float()).max() < 1e-15

    def test_reject_badly_normalized(self, tmp_path):
        path = tmp_path / "bad.beh"
        path.write_text("input_size = 1\noutput_size = 2\nprobs = [0.6, 0.5]\n")
        with pytest.raises(BehaviorError):
            load_behavior(path)

    def test_renormalizes_small_drift(self, tmp_path):
        path = tmp_path / "drift.beh"
        path.write_text(f"input_size = 1\noutput_size = 2\nprobs = [{0.5 + 2e-10}, 0.5]\n")
        P = load_behavior(path)
        assert P.as_float().sum() == pytest.approx(1.0, abs=1e-15)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "missing.beh"
        path.write_text("input_size = 1\nprobs = [0.5, 0.5]\n")
        with pytest.raises(BehaviorError):
            load_behavior(path)
