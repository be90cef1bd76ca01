import numpy as np
import pytest
from scipy import stats

from noniid.correlations import Alphabet, Behavior, Transcript, frequency_estimate, l1_distance
from noniid.devices import (
    DeterministicStrategy,
    SequenceExhausted,
    SupportTooLarge,
    TriangleLocalModel,
    clock_device,
    derive_rng,
    iid_device,
    load_strategy,
    load_triangle_model,
    save_strategy,
    save_triangle_model,
    shared_sequence_device,
    strategy_device,
    triangle_exact_distribution,
    triangle_sample,
    triangle_sample_batch,
)
from noniid.triangle import shared_coin

TRIANGLE = Alphabet(1, 8)


def run_rounds(device, n, seed=0):
    rng = derive_rng(seed)
    hist = Transcript()
    for _ in range(n):
        hist = hist.extended(0, device.respond(0, hist, rng))
    return hist


def brute_force_triangle(model: TriangleLocalModel) -> np.ndarray:
    """Independent oracle: explicit loop over sources and outputs."""
    L1, L2, L3 = model.supports
    A1, A2, A3 = model.output_sizes
    P = np.zeros((A1, A2, A3))
    for l1 in range(L1):
        for l2 in range(L2):
            for l3 in range(L3):
                w = model.p1[l1] * model.p2[l2] * model.p3[l3]
                for a1 in range(A1):
                    for a2 in range(A2):
                        for a3 in range(A3):
                            P[a1, a2, a3] += w * model.q1[l1, l3, a1] * model.q2[l1, l2, a2] * model.q3[l2, l3, a3]
    return P.reshape(-1)


class TestIIDDevice:
    def test_point_mass(self):
        dev = iid_device(Behavior.deterministic(Alphabet(2, 2), 0))
        hist = run_rounds(dev, 50)
        assert set(hist.outputs) == {0}

    def test_uniform_frequencies(self):
        dev = iid_device(Behavior.uniform(Alphabet(1, 2)))
        outs = dev.respond_rounds(np.arange(10**4), np.zeros(10**4, dtype=int), derive_rng(1))
        freq = np.bincount(outs, minlength=2) / 10**4
        assert np.abs(freq - 0.5).max() < 0.05

    def test_iid_shared_coin(self):
        dev = iid_device(shared_coin())
        outs = dev.respond_rounds(np.arange(10**4), np.zeros(10**4, dtype=int), derive_rng(2))
        ft = frequency_estimate(Transcript(np.zeros(10**4, dtype=int), outs), TRIANGLE)
        assert l1_distance(Behavior(TRIANGLE, ft.estimate), shared_coin()) < 0.05

    def test_multi_input_sampling(self):
        P = Behavior(Alphabet(2, 2), np.array([[0.9, 0.1], [0.1, 0.9]]))
        dev = iid_device(P)
        xs = np.tile([0, 1], 5000)
        outs = dev.respond_rounds(np.arange(10**4), xs, derive_rng(3))
        ft = frequency_estimate(Transcript(xs, outs), P.alphabet)
        assert np.abs(ft.estimate - P.as_float()).max() < 0.05


class TestTriangleModel:
    def test_constant_model(self):
        const = np.zeros((2, 2, 2))
        const[:, :, 0] = 1.0
        model = TriangleLocalModel(p1=[1.0, 0], p2=[1, 0.0], p3=[1, 0.0],
                                   q1=const, q2=const, q3=const)
        assert triangle_sample(model, derive_rng(0)) == (0, 0, 0)
        dist = triangle_exact_distribution(model)
        assert dist.as_float()[0, 0] == pytest.approx(1.0)

    def test_uniform_responses(self):
        half = np.full((2, 2, 2), 0.5)
        model = TriangleLocalModel(p1=[0.5, 0.5], p2=[0.5, 0.5], p3=[0.5, 0.5],
                                   q1=half, q2=half, q3=half)
        rng = derive_rng(5)
        counts = np.zeros(8, dtype=int)
        for _ in range(10**4):
            a = triangle_sample(model, rng)
            counts[a[0] * 4 + a[1] * 2 + a[2]] += 1
        assert np.abs(counts / 10**4 - 0.125).max() < 0.05

    def test_copy_parent_gives_uniform_bits(self):
        # q1 copies source 3, q2 copies source 1, q3 copies source 2
        copy_first = np.zeros((2, 2, 2))   # a = first parent
        copy_second = np.zeros((2, 2, 2))  # a = second parent
        for u in range(2):
            for v in range(2):
                copy_first[u, v, u] = 1.0
                copy_second[u, v, v] = 1.0
        model = TriangleLocalModel(p1=[0.5, 0.5], p2=[0.5, 0.5], p3=[0.5, 0.5],
                                   q1=copy_second, q2=copy_first, q3=copy_first)
        dist = triangle_exact_distribution(model).as_float()[:, 0]
        oracle = brute_force_triangle(model)
        assert np.abs(dist - oracle).max() < 1e-14
        assert np.abs(dist - 0.125).max() < 1e-12

    def test_exact_matches_brute_force_and_sampler(self):
        rng = derive_rng(6)
        model = TriangleLocalModel.random(rng)
        dist = triangle_exact_distribution(model).as_float()[:, 0]
        assert np.abs(dist - brute_force_triangle(model)).max() < 1e-12
        counts = np.zeros(8, dtype=int)
        for _ in range(10**4):
            a = triangle_sample(model, rng)
            counts[a[0] * 4 + a[1] * 2 + a[2]] += 1
        assert np.abs(counts / 10**4 - dist).max() < 0.05

    def test_normalized(self):
        for seed in range(5):
            model = TriangleLocalModel.random(derive_rng(seed))
            assert abs(triangle_exact_distribution(model).as_float().sum() - 1) < 1e-12

    def test_support_too_large(self):
        n = 300
        uni = np.full((n, n, 2), 0.5)
        model = TriangleLocalModel(p1=np.full(n, 1 / n), p2=np.full(n, 1 / n), p3=np.full(n, 1 / n),
                                   q1=uni, q2=uni, q3=uni)
        with pytest.raises(SupportTooLarge):
            triangle_exact_distribution(model)

    def test_chi_square_fit(self):
        # sampler vs exact distribution on 20 random models, alpha = 0.01
        n = 10**5
        for seed in range(20):
            model = TriangleLocalModel.random(derive_rng(100 + seed))
            expected = triangle_exact_distribution(model).as_float()[:, 0] * n
            draws = triangle_sample_batch(model, n, derive_rng(300 + seed))
            observed = np.bincount(draws @ np.array([4, 2, 1]), minlength=8)
            # pool cells whose expected count is tiny
            keep = expected >= 10
            obs = np.append(observed[keep], observed[~keep].sum())
            exp = np.append(expected[keep], expected[~keep].sum())
            obs, exp = obs[exp > 0], exp[exp > 0]
            _, pvalue = stats.chisquare(obs, exp * obs.sum() / exp.sum())
            assert pvalue > 0.01, f"model seed {seed}: p={pvalue}"

    def test_file_roundtrip(self, tmp_path):
        model = TriangleLocalModel.random(derive_rng(9))
        path = tmp_path / "model.toml"
        save_triangle_model(model, path)
        loaded = load_triangle_model(path)
        for name in ("p1", "p2", "p3", "q1", "q2", "q3"):
            assert np.abs(getattr(loaded, name) - getattr(model, name)).max() < 1e-15


class TestClockDevice:
    def test_rounds(self):
        hist = run_rounds(clock_device((0, 0, 0)), 4)
        assert hist.outputs == (0, 7, 0, 7)

    def test_equal_offsets_exact_frequencies(self):
        hist = run_rounds(clock_device((1, 1, 1)), 1000)
        ft = frequency_estimate(hist, TRIANGLE)
        assert ft.counts[0, 0] == 500 and ft.counts[7, 0] == 500
        assert ft.counts.sum() == 1000

    def test_desynchronized(self):
        hist = run_rounds(clock_device((1, 0, 0)), 100)
        ft = frequency_estimate(hist, TRIANGLE)
        # (1,0,0) flattens to 4, (0,1,1) to 3
        assert ft.counts[4, 0] == 50 and ft.counts[3, 0] == 50


class TestSharedSequence:
    def test_balanced_bits_give_coin(self):
        hist = run_rounds(shared_sequence_device([0, 1, 0, 1]), 4)
        ft = frequency_estimate(hist, TRIANGLE)
        assert ft.counts[0, 0] == 2 and ft.counts[7, 0] == 2

    def test_all_zeros(self):
        hist = run_rounds(shared_sequence_device([0, 0, 0]), 3)
        assert set(hist.outputs) == {0}

    def test_random_sequence_concentrates(self):
        hits = 0
        for seed in range(100):
            bits = derive_rng(seed).integers(0, 2, size=10**4)
            dev = shared_sequence_device(bits)
            outs = dev.respond_rounds(np.arange(10**4), np.zeros(10**4, dtype=int), derive_rng(0))
            ft = frequency_estimate(Transcript(np.zeros(10**4, dtype=int), outs), TRIANGLE)
            hits += l1_distance(Behavior(TRIANGLE, ft.estimate), shared_coin()) < 0.05
        assert hits >= 99

    def test_exhaustion(self):
        dev = shared_sequence_device([0, 1])
        with pytest.raises(SequenceExhausted):
            run_rounds(dev, 3)


class TestStrategyDevice:
    def test_matches_clock(self):
        n = 6
        strat = DeterministicStrategy(tuple(tuple((o + k) % 2 for k in range(n)) for o in (0, 0, 0)))
        s_hist = run_rounds(strategy_device(strat), n)
        c_hist = run_rounds(clock_device((0, 0, 0)), n)
        assert s_hist.outputs == c_hist.outputs

    def test_all_zeros_point_mass(self):
        strat = DeterministicStrategy(((0, 0), (0, 0), (0, 0)))
        ft = frequency_estimate(run_rounds(strategy_device(strat), 2), TRIANGLE)
        assert ft.estimate[0, 0] == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            DeterministicStrategy(((0, 1), (0,), (0, 1)))
        with pytest.raises(ValueError):
            DeterministicStrategy(((0, 2), (0, 0), (0, 0)))

    def test_lexicographic_key(self):
        a = DeterministicStrategy(((0, 1), (0, 0), (0, 0)))
        b = DeterministicStrategy(((1, 0), (0, 0), (0, 0)))
        assert a.key() < b.key()

    def test_file_roundtrip(self, tmp_path):
        strat = DeterministicStrategy(((0, 1, 1), (1, 0, 1), (0, 0, 0)))
        path = tmp_path / "strategy.toml"
        save_strategy(strat, path)
        assert load_strategy(path) == strat

    def test_acceptance_collapses_to_one_transcript(self):
        # for a fixed strategy the full acceptance sum has a single term
        from noniid.hypothesis import exact_acceptance, monte_carlo_acceptance
        from noniid.correlations import Behavior, product_behavior
        from noniid.triangle import balanced_agreement_test

        strat = DeterministicStrategy(((0, 1), (0, 1), (0, 1)))
        test = balanced_agreement_test(2)
        single = test.decision(run_rounds(strategy_device(strat), 2))
        as_product = product_behavior(
            [Behavior.deterministic(TRIANGLE, int(a)) for a in strat.flattened_outputs()])
        assert exact_acceptance(test, as_product) == pytest.approx(float(single))
        mc = monte_carlo_acceptance(test, strategy_device(strat), trials=20, master_seed=0)
        assert mc.accept_rate == float(single)


class TestReproducibility:
    @pytest.mark.parametrize("make", [
        lambda: iid_device(shared_coin()),
        lambda: clock_device((0, 1, 0)),
        lambda: shared_sequence_device([0, 1, 1, 0, 1]),
        lambda: strategy_device(DeterministicStrategy(((0, 1, 0, 1, 1),) * 3)),
    ])
    def test_same_seed_same_transcript(self, make):
        h1 = run_rounds(make(), 5, seed=42)
        h2 = run_rounds(make(), 5, seed=42)
        assert h1 == h2

    def test_vector_path_reproducible(self):
        dev = iid_device(shared_coin())
        a = dev.respond_rounds(np.arange(100), np.zeros(100, dtype=int), derive_rng(13))
        b = dev.respond_rounds(np.arange(100), np.zeros(100, dtype=int), derive_rng(13))
        assert np.array_equal(a, b)
