"""Command-line orchestration: configs, seeded runs, reports and traces.

Configs are TOML with three tables: ``[scenario]`` picks the device,
``[test]`` the hypothesis test, ``[run]`` the round/trial counts and seed.
Unknown keys are rejected.  Reports are JSON with a fixed field order so
reruns diff cleanly; given the same config and seed every numeric output is
identical (only ``wall_time_s`` moves).

Exit codes: 0 success, 2 configuration error, 3 state-space overflow.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .correlations import (
    Behavior,
    BehaviorError,
    LinearWitness,
    iid_behavior,
    load_behavior,
    product_behavior,
)
from .devices import (
    ClockDevice,
    SharedSequenceDevice,
    derive_rng,
    iid_device,
    load_strategy,
    load_triangle_model,
    save_triangle_model,
    strategy_device,
    triangle_exact_distribution,
)
from .hypothesis import (
    SearchSpaceTooLarge,
    StateSpaceTooLarge,
    enumerate_deterministic_max,
    exact_acceptance,
    ksigma_frequency_test,
    martingale_witness_test,
    run_trial,
    wilson_interval,
)
from .convexity import ConvexDecomposition, membership, separating_functional
from .selftest import exposedness_scan, load_density, random_density
from .triangle import (
    SCENARIO,
    AttackDemoConfig,
    agreement_witness,
    all_agree_point,
    attack_demo,
    best_local_approx,
    closeness_score,
    meta_strategy,
    shared_coin,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _toml():
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib


# -- config schema -------------------------------------------------------------

_SCHEMA = {
    "scenario": {
        "kind": str,
        "target": str,          # "pc" | "uniform" | "all_zeros" | "all_ones"
        "behavior": str,        # behavior file for iid/custom
        "offsets": list,        # clock
        "bits": str,            # shared_sequence fixed bits
        "model": str,           # triangle_local model file
        "strategy": str,        # strategy replay file
    },
    "test": {
        "kind": str,            # "ksigma" | "martingale"
        "witness": str,         # "agreement" | "closeness"
        "coeffs": list,         # explicit witness coefficients, flat x*A+a
        "input_weights": list,
        "alpha": (int, float),
        "K": (int, float),
        "epsilon": (int, float),
        "score_min": (int, float),
        "score_max": (int, float),
        "bootstrap_resamples": int,
        "bootstrap_seed": int,
    },
    "run": {
        "n": int,
        "trials": int,
        "seed": int,
        "trace_trials": int,
        "communication_regime": str,   # label only: "unlimited" | "bounded" | "banned"
    },
}

_DEFAULTS = {"n": 1000, "trials": 1000, "seed": 0, "trace_trials": 10}

_SCENARIO_KINDS = ("iid", "clock", "shared_sequence", "meta", "triangle_local", "strategy", "custom")
_TEST_KINDS = ("ksigma", "martingale")


def validate_config(doc: dict) -> list[str]:
    """Full schema check; returns the list of problems (empty when valid)."""
    errors = []
    for section, table in doc.items():
        if section not in _SCHEMA:
            errors.append(f"unknown section `{section}`")
            continue
        if not isinstance(table, dict):
            errors.append(f"section `{section}` must be a table")
            continue
        for key, value in table.items():
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key `{section}.{key}`")
            elif not isinstance(value, _SCHEMA[section][key]):
                errors.append(f"key `{section}.{key}` has the wrong type")
    scenario = doc.get("scenario", {})
    test = doc.get("test", {})
    run = doc.get("run", {})
    if not isinstance(scenario, dict) or "kind" not in scenario:
        errors.append("missing `scenario.kind`")
    elif scenario["kind"] not in _SCENARIO_KINDS:
        errors.append(f"`scenario.kind` must be one of {_SCENARIO_KINDS}")
    else:
        kind = scenario["kind"]
        if kind in ("iid", "custom") and not ("target" in scenario or "behavior" in scenario):
            errors.append(f"scenario kind `{kind}` needs `target` or `behavior`")
        if kind == "triangle_local" and "model" not in scenario:
            errors.append("scenario kind `triangle_local` needs `model`")
        if kind == "strategy" and "strategy" not in scenario:
            errors.append("scenario kind `strategy` needs `strategy`")
    if not isinstance(test, dict) or "kind" not in test:
        errors.append("missing `test.kind`")
    elif test["kind"] not in _TEST_KINDS:
        errors.append(f"`test.kind` must be one of {_TEST_KINDS}")
    else:
        if test["kind"] == "ksigma" and "alpha" not in test:
            errors.append("ksigma test needs `alpha`")
        if test["kind"] == "martingale":
            for key in ("alpha", "epsilon"):
                if key not in test:
                    errors.append(f"martingale test needs `{key}`")
        if "witness" in test and test["witness"] not in ("agreement", "closeness"):
            errors.append("`test.witness` must be 'agreement' or 'closeness'")
        if "witness" not in test and "coeffs" not in test:
            errors.append("test needs `witness` or `coeffs`")
    if isinstance(run, dict):
        if run.get("n", _DEFAULTS["n"]) < 1:
            errors.append("`run.n` must be >= 1")
        if run.get("trials", _DEFAULTS["trials"]) < 1:
            errors.append("`run.trials` must be >= 1")
        if run.get("trace_trials", 1) < 0:
            errors.append("`run.trace_trials` must be >= 0")
    return errors


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = _toml().load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except Exception as exc:  # tomllib.TOMLDecodeError
        raise ConfigError(f"cannot parse config: {exc}")
    errors = validate_config(doc)
    if errors:
        raise ConfigError("; ".join(errors))
    return doc


def _run_params(doc: dict, args) -> dict:
    run = dict(_DEFAULTS)
    run.update(doc.get("run", {}))
    if getattr(args, "seed", None) is not None:
        run["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        run["trials"] = args.trials
    return run


def _resolve_target(name: str) -> Behavior:
    table = {
        "pc": shared_coin,
        "shared-coin": shared_coin,
        "uniform": lambda: Behavior.uniform(SCENARIO.alphabet),
        "all_zeros": lambda: all_agree_point(0),
        "all_ones": lambda: all_agree_point(1),
    }
    if name not in table:
        raise ConfigError(f"unknown built-in target `{name}`")
    return table[name]()


def build_device(doc: dict, test):
    scenario = doc["scenario"]
    kind = scenario["kind"]
    n = dict(_DEFAULTS, **doc.get("run", {}))["n"]
    if kind in ("iid", "custom"):
        beh = load_behavior(scenario["behavior"]) if "behavior" in scenario else _resolve_target(scenario["target"])
        return iid_device(beh)
    if kind == "clock":
        return ClockDevice(tuple(scenario.get("offsets", (0, 0, 0))))
    if kind == "shared_sequence":
        if "bits" in scenario:
            return SharedSequenceDevice(tuple(int(c) for c in scenario["bits"]))
        from .triangle import FreshSharedSequenceDevice
        return FreshSharedSequenceDevice()
    if kind == "triangle_local":
        return iid_device(triangle_exact_distribution(load_triangle_model(scenario["model"])))
    if kind == "strategy":
        return strategy_device(load_strategy(scenario["strategy"]))
    if kind == "meta":
        return strategy_device(meta_strategy(test, n))
    raise ConfigError(f"unsupported scenario kind `{kind}`")


def build_behavior(doc: dict, test=None):
    """n-round behavior for the exact engine (memoryless scenarios only)."""
    scenario = doc["scenario"]
    kind = scenario["kind"]
    n = dict(_DEFAULTS, **doc.get("run", {}))["n"]
    if kind == "meta":
        if test is None:
            raise ConfigError("the meta scenario needs the test to derive its strategy")
        strat = meta_strategy(test, n)
        return product_behavior([Behavior.deterministic(SCENARIO.alphabet, int(a))
                                 for a in strat.flattened_outputs()])
    if kind in ("iid", "custom"):
        beh = load_behavior(scenario["behavior"]) if "behavior" in scenario else _resolve_target(scenario["target"])
        return iid_behavior(beh, n)
    if kind == "clock":
        offsets = tuple(scenario.get("offsets", (0, 0, 0)))
        rounds = [all_agree_point(0), all_agree_point(1)]
        per_round = []
        for k in range(n):
            bits = [o ^ (k % 2) for o in offsets]
            if len(set(bits)) == 1:
                per_round.append(rounds[bits[0]])
            else:
                per_round.append(Behavior.deterministic(SCENARIO.alphabet, SCENARIO.flatten(bits)))
        return product_behavior(per_round)
    if kind == "shared_sequence":
        if "bits" in scenario:
            bits = [int(c) for c in scenario["bits"]]
            if len(bits) < n:
                raise ConfigError("shared sequence shorter than run.n")
            return product_behavior([all_agree_point(b) for b in bits[:n]])
        return iid_behavior(shared_coin(), n)  # fresh uniform bits: exactly the shared coin, iid
    if kind == "triangle_local":
        return iid_behavior(triangle_exact_distribution(load_triangle_model(scenario["model"])), n)
    if kind == "strategy":
        strat = load_strategy(scenario["strategy"])
        outs = strat.flattened_outputs()
        if len(outs) < n:
            raise ConfigError("strategy shorter than run.n")
        return product_behavior([Behavior.deterministic(SCENARIO.alphabet, int(a)) for a in outs[:n]])
    raise ConfigError(f"scenario kind `{kind}` has no exact behavior form")


def build_test(doc: dict, n: int):
    test_doc = doc["test"]
    kind = test_doc["kind"]
    alphabet = SCENARIO.alphabet

    witness = None
    if "coeffs" in test_doc:
        coeffs = np.asarray(test_doc["coeffs"], dtype=float)
        A, X = alphabet.output_size, alphabet.input_size
        if coeffs.size != A * X:
            raise ConfigError(f"`test.coeffs` must hold {A * X} reals")
        coeffs = coeffs.reshape(X, A).T
        weights = np.asarray(test_doc.get("input_weights", [1.0 / X] * X), dtype=float)
        lo = float(test_doc.get("score_min", coeffs.min()))
        hi = float(test_doc.get("score_max", coeffs.max()))
        witness = LinearWitness(alphabet, coeffs, float(test_doc.get("alpha", 0.0)), (lo, hi), weights)
    elif test_doc.get("witness") == "agreement":
        witness = agreement_witness(float(test_doc.get("alpha", 0.9)))

    if kind == "ksigma":
        alpha = float(test_doc["alpha"])
        K = float(test_doc.get("K", 3.0))
        kwargs = {}
        if "bootstrap_resamples" in test_doc:
            kwargs["bootstrap_resamples"] = test_doc["bootstrap_resamples"]
        if "bootstrap_seed" in test_doc:
            kwargs["bootstrap_seed"] = test_doc["bootstrap_seed"]
        if test_doc.get("witness") == "closeness":
            return ksigma_frequency_test(closeness_score(shared_coin()), alpha, K, n=n,
                                         alphabet=alphabet, **kwargs)
        return ksigma_frequency_test(witness, alpha, K, n=n, **kwargs)
    if kind == "martingale":
        if witness is None:
            raise ConfigError("martingale tests need a linear witness (`coeffs` or witness='agreement')")
        return martingale_witness_test(witness, float(test_doc["epsilon"]), n=n)
    raise ConfigError(f"unsupported test kind `{kind}`")


# -- simulate -------------------------------------------------------------------


def _simulate_chunk(config_doc: dict, n: int, lo: int, hi: int, seed: int):
    """Worker: trials [lo, hi) of the configured run; rebuilt from the config."""
    test = build_test(config_doc, n)
    device = build_device(config_doc, test)
    accepted = 0
    stats = []
    for t in range(lo, hi):
        rng = derive_rng(seed, t)
        transcript = run_trial(test, device, n, rng)
        p = float(test.decision(transcript))
        ok = p >= 1.0 or (p > 0.0 and rng.random() < p)
        accepted += ok
        s = test.statistic(transcript)
        stats.append(float("nan") if s is None else float(s))
    return accepted, stats


def _write_trace(path, config_doc, n, seed, trace_trials):
    test = build_test(config_doc, n)
    device = build_device(config_doc, test)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "round", "x", "a", "statistic", "pvalue"])
        for t in range(trace_trials):
            transcript = run_trial(test, device, n, derive_rng(seed, t))
            traj = test.trajectory(transcript)
            stats = traj[0] if traj else [float("nan")] * n
            pvals = traj[1] if traj else [float("nan")] * n
            for k, (x, a) in enumerate(transcript.rounds):
                writer.writerow([t, k + 1, x, a, f"{stats[k]:.12g}", f"{pvals[k]:.12g}"])


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    run = _run_params(doc, args)
    n, trials, seed = run["n"], run["trials"], run["seed"]
    t0 = time.perf_counter()
    threads = max(1, args.threads)
    if threads == 1:
        accepted, stats = _simulate_chunk(doc, n, 0, trials, seed)
    else:
        bounds = np.linspace(0, trials, threads + 1).astype(int)
        accepted, stats = 0, []
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_simulate_chunk, doc, n, int(lo), int(hi), seed)
                       for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            for fut in futures:
                acc, chunk_stats = fut.result()
                accepted += acc
                stats.extend(chunk_stats)
    wall = time.perf_counter() - t0
    test = build_test(doc, n)
    device = build_device(doc, test)
    lo95, hi95 = wilson_interval(accepted, trials)
    report = {
        "test": test.descriptor,
        "device": device.descriptor,
        "n": n,
        "trials": trials,
        "accepted": accepted,
        "accept_rate": accepted / trials,
        "ci95": [lo95, hi95],
        "seed": seed,
        "wall_time_s": wall,
    }
    if args.trace:
        trace_trials = min(run["trace_trials"], trials)
        _write_trace(args.trace, doc, n, seed, trace_trials)
        report["trace"] = args.trace
    _emit(report, args.out)
    return EXIT_OK


def cmd_exact(args) -> int:
    doc = load_config(args.config)
    run = _run_params(doc, args)
    n, seed = run["n"], run["seed"]
    test = build_test(doc, n)
    behavior = build_behavior(doc, test)
    t0 = time.perf_counter()
    acceptance = exact_acceptance(test, behavior)
    report = {
        "test": test.descriptor,
        "scenario": doc["scenario"]["kind"],
        "n": n,
        "acceptance": float(acceptance),
        "seed": seed,
        "wall_time_s": time.perf_counter() - t0,
    }
    if not isinstance(acceptance, float):
        report["acceptance_exact"] = str(acceptance)
    _emit(report, args.out)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    doc = load_config(args.config)
    run = _run_params(doc, args)
    n = run["n"]
    test = build_test(doc, n)
    t0 = time.perf_counter()
    best, winners = enumerate_deterministic_max(test, n)
    first = min(winners, key=lambda s: s.key())
    report = {
        "test": test.descriptor,
        "n": n,
        "max_acceptance": float(best),
        "argmax_count": len(winners),
        "lexicographic_first": ["".join(str(b) for b in seq) for seq in first.party_sequences],
        "wall_time_s": time.perf_counter() - t0,
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_membership(args) -> int:
    target = load_behavior(args.target)
    candidates = [load_behavior(p) for p in args.set]
    result = membership(target, candidates, exact=args.exact or None)
    if isinstance(result, ConvexDecomposition):
        cert = {
            "type": "decomposition",
            "weights": [float(w) for w in result.weights],
            "indices": list(result.indices),
            "residual": float(result.residual),
        }
    else:
        cert = {
            "type": "separation",
            "coeffs": [float(v) for v in np.asarray(result.coeffs, dtype=float).T.reshape(-1)],
            "alpha": float(result.alpha),
            "margin": float(result.margin),
        }
    _emit(cert, args.out)
    return EXIT_OK


def cmd_separate(args) -> int:
    target = load_behavior(args.target)
    candidates = [load_behavior(p) for p in args.set]
    result = separating_functional(target, candidates, exact=args.exact or None)
    cert = {
        "type": "separation",
        "coeffs": [float(v) for v in np.asarray(result.coeffs, dtype=float).T.reshape(-1)],
        "alpha": float(result.alpha),
        "margin": float(result.margin),
    }
    _emit(cert, args.out)
    return EXIT_OK


def cmd_witness(args) -> int:
    rng = derive_rng(args.seed)
    rho = load_density(args.rho) if args.rho else random_density(args.dim, rng)
    report_obj = exposedness_scan(rho, args.samples, rng)
    report = {
        "dim": rho.dim,
        "samples": args.samples,
        "seed": args.seed,
        "min_value": report_obj.min_value,
        "argmin_distance": report_obj.argmin_distance,
        "min_is_target": report_obj.min_is_target,
        "second_smallest": report_obj.second_smallest,
        "identity_max_error": report_obj.identity_max_error,
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_attack_demo(args) -> int:
    config = AttackDemoConfig(witness=args.witness, n=args.n, trials=args.trials, seed=args.seed,
                              restarts=args.restarts)
    report = attack_demo(config)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_approx(args) -> int:
    if args.target.endswith(".beh") or args.target.endswith(".toml"):
        target = load_behavior(args.target)
    else:
        target = _resolve_target(args.target)
    model, value = best_local_approx(target, "distance", restarts=args.restarts,
                                     iters=args.iters, seed=args.seed)
    if args.out:
        if args.out.endswith(".json"):
            doc = {
                "objective": "distance",
                "value": value,
                "supports": list(model.supports),
                "outputs": list(model.output_sizes),
            }
            for name in ("p1", "p2", "p3", "q1", "q2", "q3"):
                doc[name] = [float(v) for v in np.asarray(getattr(model, name)).reshape(-1)]
            _emit(doc, args.out)
        else:
            save_triangle_model(model, args.out)
            print(json.dumps({"objective": "distance", "value": value, "model": args.out}))
    else:
        print(json.dumps({"objective": "distance", "value": value}))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        with open(args.config, "rb") as fh:
            doc = _toml().load(fh)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: cannot parse config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    errors = validate_config(doc)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def _emit(obj: dict, out: str = None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noniid",
                                     description="Certification experiments beyond the iid assumption.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--seed", type=int, default=seed_default, help="master seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("simulate", help="Monte Carlo acceptance of a configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--trace", help="write a per-round trace CSV for the first trials")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact acceptance probability (small n)")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("enumerate", help="exhaustive deterministic-strategy maximum")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("membership", help="convex-hull membership certificate")
    p.add_argument("--target", required=True, help="target behavior file")
    p.add_argument("--set", nargs="+", required=True, help="candidate behavior files")
    p.add_argument("--exact", action="store_true", help="rational pivots")
    common(p)
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("separate", help="max-margin separating functional")
    p.add_argument("--target", required=True)
    p.add_argument("--set", nargs="+", required=True)
    p.add_argument("--exact", action="store_true")
    common(p)
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("witness", help="two-copy state witness exposedness scan")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--rho", help="density matrix file (default: random state)")
    common(p, seed_default=0)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("attack-demo", help="side-by-side memory-attack demonstration")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--witness", default="agreement", choices=("agreement", "closeness"))
    p.add_argument("--restarts", type=int, default=50, help="best-local optimizer restarts")
    common(p, seed_default=0)
    p.set_defaults(func=cmd_attack_demo)

    p = sub.add_parser("approx", help="best triangle-local approximation of a target")
    p.add_argument("--target", default="pc", help="'pc', 'uniform' or a behavior file")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--iters", type=int, default=500)
    common(p, seed_default=0)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("validate", help="schema-check a config without running it")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BehaviorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StateSpaceTooLarge, SearchSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW


if __name__ == "__main__":
    sys.exit(main())
