"""Command-line front end: estimate, predict, simulate, verify, bench.

Exit codes: 0 success, 1 verification breach, 2 data or configuration
error, 3 estimation did not converge (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Bounds
from .dag import build_dags
from .data import (
    SyntheticSpec, Dataset, apply_bounds_rules, dump_dataset, generate_synthetic, load_items,
    load_observations, parse_bounds_rules, split, write_items, write_observations,
)
from .errors import DagChoiceError, DataError
from .estimation import FitOptions, ModelSpec, fit, predict_by_group, predict_loglik_obs, zero_probability_count
from .baselines import build_sampled_choice_set
from .nested import ScaleSpec

EXIT_OK, EXIT_BREACH, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _bounds_arg(text: str) -> Bounds:
    lo, _, hi = text.replace(",", "-").partition("-")
    try:
        return Bounds(int(lo), int(hi))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bounds must look like L,U: {exc}") from None


def _range_arg(text: str) -> range:
    lo, _, hi = text.partition("-")
    try:
        return range(int(lo), int(hi or lo) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like A-B, got {text!r}") from None


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("lmdc", "nested", "sc-base", "mc-base"), default="lmdc")
    p.add_argument("--dag", choices=("bic", "muc"), default=None,
                   help="DAG for lmdc/nested (default bic); also the DAG used to score holdouts")
    p.add_argument("--count-mode", action="store_true", help="allow repeated items (count vectors)")
    p.add_argument("--scale-attrs", default="",
                   help="nested scale selectors, e.g. const,count or attribute names")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--items", type=Path, required=True, help="items CSV (item_id,<attributes>)")
    p.add_argument("--obs", type=Path, required=True, help="observations CSV (obs_id,L,U,items)")
    p.add_argument("--bounds-rules", default=None,
                   help="size brackets such as 1-2,3-5; overrides file bounds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagchoice", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit a model and write a JSON report")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--holdout-fraction", type=float, default=None,
                   help="hold out this fraction (seeded) and report its average LL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="report JSON path")

    p = sub.add_parser("predict", help="average holdout LL under the universal choice set")
    _add_data_flags(p)
    _add_model_flags(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--report", type=Path, help="estimation report JSON to take parameters from")
    src.add_argument("--params", help="comma-separated parameter values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--bounds", type=_bounds_arg, required=True, help="L,U")
    p.add_argument("--beta", default="-0.5,-0.02,-0.1")
    p.add_argument("--n-estimation", type=int, default=1000)
    p.add_argument("--n-prediction", type=int, default=250)
    p.add_argument("--count-mode", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="dataset JSON path")
    p.add_argument("--csv-dir", type=Path, default=None, help="also write items.csv and obs.csv here")

    p = sub.add_parser("verify", help="compare DAG probabilities against brute-force enumeration")
    p.add_argument("--m-range", type=_range_arg, default=range(3, 11))
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--count-mode", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("bench", help="time LMDC fits on synthetic data")
    p.add_argument("--m", type=int, nargs="+", default=[50])
    p.add_argument("--upper", type=int, nargs="+", default=[30])
    p.add_argument("--lower", type=int, default=0)
    p.add_argument("--n-obs", type=int, default=1000)
    p.add_argument("--dags", default="bic,muc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=Path, default=None)
    return parser


def model_spec_from_args(args) -> ModelSpec:
    if args.model in ("sc-base", "mc-base") and args.scale_attrs:
        raise DataError(f"--scale-attrs does not apply to --model {args.model}")
    if args.model == "nested" and not args.scale_attrs:
        raise DataError("--model nested needs --scale-attrs")
    if args.command == "estimate" and args.model in ("sc-base", "mc-base") and args.dag is not None:
        raise DataError(f"--dag has no effect when estimating {args.model}; drop it")
    return ModelSpec(args.model, args.dag or "bic", args.count_mode, ScaleSpec.parse(args.scale_attrs))


def _load(args):
    universe = load_items(args.items)
    rules = parse_bounds_rules(args.bounds_rules) if args.bounds_rules else None
    obs = load_observations(args.obs, universe, args.count_mode, rules)
    if rules is not None:
        obs = apply_bounds_rules(obs, rules)
    return universe, obs


def _write(path: Optional[Path], payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if path is None:
        print(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")


def _group_table(rows) -> str:
    out = [f"{'[L,U]':<10}{'n':>8}{'avg LL':>12}"]
    for b, (n, ll) in rows.items():
        out.append(f"{str(b):<10}{n:>8}{ll:>12.4f}")
    return "\n".join(out)


def cmd_estimate(args) -> int:
    spec = model_spec_from_args(args)
    universe, obs = _load(args)
    holdout = []
    if args.holdout_fraction is not None:
        ds = split(Dataset(universe, obs), 1.0 - args.holdout_fraction, args.seed)
        obs, holdout = ds.subset("estimation"), ds.subset("holdout")
    options = FitOptions(tol=args.tol, max_iter=args.max_iter, seed=args.seed, threads=args.threads)
    report = fit(spec, universe, obs, options=options)
    print(report.table())
    payload = report.to_dict()
    if holdout:
        groups = predict_by_group(spec, report.estimates, holdout, universe)
        ll = predict_loglik_obs(spec, report.estimates, holdout, universe)
        payload["holdout"] = {"n": len(holdout), "average_ll": float(ll.mean()),
                              "groups": {str(b): {"n": n, "average_ll": v} for b, (n, v) in groups.items()}}
        if spec.family == "mc-base":
            payload["holdout"]["zero_probability_under_mc_base"] = zero_probability_count(
                build_sampled_choice_set(obs), holdout)
        print(_group_table(groups))
    _write(args.out, payload)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_predict(args) -> int:
    spec = model_spec_from_args(args)
    universe, obs = _load(args)
    if args.report is not None:
        if not args.report.is_file():
            raise DataError(f"file not found: {args.report}")
        params = json.loads(args.report.read_text(encoding="utf-8"))["estimates"]
    else:
        params = [float(v) for v in args.params.split(",")]
    params = np.asarray(params, dtype=float)
    ll = predict_loglik_obs(spec, params, obs, universe)
    groups = predict_by_group(spec, params, obs, universe)
    print(_group_table(groups))
    print(f"{'all':<10}{len(obs):>8}{float(ll.mean()) if len(ll) else 0.0:>12.4f}")
    payload = {
        "model": spec.label, "n": len(obs), "average_ll": float(ll.mean()) if len(ll) else 0.0,
        "groups": {str(b): {"n": n, "average_ll": v} for b, (n, v) in groups.items()},
    }
    _write(args.out, payload)
    return EXIT_OK


def cmd_simulate(args) -> int:
    beta = tuple(float(v) for v in args.beta.split(","))
    spec = SyntheticSpec(args.m, args.bounds, len(beta), beta, args.n_estimation, args.n_prediction,
                         args.seed, args.count_mode)
    ds = generate_synthetic(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    dump_dataset(ds, args.out)
    if args.csv_dir is not None:
        args.csv_dir.mkdir(parents=True, exist_ok=True)
        write_items(ds.universe, args.csv_dir / "items.csv")
        write_observations(ds.observations, ds.universe, args.csv_dir / "obs.csv")
    print(f"wrote {len(ds.observations)} observations over {args.m} items to {args.out}")
    return EXIT_OK


def verify_sweep(m_values, draws: int, seed: int, count_mode: bool = False) -> list:
    """Max |P_dag - P_enum| per (m, L, U, dag) over random utility draws."""
    from .oracle import enumerate_count_lmdc, enumerate_lmdc
    from .recursive_logit import arc_utilities, path_log_probabilities, paths_for_counts, solve_value

    rng = np.random.default_rng(seed)
    rows = []
    for m in m_values:
        for _ in range(draws):
            upper = int(rng.integers(1, (min(m, 4) if count_mode else m) + 1))
            b = Bounds(int(rng.integers(0, upper + 1)), upper)
            v = rng.normal(size=m)
            cs = (enumerate_count_lmdc if count_mode else enumerate_lmdc)(m, b)
            p_enum = cs.probabilities(v)
            for dag_name in ("bic", "muc"):
                variant = dag_name + ("-count" if count_mode else "")
                dag = build_dags(variant, m, [b])[b]
                table = solve_value(dag, arc_utilities(dag, v))
                p_dag = np.exp(path_log_probabilities(dag, table, paths_for_counts(dag, cs.counts)))
                rows.append((m, b, variant, float(np.max(np.abs(p_dag - p_enum)))))
    return rows


def cmd_verify(args) -> int:
    rows = verify_sweep(args.m_range, args.draws, args.seed, args.count_mode)
    worst = {}
    for m, b, variant, err in rows:
        worst[(m, variant)] = max(worst.get((m, variant), 0.0), err)
    print(f"{'m':>4}  {'dag':<10}{'max |dP|':>12}")
    for (m, variant), err in sorted(worst.items()):
        print(f"{m:>4}  {variant:<10}{err:>12.2e}")
    breach = max(err for *_, err in rows) >= args.tol
    if args.out:
        _write(args.out, {"tolerance": args.tol, "max_abs_diff": max(err for *_, err in rows),
                          "passed": not breach})
    print("FAIL" if breach else "PASS")
    return EXIT_BREACH if breach else EXIT_OK


def bench_rows(m_values, uppers, lower: int, n_obs: int, dags, seed: int, options: FitOptions) -> list:
    rows = []
    for m in m_values:
        for upper in uppers:
            if upper > m or lower > upper:
                continue
            ds = generate_synthetic(SyntheticSpec(m, Bounds(lower, upper), n_estimation=n_obs,
                                                  n_prediction=0, seed=seed))
            for dag in dags:
                t0 = time.perf_counter()
                report = fit(ModelSpec("lmdc", dag), ds.universe, ds.observations, options=options)
                rows.append({"m": m, "bounds": str(Bounds(lower, upper)), "dag": dag,
                             "seconds": time.perf_counter() - t0, "converged": report.converged,
                             "final_ll": report.final_ll})
    return rows


def cmd_bench(args) -> int:
    options = FitOptions(tol=args.tol, max_iter=args.max_iter, threads=args.threads, compute_se=False)
    dags = [d.strip() for d in args.dags.split(",") if d.strip()]
    rows = bench_rows(args.m, args.upper, args.lower, args.n_obs, dags, args.seed, options)
    print(f"{'m':>4}  {'[L,U]':<9}{'dag':<6}{'seconds':>10}  converged")
    for r in rows:
        print(f"{r['m']:>4}  {r['bounds']:<9}{r['dag']:<6}{r['seconds']:>10.3f}  {r['converged']}")
    if args.out:
        _write(args.out, {"rows": rows})
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NOT_CONVERGED


COMMANDS = {"estimate": cmd_estimate, "predict": cmd_predict, "simulate": cmd_simulate,
            "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DataError, DagChoiceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
