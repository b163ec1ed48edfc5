"""Command-line entry point.

Subcommands:
  generate         write a synthetic dataset (1, 2, or toy)
  run              run one chain on a dataset
  multirun         init-cluster grid x repetitions, optionally parallel
  compare          cross-chain MPP / alpha / cluster-count report
  postprocess      similarity matrix, optimal partition, predictions
  experiment-move3 with/without-move-3 benchmark

Report subcommands render figures next to their delimited output
unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict

import numpy as np

from stickmix import io, postprocess as pp, runner
from stickmix.datagen import generate_dataset1, generate_dataset2, generate_toy
from stickmix.model import HyperParams
from stickmix.rng import RngStream
from stickmix.sampler import SamplerConfig


def _load_run_inputs(args) -> tuple:
    values = io.load_config(args.config) if args.config else {}
    for key in io.CONFIG_KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[key] = flag
    config, hyper, extras = io.make_config(values)
    if extras["K"] is None:
        raise io.ConfigError("config key K (per-covariate category counts) is required")
    K = io.parse_k(extras["K"])
    data = io.read_dataset(args.data, K)
    digest = io.dataset_digest(args.data)
    return data, hyper, config, extras, digest


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--sweeps", type=int, help="total MCMC sweeps")
    p.add_argument("--burnin", type=int, help="burn-in sweeps (discarded)")
    p.add_argument("--thin", type=int, help="retain every thin-th sweep")
    p.add_argument("--init-clusters", dest="init_clusters", type=int,
                   help="initial cluster count (required; pick above the "
                        "anticipated number)")
    p.add_argument("--mpp-every", dest="mpp_every", type=int,
                   help="evaluate the MPP every this many sweeps (0 = never)")
    p.add_argument("--adapt-target", dest="adapt_target", type=float,
                   help="Metropolis acceptance target during burn-in")
    p.add_argument("--ls1", type=_parse_bool, help="enable label-switch move 1")
    p.add_argument("--ls2", type=_parse_bool, help="enable label-switch move 2")
    p.add_argument("--ls3", type=_parse_bool, help="enable label-switch move 3")
    p.add_argument("--alpha-fixed", dest="alpha_fixed", type=float,
                   help="fix the concentration instead of sampling it")
    p.add_argument("--alpha-star", dest="alpha_star", type=float,
                   help="concentration used in the MPP partition prior")
    p.add_argument("--K", help="comma-separated per-covariate category counts")
    p.add_argument("--a", type=float, help="Dirichlet prior concentration")
    p.add_argument("--nu", type=float, help="t-prior degrees of freedom")
    p.add_argument("--sigma-theta", dest="sigma_theta", type=float,
                   help="t-prior scale for cluster intercepts")
    p.add_argument("--sigma-beta", dest="sigma_beta", type=float,
                   help="t-prior scale for fixed effects")
    p.add_argument("--alpha-shape", dest="alpha_shape", type=float,
                   help="Gamma prior shape for alpha")
    p.add_argument("--alpha-rate", dest="alpha_rate", type=float,
                   help="Gamma prior rate for alpha")
    p.add_argument("--laplace-fail-max", dest="laplace_fail_max", type=int,
                   help="tolerated Laplace failures before nonzero exit")


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {raw!r}")


def cmd_generate(args) -> int:
    rng = RngStream(args.seed)
    io.ensure_dir(args.out_dir)
    if args.dataset == "1":
        data, truth = generate_dataset1(rng)
    elif args.dataset == "2":
        data, truth, alphas = generate_dataset2(rng, n=args.n or 2000)
        io.write_table(os.path.join(args.out_dir, "alpha_draws.csv"),
                       ["alpha"], [[float(a)] for a in alphas])
    else:
        data, truth = generate_toy(rng, n=args.n or 8, K=[2, 2])
    io.write_dataset(os.path.join(args.out_dir, "data.csv"), data)
    io.write_truth(os.path.join(args.out_dir, "truth.csv"), truth)
    print(f"wrote {data.n} observations (J={data.J}, L={data.L}) to {args.out_dir}")
    print(f"declare K = {','.join(str(int(k)) for k in data.K)} when running")
    return 0


def cmd_run(args) -> int:
    try:
        data, hyper, config, extras, digest = _load_run_inputs(args)
    except io.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = SamplerConfig(**{**asdict(config), "seed": args.seed})
    try:
        result = runner.run_chain(
            data, hyper, config, args.out_dir, digest,
            laplace_fail_max=extras["laplace_fail_max"],
        )
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"chain finished: {result.sweeps} sweeps, "
          f"posterior mean alpha {result.alpha_mean:.3f}, "
          f"{result.laplace_failures} Laplace failures")
    return 0


def cmd_multirun(args) -> int:
    try:
        data, hyper, config, extras, digest = _load_run_inputs(args)
    except io.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    inits = [int(s) for s in args.inits.split(",")]
    jobs = []
    for init in inits:
        for rep in range(args.reps):
            cfg = SamplerConfig(**{**asdict(config), "init_clusters": init,
                                   "seed": args.seed + 101 * init + rep})
            d = os.path.join(args.out_dir, f"init{init}_rep{rep}")
            jobs.append((data, hyper, cfg, d, digest, extras["laplace_fail_max"]))
    if args.workers > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=args.workers) as pool:
            list(pool.map(runner._run_chain_job, jobs))
    else:
        for job in jobs:
            runner._run_chain_job(job)
    print(f"ran {len(jobs)} chains under {args.out_dir}")
    return 0


def cmd_compare(args) -> int:
    chain_dirs = sorted(
        d for d in (os.path.join(args.runs, e) for e in os.listdir(args.runs))
        if os.path.isfile(os.path.join(d, "state.json"))
    )
    if not chain_dirs:
        print(f"error: no chain directories under {args.runs}", file=sys.stderr)
        return 2
    try:
        report = runner.compare_chains(chain_dirs, args.out_dir, args.alpha_star)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.no_figures:
        from stickmix import figures

        figures.plot_mpp_traces(report["mpp_traces"],
                                os.path.join(args.out_dir, "mpp_traces.png"))
        figures.plot_alpha_quantiles(report["alpha_quantiles"],
                                     os.path.join(args.out_dir, "alpha_quantiles.png"))
        first_rows = []
        for d in chain_dirs:
            trace = io.read_trace(os.path.join(d, "trace.csv"))
            name = os.path.basename(os.path.normpath(d))
            for sweep, cstar in zip(trace["sweep"][:500], trace["cstar"][:500]):
                first_rows.append([name, int(sweep), int(cstar)])
        figures.plot_cstar_traces(first_rows,
                                  os.path.join(args.out_dir, "cstar_first_sweeps.png"))
    print(f"compared {len(chain_dirs)} chains at alpha_star={report['alpha_star']:.4f}; "
          f"report in {args.out_dir}")
    return 0


def cmd_postprocess(args) -> int:
    io.ensure_dir(args.out_dir)
    chain_dirs = sorted(
        d for d in (os.path.join(args.runs, e) for e in os.listdir(args.runs))
        if os.path.isfile(os.path.join(d, "state.json"))
    ) or [args.runs]
    counts = None
    total = 0
    all_params = []
    for d in chain_dirs:
        meta = io.read_json(os.path.join(d, "state.json"))
        sweeps, zs = io.read_z_samples(os.path.join(d, "zsamples.csv"))
        keep = sweeps > meta["config"]["burnin"]
        zs = zs[keep]
        part = pp.merge_similarity_counts(zs)
        counts = part if counts is None else counts + part
        total += len(zs)
        params_path = os.path.join(d, "params.jsonl")
        if os.path.isfile(params_path):
            all_params.extend(io.read_params(params_path))
    if total == 0:
        print("error: no retained sweeps found", file=sys.stderr)
        return 2
    S = counts / total
    n = S.shape[0]
    with open(os.path.join(args.out_dir, "similarity.csv"), "w") as fh:
        fh.write("i,j,similarity\n")
        for i in range(n):
            for j in range(i, n):
                fh.write(f"{i + 1},{j + 1},{S[i, j]!r}\n")
    k_range = range(args.k_min, args.k_max + 1)
    est = pp.optimal_partition(S, k_range)
    io.write_table(
        os.path.join(args.out_dir, "optimal_partition.csv"),
        ["observation", "cluster"],
        [[i + 1, int(c)] for i, c in enumerate(est.labels)],
    )
    print(f"optimal partition: {est.k} clusters, score {est.score:.3f}")
    if args.predict:
        K = io.parse_k(args.K) if args.K else None
        pred_rows = []
        with open(args.predict) as fh:
            import csv as _csv

            reader = _csv.reader(fh)
            header = next(reader)
            x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
            w_cols = [i for i, h in enumerate(header) if h.startswith("w")]
            for row in reader:
                x_star = [int(row[i]) for i in x_cols]
                w_star = [float(row[i]) for i in w_cols]
                p = pp.predict(x_star, w_star, all_params)
                pred_rows.append(row + [repr(p)])
        io.write_table(os.path.join(args.out_dir, "predictions.csv"),
                       header + ["p_y1"], pred_rows)
        print(f"wrote {len(pred_rows)} predictions")
    if not args.no_figures:
        from stickmix import figures

        figures.plot_similarity(S, os.path.join(args.out_dir, "similarity.png"),
                                order=np.argsort(est.labels, kind="stable"))
    return 0


def cmd_experiment_move3(args) -> int:
    try:
        data, hyper, config, extras, digest = _load_run_inputs(args)
    except io.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = SamplerConfig(**{**asdict(config), "seed": args.seed})
    report = runner.experiment_move3(
        data, hyper, config, args.out_dir,
        runs_per_arm=args.runs_per_arm, data_digest=digest, workers=args.workers,
    )
    if not args.no_figures:
        from stickmix import figures

        figures.plot_acceptance_blocks(
            report["acceptance_rows"], os.path.join(args.out_dir, "acceptance_blocks.png"))
        figures.plot_alpha_densities(
            report["alpha_samples"], os.path.join(args.out_dir, "alpha_densities.png"))
    for row in report["summary"]:
        print(f"{row[0]}: {row[1]} runs, alpha posterior means "
              f"{row[2]:.3f} +/- {row[3]:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stickmix",
        description="Stick-breaking DP mixture sampler for profile regression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--dataset", choices=["1", "2", "toy"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n", type=int, help="observation count (datasets 2 and toy)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run one chain")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("multirun", help="init-cluster grid x repetitions")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--inits", required=True, help="comma list, e.g. 1,5,10,30")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_multirun)

    p = sub.add_parser("compare", help="cross-chain convergence report")
    p.add_argument("--runs", required=True, help="directory of chain directories")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--alpha-star", dest="alpha_star", type=float,
                   help="shared concentration (default: pooled posterior mean)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("postprocess",
                       help="similarity matrix, optimal partition, predictions")
    p.add_argument("--runs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=12)
    p.add_argument("--predict", help="covariate/fixed-effect profiles to score")
    p.add_argument("--K", help="category counts for the prediction file")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("experiment-move3", help="with/without-move-3 benchmark")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--runs-per-arm", dest="runs_per_arm", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_experiment_move3)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
