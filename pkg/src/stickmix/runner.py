"""Chain execution and cross-chain comparison workflows.

run_chain executes one chain and writes its artifacts (trace, thinned
allocation samples, thinned parameter snapshots, final state) to a
directory.  compare_chains recomputes marginal partition posterior
traces at a shared concentration alpha_star and summarises them per
chain; experiment_move3 runs the with/without-move-3 benchmark.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

import numpy as np

from stickmix import io
from stickmix.model import HyperParams, ProfileDataset, cluster_counts
from stickmix.partition import log_partition_prior
from stickmix.sampler import Sampler, SamplerConfig

__all__ = ["ChainResult", "run_chain", "compare_chains", "experiment_move3"]


@dataclass
class ChainResult:
    out_dir: str
    alpha_mean: float
    laplace_failures: int
    sweeps: int


def run_chain(
    data: ProfileDataset,
    hyper: HyperParams,
    config: SamplerConfig,
    out_dir: str,
    data_digest: str = "",
    laplace_fail_max: int = 5,
    save_params: bool = True,
) -> ChainResult:
    """Run one chain, writing trace.csv, zsamples.csv, params.jsonl, state.json.

    Raises RuntimeError if the number of Laplace failures exceeds
    laplace_fail_max.
    """
    io.ensure_dir(out_dir)
    sampler = Sampler(data=data, hyper=hyper, config=config)
    z_sweeps: list[int] = []
    z_rows: list[np.ndarray] = []
    params_rows: list[dict] = []
    alpha_post: list[float] = []
    with io.TraceWriter(os.path.join(out_dir, "trace.csv")) as trace:
        for record in sampler.run():
            st = sampler.state
            sizes = None
            if record.log_cov_marginal is not None:
                n_c = cluster_counts(st.Z, st.C)
                sizes = sorted(int(v) for v in n_c[n_c > 0])
            trace.write(record, cluster_sizes=sizes)
            if st.sweep % config.thin == 0:
                z_sweeps.append(st.sweep)
                z_rows.append(st.Z.copy())
                if save_params and st.sweep > config.burnin:
                    params_rows.append(
                        {
                            "sweep": st.sweep,
                            "psi": st.psi.tolist(),
                            "theta": st.theta.tolist(),
                            "beta": st.beta.tolist(),
                            "phi": [p.tolist() for p in st.phi],
                        }
                    )
            if st.sweep > config.burnin:
                alpha_post.append(st.alpha)
    io.write_z_samples(os.path.join(out_dir, "zsamples.csv"), z_sweeps, z_rows)
    if save_params:
        io.write_params(os.path.join(out_dir, "params.jsonl"), params_rows)
    st = sampler.state
    alpha_mean = float(np.mean(alpha_post)) if alpha_post else float(st.alpha)
    io.write_json(
        os.path.join(out_dir, "state.json"),
        {
            "sweep": st.sweep,
            "Z": st.Z,
            "V": st.V,
            "theta": st.theta,
            "phi": [p for p in st.phi],
            "beta": st.beta,
            "alpha": st.alpha,
            "alpha_posterior_mean": alpha_mean,
            "laplace_failures": sampler.laplace_failures,
            "config": asdict(config),
            "hyper": asdict(sampler.hyper),
            "data_digest": data_digest,
            "n": data.n,
        },
    )
    if sampler.laplace_failures > laplace_fail_max:
        raise RuntimeError(
            f"{sampler.laplace_failures} Laplace failures exceed the "
            f"configured tolerance of {laplace_fail_max}"
        )
    return ChainResult(out_dir, alpha_mean, sampler.laplace_failures, st.sweep)


def _run_chain_job(args):
    data, hyper, config, out_dir, digest, fail_max = args
    return run_chain(data, hyper, config, out_dir, digest, fail_max)


def _quantiles(x: np.ndarray):
    q = np.quantile(x, [0.025, 0.25, 0.5, 0.75, 0.975])
    return [float(v) for v in q]


def compare_chains(
    chain_dirs: list[str],
    out_dir: str,
    alpha_star: float | None = None,
    first_block: int = 500,
) -> dict:
    """Cross-chain comparison at a common alpha_star.

    Recomputes the partition-prior component of each MPP trace row at
    the shared alpha_star (the covariate and response factors do not
    depend on it), then writes per-chain summaries of log MPP, alpha
    posterior quantiles, cluster-count histograms and the first
    first_block cluster-count traces.  Chains run on different
    datasets are refused.
    """
    io.ensure_dir(out_dir)
    metas = [io.read_json(os.path.join(d, "state.json")) for d in chain_dirs]
    digests = {m.get("data_digest", "") for m in metas}
    if len(digests) > 1:
        raise ValueError("chains were run on different datasets; refusing to compare")
    if alpha_star is None:
        alpha_star = float(np.mean([m["alpha_posterior_mean"] for m in metas]))
    summary_rows = []
    alpha_rows = []
    hist_rows = []
    first_rows = []
    mpp_traces = {}
    for d, meta in zip(chain_dirs, metas):
        trace = io.read_trace(os.path.join(d, "trace.csv"))
        burnin = meta["config"]["burnin"]
        name = os.path.basename(os.path.normpath(d))
        # re-anchor the MPP at the shared alpha_star via the stored sizes
        mpp = np.full(len(trace["sweep"]), np.nan)
        for i, sizes in enumerate(trace["cluster_sizes"]):
            if not sizes or np.isnan(trace["log_resp_marginal"][i]):
                continue
            z_equiv = np.repeat(
                np.arange(1, len(sizes.split(";")) + 1),
                [int(s) for s in sizes.split(";")],
            )
            prior = log_partition_prior(z_equiv, alpha_star)
            mpp[i] = (
                trace["log_cov_marginal"][i] + trace["log_resp_marginal"][i] + prior
            )
        mpp_traces[name] = (trace["sweep"], mpp)
        post = trace["sweep"] > burnin
        mpp_post = mpp[post & ~np.isnan(mpp)]
        summary_rows.append(
            [
                name, meta["config"]["init_clusters"], alpha_star,
                float(np.mean(mpp_post)) if len(mpp_post) else None,
                float(np.std(mpp_post, ddof=1)) if len(mpp_post) > 1 else None,
                int(len(mpp_post)),
            ]
        )
        alpha_post = trace["alpha"][post]
        alpha_rows.append([name, meta["config"]["init_clusters"]] + _quantiles(alpha_post))
        cstar_post = trace["cstar"][post]
        counts = np.bincount(cstar_post)
        for k in np.nonzero(counts)[0]:
            hist_rows.append([name, int(k), int(counts[k]), float(counts[k] / len(cstar_post))])
        for sweep, cstar in zip(trace["sweep"][:first_block], trace["cstar"][:first_block]):
            first_rows.append([name, int(sweep), int(cstar)])
    io.write_table(
        os.path.join(out_dir, "mpp_summary.csv"),
        ["chain", "init_clusters", "alpha_star", "mean_log_mpp", "sd_log_mpp", "n_points"],
        summary_rows,
    )
    io.write_table(
        os.path.join(out_dir, "alpha_quantiles.csv"),
        ["chain", "init_clusters", "q2.5", "q25", "q50", "q75", "q97.5"],
        alpha_rows,
    )
    io.write_table(
        os.path.join(out_dir, "cluster_count_hist.csv"),
        ["chain", "cstar", "count", "frequency"],
        hist_rows,
    )
    io.write_table(
        os.path.join(out_dir, "first_sweeps_cstar.csv"),
        ["chain", "sweep", "cstar"],
        first_rows,
    )
    return {
        "alpha_star": alpha_star,
        "summary": summary_rows,
        "alpha_quantiles": alpha_rows,
        "mpp_traces": mpp_traces,
    }


def acceptance_blocks(trace: dict, block: int = 500) -> list[list]:
    """Per-move acceptance rate over consecutive blocks of sweeps."""
    rows = []
    sweeps = trace["sweep"]
    for start in range(0, len(sweeps), block):
        sl = slice(start, start + block)
        row = [int(sweeps[sl][0]), int(sweeps[sl][-1])]
        for move in ("ls1_accepted", "ls2_accepted", "ls3_accepted"):
            vals = trace[move][sl]
            attempted = vals >= 0
            row.append(float(vals[attempted].mean()) if attempted.any() else None)
        rows.append(row)
    return rows


def experiment_move3(
    data: ProfileDataset,
    hyper: HyperParams,
    base_config: SamplerConfig,
    out_dir: str,
    runs_per_arm: int = 5,
    data_digest: str = "",
    workers: int = 1,
) -> dict:
    """With/without-move-3 benchmark.

    Runs runs_per_arm chains per arm (moves 1+2 only vs all three
    moves), emits per-500-sweep acceptance-rate series for each move
    and the pooled post-burn-in alpha summaries per arm.
    """
    io.ensure_dir(out_dir)
    jobs = []
    arm_of = {}
    for arm, ls3 in (("with_move3", True), ("without_move3", False)):
        for rep in range(runs_per_arm):
            cfg = SamplerConfig(**{**asdict(base_config), "ls3": ls3,
                                   "seed": base_config.seed + 1000 * rep + (0 if ls3 else 500)})
            d = os.path.join(out_dir, f"{arm}_rep{rep}")
            jobs.append((data, hyper, cfg, d, data_digest, 10**9))
            arm_of[d] = arm
    if workers > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_chain_job, jobs))
    else:
        for job in jobs:
            _run_chain_job(job)
    acc_rows = []
    alpha_means = {"with_move3": [], "without_move3": []}
    alpha_samples = {"with_move3": [], "without_move3": []}
    for job in jobs:
        d = job[3]
        arm = arm_of[d]
        trace = io.read_trace(os.path.join(d, "trace.csv"))
        meta = io.read_json(os.path.join(d, "state.json"))
        for row in acceptance_blocks(trace):
            acc_rows.append([os.path.basename(d), arm] + row)
        post = trace["sweep"] > meta["config"]["burnin"]
        alpha_means[arm].append(float(trace["alpha"][post].mean()))
        alpha_samples[arm].append(trace["alpha"][post])
    io.write_table(
        os.path.join(out_dir, "acceptance_blocks.csv"),
        ["chain", "arm", "sweep_start", "sweep_end", "ls1_rate", "ls2_rate", "ls3_rate"],
        acc_rows,
    )
    summary = []
    for arm in ("with_move3", "without_move3"):
        means = np.array(alpha_means[arm])
        pooled = np.concatenate(alpha_samples[arm])
        summary.append(
            [arm, len(means), float(means.mean()),
             float(means.std(ddof=1)) if len(means) > 1 else 0.0]
            + _quantiles(pooled)
        )
    io.write_table(
        os.path.join(out_dir, "alpha_by_arm.csv"),
        ["arm", "runs", "mean_of_alpha_means", "sd_of_alpha_means",
         "q2.5", "q25", "q50", "q75", "q97.5"],
        summary,
    )
    return {
        "alpha_means": alpha_means,
        "alpha_samples": alpha_samples,
        "acceptance_rows": acc_rows,
        "summary": summary,
    }
