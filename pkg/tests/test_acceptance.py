"""Acceptance gate: one test per release criterion.

Each test states its tolerance explicitly and checks against an
independent oracle (closed forms, exhaustive enumeration, adaptive
quadrature, or Monte Carlo with known standard errors).  The two
end-to-end tests (criteria 9 and 10) run full chains and take several
minutes; everything else is fast.
"""

import time
from itertools import product

import numpy as np
import pytest
from scipy.stats import binomtest

from conftest import FixedRng, adjusted_rand, clone_state, log_joint, make_dataset, make_state
from test_partition import (
    crp_log_prob,
    polya_urn_log_marginal,
    quad_log_marginal_1d,
    random_mixed_response_cases,
    set_partitions,
)
from stickmix.datagen import generate_dataset1, generate_dataset2
from stickmix.labelswitch import (
    _move3_quantities,
    _swap_labels,
    expected_weight,
    move1_swap_random_pair,
    move2_swap_neighbours_with_v,
    propose_move3,
)
from stickmix.model import HyperParams, ProfileDataset, cluster_counts
from stickmix.partition import (
    log_covariate_marginal,
    log_partition_prior,
    log_response_marginal_laplace,
    response_objective,
)
from stickmix.postprocess import accumulate_similarity, optimal_partition
from stickmix.rng import RngStream
from stickmix.sampler import Sampler, SamplerConfig, update_sticks, update_cluster_covariate_params

# Hyperparameters for the end-to-end run on synthetic dataset 1.  The
# covariate profiles overlap, so the Bayes-optimal classifier is the
# ceiling on partition recovery; see notes in the repository history.
DATASET1_SEED = 55
DATASET1_A = 5.0
DATASET1_ALPHA = 0.25


def random_states(n_states, seed, with_data=False, n_max=15):
    rng = RngStream(seed)
    out = []
    for _ in range(n_states):
        C = int(rng.integers(2, 7))
        n = int(rng.integers(2, n_max))
        data = make_dataset(rng, n, K=(2, 3), L=1 if with_data else 0)
        st = make_state(rng, data, C=C, alpha=float(rng.uniform(0.2, 5.0)))
        out.append((st, data, rng))
    return out


def test_criterion_01_move3_identities_on_1000_states():
    """Weight-sum preservation, leftover-product preservation, and the
    involution property hold to 1e-10 on 10^3 random states in < 5 s."""
    states = random_states(1000, seed=101)
    t0 = time.perf_counter()
    for st, _, rng in states:
        c = int(rng.integers(1, st.C))
        psi_c, psi_c1, v_c, v_c1 = propose_move3(st, c)
        assert abs(psi_c + psi_c1 - (st.psi[c - 1] + st.psi[c])) < 1e-10
        assert abs((1 - v_c) * (1 - v_c1) - (1 - st.V[c - 1]) * (1 - st.V[c])) < 1e-10
        st2 = clone_state(st)
        _swap_labels(st2, c, c + 1)
        st2.V[c - 1], st2.V[c] = v_c, v_c1
        st2.refresh_psi()
        _, _, v_back, v1_back = propose_move3(st2, c)
        assert abs(v_back - st.V[c - 1]) < 1e-10
        assert abs(v1_back - st.V[c]) < 1e-10
    assert time.perf_counter() - t0 < 5.0


def test_criterion_02_acceptance_ratio_oracle_all_moves():
    """Closed-form acceptance ratios equal brute-force joint-density
    ratios to 1e-10 for all three moves on 10^3 random states each,
    including the hand-computed R = 0.84375 case."""
    # hand value: alpha=1, n=(2,1), psi=(0.4, 0.2)
    from test_labelswitch import state_from_weights

    st = state_from_weights([1, 1, 2], (0.4, 0.2), alpha=1.0)
    _, _, log_r = _move3_quantities(st, 1)
    assert np.exp(log_r) == pytest.approx(0.84375, rel=1e-10)

    for st, data, rng in random_states(1000, seed=202, with_data=True):
        # move 3: deterministic stick map, labels-with-parameters swap
        c = int(rng.integers(1, st.C))
        _, _, log_r = _move3_quantities(st, c)
        prop = clone_state(st)
        _, _, v_c, v_c1 = propose_move3(st, c)
        _swap_labels(prop, c, c + 1)
        prop.V[c - 1], prop.V[c] = v_c, v_c1
        prop.refresh_psi()
        assert abs(log_r - (log_joint(prop, data) - log_joint(st, data))) < 1e-10

        # move 1: swap a random pair of occupied labels
        zstar = st.zstar()
        if zstar >= 2:
            c1, c2 = (int(v) + 1 for v in rng.choice(zstar, size=2, replace=False))
            prop = clone_state(st)
            _swap_labels(prop, c1, c2)
            oracle = log_joint(prop, data) - log_joint(st, data)
            out = move1_swap_random_pair(
                st, FixedRng(choices=[[c1 - 1, c2 - 1]], uniforms=[1e-300])
            )
            assert abs(out.log_ratio - oracle) < 1e-10
            st = prop  # move was forced to accept; continue from there

        # move 2: swap neighbours together with their sticks
        if st.zstar() >= 2:
            c = int(rng.integers(1, st.zstar()))
            prop = clone_state(st)
            _swap_labels(prop, c, c + 1)
            prop.V[c - 1], prop.V[c] = prop.V[c], prop.V[c - 1]
            prop.refresh_psi()
            oracle = log_joint(prop, data) - log_joint(st, data)
            out = move2_swap_neighbours_with_v(st, FixedRng(integers=[c], uniforms=[1e-300]))
            assert abs(out.log_ratio - oracle) < 1e-10


def test_criterion_03_expected_weight_formula():
    """expected_weight matches Monte Carlo over the stick posterior
    (10^5 draws, 4 s.e.) and reproduces the R1/R2 acceptance factors
    exactly for 100 random count configurations."""
    rng = RngStream(303)
    for _ in range(5):
        counts = rng.integers(0, 9, size=4).astype(float)
        alpha = float(rng.uniform(0.3, 4.0))
        tails = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
        draws = 100_000
        V = rng.draw_beta(
            1.0 + np.tile(counts, (draws, 1)), alpha + np.tile(tails, (draws, 1))
        )
        psi = V * np.cumprod(
            np.hstack([np.ones((draws, 1)), 1.0 - V[:, :-1]]), axis=1
        )
        for c in range(1, 5):
            mc, se = psi[:, c - 1].mean(), psi[:, c - 1].std(ddof=1) / np.sqrt(draws)
            assert abs(expected_weight(c, counts, alpha) - mc) < 4 * se

    for _ in range(100):
        counts = rng.integers(0, 9, size=5).astype(float)
        alpha = float(rng.uniform(0.2, 5.0))
        c = int(rng.integers(1, 5))
        swapped = counts.copy()
        swapped[c - 1], swapped[c] = counts[c], counts[c - 1]
        tail = counts[c + 1:].sum()
        r1 = (1 + alpha + counts[c] + tail) / (alpha + counts[c] + tail)
        r2 = (alpha + counts[c - 1] + tail) / (1 + alpha + counts[c - 1] + tail)
        assert expected_weight(c, swapped, alpha) / expected_weight(
            c + 1, counts, alpha
        ) == pytest.approx(r1, rel=1e-12)
        assert expected_weight(c + 1, swapped, alpha) / expected_weight(
            c, counts, alpha
        ) == pytest.approx(r2, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 5.0])
def test_criterion_04_prior_weight_ordering(alpha):
    """Under the prior, P(psi_c > psi_{c+1}) > 0.5 for c = 1, 2, 3:
    one-sided binomial test, 10^5 replicates, p < 1e-6."""
    rng = RngStream(404)
    reps = 100_000
    V = rng.draw_beta(np.ones((reps, 4)), np.full((reps, 4), alpha))
    psi = V * np.cumprod(np.hstack([np.ones((reps, 1)), 1.0 - V[:, :-1]]), axis=1)
    for c in (1, 2, 3):
        wins = int(np.sum(psi[:, c - 1] > psi[:, c]))
        assert wins > reps // 2
        p = binomtest(wins, reps, 0.5, alternative="greater").pvalue
        assert p < 1e-6


def test_criterion_05_partition_prior_vs_crp_enumeration():
    """Size-multiset partition mass equals exhaustively aggregated CRP
    masses for every partition shape of n <= 8, to 1e-10; the n = 2
    closed forms 1/(alpha+1) and alpha/(alpha+1) hold exactly."""
    for alpha in (0.3, 1.0, 4.2):
        assert log_partition_prior([1, 1], alpha) == pytest.approx(
            np.log(1 / (alpha + 1)), abs=1e-12
        )
        assert log_partition_prior([1, 2], alpha) == pytest.approx(
            np.log(alpha / (alpha + 1)), abs=1e-12
        )
    for alpha, n in product((0.7, 1.6), range(1, 9)):
        mass = {}
        for part in set_partitions(list(range(n))):
            sizes = tuple(sorted(len(b) for b in part))
            mass[sizes] = np.logaddexp(mass.get(sizes, -np.inf), crp_log_prob(part, alpha))
        total = -np.inf
        for sizes, log_m in mass.items():
            Z = np.repeat(np.arange(1, len(sizes) + 1), sizes)
            assert log_partition_prior(Z, alpha) == pytest.approx(log_m, abs=1e-10)
            total = np.logaddexp(total, log_m)
        assert total == pytest.approx(0.0, abs=1e-10)


def test_criterion_06_covariate_marginal_vs_polya_urn():
    """Dirichlet-multinomial covariate marginal equals the sequential
    Polya-urn oracle to 1e-10 across n <= 6, J <= 2, K <= 3 and
    a in {0.5, 1, 2}; includes the 1/2 and 1/3 worked cases."""
    assert log_covariate_marginal([1], [[0]], 1.0, [2]) == pytest.approx(
        np.log(0.5), abs=1e-12
    )
    assert log_covariate_marginal([1], [[1]], 1.0, [3]) == pytest.approx(
        np.log(1 / 3), abs=1e-12
    )
    rng = RngStream(606)
    for a, n, J in product((0.5, 1.0, 2.0), range(1, 7), (1, 2)):
        for _ in range(5):
            K = [int(rng.integers(2, 4)) for _ in range(J)]
            X = np.column_stack([rng.integers(0, k, size=n) for k in K])
            Z = rng.integers(1, 4, size=n)
            assert log_covariate_marginal(Z, X, a, K) == pytest.approx(
                polya_urn_log_marginal(Z, X, a, K), abs=1e-10
            )


def test_criterion_07_laplace_marginal_accuracy():
    """Laplace response marginal within 0.05 of adaptive quadrature for
    20 random single-cluster cases (n <= 15, both outcomes present);
    gradient and Hessian match finite differences to 1e-6 relative."""
    hyper = HyperParams()
    worst = 0.0
    for n, Y in random_mixed_response_cases(20, seed=707):
        Z = np.ones(n, dtype=np.int64)
        lap = log_response_marginal_laplace(Z, Y, np.empty((n, 0)), hyper)
        assert lap.converged
        worst = max(worst, abs(lap.value - quad_log_marginal_1d(Y, hyper)))
    assert worst <= 0.05

    rng = RngStream(708)
    n = 9
    Y = (rng.uniform(0, 1, size=n) < 0.5).astype(np.int64)
    Y[0], Y[1] = 0, 1
    Z = np.array([1] * 5 + [2] * 4)
    W = rng.uniform(-1, 1, size=(n, 2))
    h_grad_hess, d = response_objective(Z, Y, W, hyper)
    for _ in range(5):
        eta = rng.uniform(-1.5, 1.5, size=d)
        _, grad, hess = h_grad_hess(eta)
        eps = 1e-6
        for k in range(d):
            step = np.zeros(d)
            step[k] = eps
            hp, _, _ = h_grad_hess(eta + step)
            hm, _, _ = h_grad_hess(eta - step)
            assert (hp - hm) / (2 * eps) == pytest.approx(grad[k], rel=1e-6, abs=1e-9)
            _, gp, _ = h_grad_hess(eta + step)
            _, gm, _ = h_grad_hess(eta - step)
            np.testing.assert_allclose(
                (gp - gm) / (2 * eps), hess[:, k], rtol=1e-6, atol=1e-9
            )


def test_criterion_08_conjugate_updates_and_prior_recovery():
    """Stick and profile full conditionals match their closed-form
    moments at fixed allocations (10^5 draws, 3 MC s.e.); a no-data
    chain recovers the concentration prior (Geweke-style z-test at the
    0.001 level)."""
    rng = RngStream(808)
    data = make_dataset(rng, 30, K=(3,), L=0)
    st = make_state(rng, data, C=4, alpha=1.3)
    counts = cluster_counts(st.Z, st.C).astype(float)
    tails = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
    draws = 100_000
    v_draws = np.empty((draws, st.C))
    phi_draws = np.empty((draws, st.C, 3))
    hyper_a1 = HyperParams(a=1.0)
    for i in range(draws):
        update_sticks(st, rng)
        v_draws[i] = st.V
        update_cluster_covariate_params(st, data, hyper_a1, rng)
        phi_draws[i] = st.phi[0]
    a_post, b_post = 1.0 + counts, st.alpha + tails
    v_mean = a_post / (a_post + b_post)
    v_sd = np.sqrt(a_post * b_post / ((a_post + b_post) ** 2 * (a_post + b_post + 1)))
    np.testing.assert_array_less(
        np.abs(v_draws.mean(axis=0) - v_mean), 3 * v_sd / np.sqrt(draws)
    )
    for c in range(st.C):
        in_c = st.Z == c + 1
        cat = np.array([np.sum(data.X[in_c, 0] == k) for k in range(3)], dtype=float)
        conc = 1.0 + cat
        mean = conc / conc.sum()
        sd = np.sqrt(mean * (1 - mean) / (conc.sum() + 1))
        np.testing.assert_array_less(
            np.abs(phi_draws[:, c, :].mean(axis=0) - mean), 3 * sd / np.sqrt(draws)
        )

    empty = ProfileDataset(
        X=np.empty((0, 1), dtype=int), Y=np.empty(0, dtype=int),
        W=np.empty((0, 0)), K=[2],
    )
    cfg = SamplerConfig(init_clusters=1, sweeps=40_000, burnin=0, mpp_every=0, seed=88)
    s = Sampler(data=empty, hyper=HyperParams(alpha_shape=9.0, alpha_rate=2.0), config=cfg)
    alphas = np.array([r.alpha for r in s.run()])
    # batch-means standard error to absorb autocorrelation
    nb = 200
    batches = alphas[: len(alphas) // nb * nb].reshape(nb, -1).mean(axis=1)
    se = batches.std(ddof=1) / np.sqrt(nb)
    z = (alphas.mean() - 9.0 / 2.0) / se
    assert abs(z) < 3.2905  # two-sided 0.001 level
    # second moment: Gamma(9, 2) has E[alpha^2] = (9*10)/4 = 22.5
    b2 = (alphas[: len(alphas) // nb * nb].reshape(nb, -1) ** 2).mean(axis=1)
    se2 = b2.std(ddof=1) / np.sqrt(nb)
    assert abs(((alphas**2).mean() - 22.5) / se2) < 3.2905


def test_criterion_09_dataset1_end_to_end():
    """Five-profile benchmark, 5000 sweeps / 2500 burn-in, initial
    cluster counts {1, 5, 10, 30}: similarity-based optimal partition
    reaches ARI >= 0.9 against the truth for every initialisation,
    post-burn-in mean log marginal partition posterior agrees across
    initialisations within 2 pooled s.d., and the modal occupied
    cluster count is 5."""
    data, truth = generate_dataset1(RngStream(DATASET1_SEED))
    hyper = HyperParams(a=DATASET1_A, alpha_fixed=DATASET1_ALPHA)
    mpp_by_init, cstars_all = {}, []
    for init in (1, 5, 10, 30):
        cfg = SamplerConfig(
            init_clusters=init, sweeps=5000, burnin=2500, thin=5, mpp_every=10,
            seed=100 + init, alpha_fixed=DATASET1_ALPHA, alpha_star=DATASET1_ALPHA,
        )
        s = Sampler(data=data, hyper=hyper, config=cfg, rng=RngStream(100 + init))
        zs, mpps = [], []
        for rec in s.run():
            if rec.sweep > cfg.burnin:
                cstars_all.append(rec.cstar)
                if rec.sweep % cfg.thin == 0:
                    zs.append(s.state.Z.copy())
                if rec.log_mpp is not None:
                    mpps.append(rec.log_mpp)
        S = accumulate_similarity(np.array(zs))
        est = optimal_partition(S, range(2, 11))
        ari = adjusted_rand(est.labels, truth)
        assert ari >= 0.9, f"init={init}: ARI {ari:.3f} < 0.9"
        mpp_by_init[init] = np.array(mpps)
    pooled_sd = np.std(np.concatenate(list(mpp_by_init.values())))
    grand = np.mean([m.mean() for m in mpp_by_init.values()])
    for init, m in mpp_by_init.items():
        dev = abs(m.mean() - grand)
        assert dev <= 2 * pooled_sd, f"init={init}: MPP deviation {dev:.2f} > 2 sd"
    values, freq = np.unique(cstars_all, return_counts=True)
    assert values[np.argmax(freq)] == 5


def test_criterion_10_dataset2_move3_reduces_alpha_dispersion():
    """Heterogeneous-stick benchmark (n = 500), 5 chains per arm,
    20000 sweeps, chains started from 100 clusters: the between-chain
    dispersion of the posterior-mean concentration with the
    expected-weight switch move enabled should be no larger than
    without it.

    KNOWN FAILURE at this scale, kept red deliberately.  At n = 500
    the arm without the third move mixes fine: chains started from 1,
    10, 50, or 100 clusters all agree on mean alpha ~ 4.3 (sd ~ 0.09),
    so there is no stuck-ordering dispersion for the move to repair.
    The third move accepts on a plain joint-density ratio without a
    change-of-variables correction for its deterministic stick
    retargeting (the published form, pinned by the ratio oracles in
    criterion 2), which makes it an approximate move: on an
    exactly-enumerable model its stationary allocation law is off by
    up to 0.018 absolute.  Here that bias shifts mean alpha up by
    ~ 0.8 and roughly doubles the between-chain dispersion
    (~ 0.16 vs ~ 0.09).  The claimed benefit presumably needs the
    original experiment's scale (larger n, 100k-sweep chains) where
    ordering trapping dominates; at desk scale the effect reverses.
    """
    data, _, _ = generate_dataset2(RngStream(2024), n=500)
    hyper = HyperParams(a=1.0, alpha_shape=9.0, alpha_rate=2.0)
    means = {True: [], False: []}
    for rep in range(5):
        for ls3 in (True, False):
            cfg = SamplerConfig(
                init_clusters=100, sweeps=20_000, burnin=10_000, thin=10,
                mpp_every=0, seed=7000 + 10 * rep + int(ls3), ls3=ls3,
            )
            s = Sampler(data=data, hyper=hyper, config=cfg)
            post = [r.alpha for r in s.run() if r.sweep > cfg.burnin]
            means[ls3].append(float(np.mean(post)))
    sd_with = np.std(means[True], ddof=1)
    sd_without = np.std(means[False], ddof=1)
    assert sd_with <= sd_without, (
        f"alpha dispersion with move 3 {sd_with:.4f} > without {sd_without:.4f}; "
        f"means with={means[True]}, without={means[False]}"
    )


def test_criterion_11_move2_empty_lower_cluster_always_accepts():
    """Whenever the lower-labelled cluster of the swapped pair is
    empty, the move-2 acceptance probability is exactly 1 (checked on
    10^3 random states)."""
    rng = RngStream(1111)
    checked = 0
    while checked < 1000:
        C = int(rng.integers(2, 6))
        data = make_dataset(rng, int(rng.integers(1, 10)), K=(2,))
        c = int(rng.integers(1, C))
        Z = rng.integers(1, C + 1, size=data.n)
        Z[Z == c] = c + 1  # empty the lower-labelled cluster
        st = make_state(rng, data, C=C, Z=Z, alpha=float(rng.uniform(0.2, 5.0)))
        if st.zstar() < 2:
            continue
        out = move2_swap_neighbours_with_v(
            st, FixedRng(integers=[c], uniforms=[1.0 - 1e-15])
        )
        assert min(1.0, float(np.exp(out.log_ratio))) == 1.0
        assert out.accepted
        checked += 1


def test_criterion_12_same_seed_runs_are_byte_identical(tmp_path):
    """Rerunning a chain with the same seed reproduces every output
    file byte for byte."""
    from stickmix import io, runner

    rng = RngStream(12)
    data = make_dataset(rng, 40, K=(2, 2), L=1)
    io.write_dataset(str(tmp_path / "data.csv"), data)
    digest = io.dataset_digest(str(tmp_path / "data.csv"))
    cfg = SamplerConfig(init_clusters=3, sweeps=200, burnin=100, thin=2,
                        mpp_every=10, seed=99)
    for d in ("run1", "run2"):
        runner.run_chain(data, HyperParams(), cfg, str(tmp_path / d), digest)
    for name in ("trace.csv", "zsamples.csv", "params.jsonl"):
        assert (tmp_path / "run1" / name).read_bytes() == (
            tmp_path / "run2" / name
        ).read_bytes(), name
