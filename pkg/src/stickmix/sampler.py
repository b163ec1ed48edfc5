"""Gibbs sweep for the full stick-breaking DP mixture sampler.

Each sweep applies, in order: slice variables, stick extension,
allocations, stick fractions, cluster covariate simplices, cluster
intercepts, fixed effects, the three label-switching moves, the
concentration parameter, and finally prunes trailing empty sticks.
Slice variables U_i ~ Uniform(0, psi_{Z_i}) truncate the infinite
mixture so the allocation step only ever considers finitely many
sticks; stick extension instantiates enough sticks from the prior that
every stick with psi_c > U_i exists.

Note the block structure: V is drawn from its conditional given Z with
U marginalised out, and U is refreshed from the new weights at the
start of the next sweep before anything reads it.  Label-switching
moves likewise leave U untouched; the slice constraint may be
transiently violated between a move and the next slice update, which
is harmless given the sweep order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stickmix import labelswitch
from stickmix.model import (
    ChainState,
    HyperParams,
    ProfileDataset,
    SweepRecord,
    cluster_counts,
    loglik_matrix,
)
from stickmix.partition import log_mpp
from stickmix.rng import RngStream, log_student_t_pdf

__all__ = [
    "Sampler",
    "SamplerConfig",
    "extend_sticks",
    "init_state",
    "update_allocations",
    "update_alpha",
    "update_slice",
    "update_sticks",
    "update_cluster_covariate_params",
]

MAX_STICKS = 10**6

# Beta draws can round to exactly 1.0 when the second shape parameter is
# tiny; a stick of 1 zeroes every later weight and breaks log(1 - V)
# terms, so clamp just below 1.
V_MAX = 1.0 - 1e-12


def _draw_sticks(rng: RngStream, a, b):
    return np.minimum(rng.draw_beta(a, b), V_MAX)


@dataclass
class SamplerConfig:
    """Run-length and move configuration for one chain.

    init_clusters has no default on purpose: it should be chosen
    greater than the anticipated number of clusters, which is problem
    specific.
    """

    init_clusters: int
    sweeps: int = 5000
    burnin: int = 2500
    thin: int = 5
    mpp_every: int = 10  # 0 disables in-run MPP evaluation
    seed: int = 0
    adapt_target: float = 0.44
    ls1: bool = True
    ls2: bool = True
    ls3: bool = True
    alpha_fixed: float | None = None
    alpha_star: float | None = None  # MPP partition-prior concentration
    debug_checks: bool = False

    def __post_init__(self):
        if self.init_clusters < 1:
            raise ValueError("init_clusters must be at least 1")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not 0 <= self.burnin <= self.sweeps:
            raise ValueError("burnin must lie in [0, sweeps]")


def init_state(
    data: ProfileDataset, hyper: HyperParams, init_clusters: int, rng: RngStream
) -> ChainState:
    """Initial state: uniform random allocations, everything else from priors."""
    C = init_clusters
    alpha = (
        hyper.alpha_fixed
        if hyper.alpha_fixed is not None
        else float(rng.draw_gamma(hyper.alpha_shape, hyper.alpha_rate))
    )
    Z = rng.integers(1, C + 1, size=data.n)
    V = _draw_sticks(rng, 1.0, np.full(C, alpha))
    theta = rng.draw_student_t_scaled(hyper.nu, hyper.sigma_theta, size=C)
    phi = [
        rng.draw_dirichlet_rows(np.full((C, int(k)), hyper.a)) for k in data.K
    ]
    beta = rng.draw_student_t_scaled(hyper.nu, hyper.sigma_beta, size=data.L)
    state = ChainState(
        Z=Z, V=V, U=np.empty(data.n), theta=theta, phi=phi,
        beta=np.atleast_1d(beta), alpha=alpha,
    )
    state.U = rng.uniform(0.0, state.psi[Z - 1]) if data.n else np.empty(0)
    return state


def update_slice(state: ChainState, rng: RngStream) -> ChainState:
    """U_i ~ Uniform(0, psi_{Z_i}) independently."""
    if state.n:
        state.U = rng.uniform(0.0, state.psi[state.Z - 1])
    return state


def extend_sticks(
    state: ChainState, data: ProfileDataset, hyper: HyperParams, rng: RngStream
) -> ChainState:
    """Append prior sticks until the unassigned tail mass drops below min U."""
    if state.n == 0:
        return state
    u_min = float(state.U.min())
    tail = 1.0 - float(state.psi.sum())
    if tail < u_min:
        return state
    new_v, new_theta, new_phi = [], [], [[] for _ in data.K]
    rem = tail
    while rem >= u_min:
        if state.C + len(new_v) >= MAX_STICKS:
            raise RuntimeError("stick extension exceeded cap; alpha pathological?")
        v = float(_draw_sticks(rng, 1.0, state.alpha))
        new_v.append(v)
        new_theta.append(float(rng.draw_student_t_scaled(hyper.nu, hyper.sigma_theta)))
        for j, k in enumerate(data.K):
            new_phi[j].append(rng.draw_dirichlet(np.full(int(k), hyper.a)))
        rem *= 1.0 - v
    state.V = np.concatenate((state.V, new_v))
    state.theta = np.concatenate((state.theta, new_theta))
    state.phi = [
        np.vstack((p, np.array(rows))) if rows else p
        for p, rows in zip(state.phi, new_phi)
    ]
    state.refresh_psi()
    return state


def update_allocations(
    state: ChainState, data: ProfileDataset, rng: RngStream
) -> ChainState:
    """Z_i ~ P(Z_i=c) proportional to 1{psi_c > U_i} exp(loglik(i, c))."""
    if state.n == 0:
        return state
    ll = loglik_matrix(state, data)
    mask = state.psi[None, :] > state.U[:, None]
    assert mask.any(axis=1).all(), "empty candidate set after stick extension"
    ll = np.where(mask, ll, -np.inf)
    w = np.exp(ll - ll.max(axis=1, keepdims=True))
    cw = np.cumsum(w, axis=1)
    r = rng.random(state.n) * cw[:, -1]
    state.Z = (cw < r[:, None]).sum(axis=1).astype(np.int64) + 1
    return state


def update_sticks(state: ChainState, rng: RngStream) -> ChainState:
    """V_c ~ Beta(1 + n_c, alpha + sum_{l>c} n_l); psi recomputed."""
    n_c = cluster_counts(state.Z, state.C)
    tails = n_c[::-1].cumsum()[::-1] - n_c
    state.V = _draw_sticks(rng, 1.0 + n_c, state.alpha + tails)
    state.refresh_psi()
    return state


def update_cluster_covariate_params(
    state: ChainState, data: ProfileDataset, hyper: HyperParams, rng: RngStream
) -> ChainState:
    """phi_{c,j} ~ Dirichlet(a + counts); empty clusters draw the prior."""
    _, n_cjk = cluster_counts(state.Z, state.C, data.X, data.K)
    state.phi = [
        rng.draw_dirichlet_rows(hyper.a + counts) for counts in n_cjk
    ]
    return state


def update_alpha(state: ChainState, hyper: HyperParams, rng: RngStream) -> ChainState:
    """alpha ~ Gamma(shape + C, rate - sum_c log(1 - V_c)); no-op when fixed."""
    if hyper.alpha_fixed is not None:
        return state
    rate = hyper.alpha_rate - np.log1p(-state.V).sum()
    state.alpha = float(rng.draw_gamma(hyper.alpha_shape + state.C, rate))
    return state


def prune_sticks(state: ChainState) -> ChainState:
    """Drop trailing all-empty sticks beyond max Z_i (keeping at least one)."""
    keep = max(state.zstar(), 1)
    if keep < state.C:
        state.V = state.V[:keep]
        state.theta = state.theta[:keep]
        state.phi = [p[:keep] for p in state.phi]
        state.refresh_psi()
    return state


@dataclass
class Sampler:
    """One chain: owns its state, its RNG stream, and adaptation bookkeeping.

    Random-walk proposal scales for theta and beta adapt toward the
    target acceptance rate during burn-in (Robbins-Monro on the log
    scale) and are frozen afterwards.
    """

    data: ProfileDataset
    hyper: HyperParams
    config: SamplerConfig
    rng: RngStream = None  # type: ignore[assignment]
    state: ChainState = None  # type: ignore[assignment]
    theta_log_scale: float = 0.0
    beta_log_scale: float = 0.0
    laplace_failures: int = 0

    def __post_init__(self):
        if self.rng is None:
            self.rng = RngStream(self.config.seed)
        if self.config.alpha_fixed is not None:
            self.hyper = HyperParams(
                a=self.hyper.a, nu=self.hyper.nu,
                sigma_theta=self.hyper.sigma_theta, sigma_beta=self.hyper.sigma_beta,
                alpha_shape=self.hyper.alpha_shape, alpha_rate=self.hyper.alpha_rate,
                alpha_fixed=self.config.alpha_fixed,
            )
        if self.state is None:
            self.state = init_state(
                self.data, self.hyper, self.config.init_clusters, self.rng
            )

    # -- Metropolis updates for the non-conjugate blocks -------------------

    def update_theta(self) -> float:
        """RW-Metropolis on each cluster intercept; returns acceptance rate.

        Non-empty clusters are updated in parallel (they are
        conditionally independent given Z and beta); empty clusters are
        redrawn from the t prior.
        """
        st, data, hyper, rng = self.state, self.data, self.hyper, self.rng
        C = st.C
        scale = float(np.exp(self.theta_log_scale))
        n_c = cluster_counts(st.Z, C)
        prior_draws = rng.draw_student_t_scaled(hyper.nu, hyper.sigma_theta, size=C)
        prop = st.theta + scale * rng.normal(size=C)
        logu = np.log(rng.random(C))
        empty = n_c == 0
        if data.n:
            wb = data.W @ st.beta if data.L else np.zeros(data.n)
            gi = st.Z - 1
            d_per_obs = (
                data.Y * (prop[gi] - st.theta[gi])
                - np.logaddexp(0.0, prop[gi] + wb)
                + np.logaddexp(0.0, st.theta[gi] + wb)
            )
            d_lik = np.bincount(gi, weights=d_per_obs, minlength=C)
        else:
            d_lik = np.zeros(C)
        d_prior = log_student_t_pdf(prop, hyper.nu, hyper.sigma_theta) - log_student_t_pdf(
            st.theta, hyper.nu, hyper.sigma_theta
        )
        accept = logu < d_lik + d_prior
        st.theta = np.where(accept, prop, st.theta)
        st.theta = np.where(empty, prior_draws, st.theta)
        n_occ = int((~empty).sum())
        return float((accept & ~empty).sum() / n_occ) if n_occ else 1.0

    def update_beta(self) -> float:
        """Per-coordinate RW-Metropolis on fixed effects; acceptance rate."""
        st, data, hyper, rng = self.state, self.data, self.hyper, self.rng
        L = data.L
        if L == 0:
            return 1.0
        scale = float(np.exp(self.beta_log_scale))
        lam = st.theta[st.Z - 1] + data.W @ st.beta if data.n else None
        accepted = 0
        for l in range(L):
            prop = st.beta[l] + scale * float(rng.normal())
            d_prior = float(
                log_student_t_pdf(prop, hyper.nu, hyper.sigma_beta)
                - log_student_t_pdf(st.beta[l], hyper.nu, hyper.sigma_beta)
            )
            if data.n:
                dlam = (prop - st.beta[l]) * data.W[:, l]
                d_lik = float(
                    data.Y @ dlam
                    - (np.logaddexp(0.0, lam + dlam) - np.logaddexp(0.0, lam)).sum()
                )
            else:
                d_lik, dlam = 0.0, None
            if np.log(rng.random()) < d_lik + d_prior:
                st.beta[l] = prop
                if data.n:
                    lam = lam + dlam
                accepted += 1
        return accepted / L

    def _adapt(self, attr: str, rate: float):
        if self.state.sweep <= self.config.burnin:
            step = 1.0 / max(1, self.state.sweep) ** 0.55
            setattr(
                self, attr, getattr(self, attr) + step * (rate - self.config.adapt_target)
            )

    # -- full sweep ---------------------------------------------------------

    def sweep(self) -> SweepRecord:
        st, cfg = self.state, self.config
        st.sweep += 1
        update_slice(st, self.rng)
        if cfg.debug_checks:
            # the slice bound U_i < psi_{Z_i} is only guaranteed here,
            # right after the slice refresh; later blocks may move psi
            st.validate(self.data)
        extend_sticks(st, self.data, self.hyper, self.rng)
        update_allocations(st, self.data, self.rng)
        update_sticks(st, self.rng)
        update_cluster_covariate_params(st, self.data, self.hyper, self.rng)
        self._adapt("theta_log_scale", self.update_theta())
        self._adapt("beta_log_scale", self.update_beta())
        ls = {}
        for move_id, enabled, move in (
            (1, cfg.ls1, labelswitch.move1_swap_random_pair),
            (2, cfg.ls2, labelswitch.move2_swap_neighbours_with_v),
            (3, cfg.ls3, labelswitch.move3_expected_weight_switch),
        ):
            if enabled:
                out = move(st, self.rng)
                ls[move_id] = out.accepted if out.attempted else None
            else:
                ls[move_id] = None
        update_alpha(st, self.hyper, self.rng)
        prune_sticks(st)
        record = SweepRecord(
            sweep=st.sweep, alpha=st.alpha, cstar=st.cstar(),
            ls1_accepted=ls[1], ls2_accepted=ls[2], ls3_accepted=ls[3],
        )
        if cfg.mpp_every and st.sweep % cfg.mpp_every == 0 and st.n:
            alpha_star = cfg.alpha_star if cfg.alpha_star is not None else st.alpha
            res = log_mpp(st.Z, self.data, self.hyper, alpha_star)
            record.log_cov_marginal = res.log_cov_marginal
            record.log_partition_prior = res.log_partition_prior
            if res.ok:
                record.log_resp_marginal = res.log_resp_marginal
                record.log_mpp = res.total
            else:
                self.laplace_failures += 1
        return record

    def run(self):
        """Generator over all configured sweeps, yielding SweepRecords."""
        for _ in range(self.config.sweeps):
            yield self.sweep()
