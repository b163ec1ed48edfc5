"""Core data types and likelihood for the profile regression mixture model.

The model clusters observations through a shared allocation vector Z:
each cluster c carries a response intercept theta_c and, for every
discrete covariate j, a probability simplex phi_{c,j}.  The binary
response follows a logistic model

    logit P(Y_i = 1) = theta_{Z_i} + beta' W_i

with global fixed-effect coefficients beta.  Mixture weights come from
a stick-breaking construction psi_c = V_c * prod_{l<c} (1 - V_l) with
V_c ~ Beta(1, alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Simplex entries are clamped away from 0 before logs; Dirichlet draws
# can underflow to exactly 0.
SIMPLEX_FLOOR = 1e-300


@dataclass
class ProfileDataset:
    """Observed data: discrete covariates, binary response, fixed effects.

    Attributes:
        X: (n, J) integer matrix, X[i, j] in [0, K[j]).
        Y: (n,) binary response in {0, 1}.
        W: (n, L) real fixed-effect values.
        K: per-covariate category counts, each >= 2.
    """

    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int64)
        if self.X.ndim == 1:
            self.X = self.X.reshape(len(self.X), -1)
        self.Y = np.asarray(self.Y, dtype=np.int64)
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim == 1:
            self.W = self.W.reshape(len(self.W), -1)
        self.K = np.asarray(self.K, dtype=np.int64)
        n = len(self.Y)
        if self.X.shape[0] != n or self.W.shape[0] != n:
            raise ValueError("X, Y, W must have the same number of rows")
        if self.X.shape[1] != len(self.K):
            raise ValueError("K must give a category count per covariate")
        if np.any(self.K < 2) and self.X.shape[1] > 0:
            raise ValueError("each covariate needs at least 2 categories")
        if self.X.size and (self.X.min() < 0 or np.any(self.X >= self.K[None, :])):
            raise ValueError("covariate index out of range for declared K")
        if np.any((self.Y != 0) & (self.Y != 1)):
            raise ValueError("Y must be binary")
        if self.W.size and not np.all(np.isfinite(self.W)):
            raise ValueError("fixed effects must be finite")

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def J(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.W.shape[1]


@dataclass
class HyperParams:
    """Prior constants.

    Defaults follow the data-generating priors used throughout: a
    symmetric Dirichlet(a) on each covariate simplex, scaled-t priors
    t_nu(0, sigma) on theta_c and beta_l, and a Gamma(shape, rate)
    prior on the concentration alpha (shape 9, rate 2, i.e. scale 0.5).
    Set alpha_fixed to pin alpha instead of sampling it.
    """

    a: float = 1.0
    nu: float = 7.0
    sigma_theta: float = 1.0
    sigma_beta: float = 1.0
    alpha_shape: float = 9.0
    alpha_rate: float = 2.0
    alpha_fixed: float | None = None

    def __post_init__(self):
        for name in ("a", "nu", "sigma_theta", "sigma_beta", "alpha_shape", "alpha_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.alpha_fixed is not None and self.alpha_fixed <= 0:
            raise ValueError("alpha_fixed must be strictly positive")


@dataclass
class ClusterParams:
    """Parameters of a single cluster: intercept theta and simplices phi."""

    theta: float
    phi: list[np.ndarray]

    def __post_init__(self):
        self.phi = [np.asarray(p, dtype=np.float64) for p in self.phi]
        for p in self.phi:
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("phi must sum to 1")
            if np.any(p <= 0.0) or np.any(p >= 1.0):
                raise ValueError("phi entries must lie in (0, 1)")


def stick_weights(V: np.ndarray) -> np.ndarray:
    """Weights psi_c = V_c * prod_{l<c} (1 - V_l) for sticks 1..C."""
    V = np.asarray(V, dtype=np.float64)
    if len(V) == 0:
        return np.empty(0)
    rem = np.concatenate(([1.0], np.cumprod(1.0 - V)[:-1]))
    return V * rem


@dataclass
class ChainState:
    """Full sampler state for one chain.

    Stick labels are 1-based (Z_i in 1..C).  Cluster parameters are
    stored stacked for speed: theta is (C,), phi is a list over
    covariates j of (C, K_j) arrays.  psi is cached from V; call
    refresh_psi() after mutating V.
    """

    Z: np.ndarray
    V: np.ndarray
    U: np.ndarray
    theta: np.ndarray
    phi: list[np.ndarray]
    beta: np.ndarray
    alpha: float
    sweep: int = 0
    psi: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=np.int64)
        self.V = np.asarray(self.V, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.psi is None:
            self.refresh_psi()

    @property
    def C(self) -> int:
        """Number of instantiated sticks."""
        return len(self.V)

    @property
    def n(self) -> int:
        return len(self.Z)

    def cstar(self) -> int:
        """Number of non-empty clusters."""
        if self.n == 0:
            return 0
        return len(np.unique(self.Z))

    def zstar(self) -> int:
        """Largest occupied label (0 when there are no observations)."""
        return int(self.Z.max()) if self.n else 0

    def refresh_psi(self):
        self.psi = stick_weights(self.V)

    def cluster(self, c: int) -> ClusterParams:
        """View of stick c (1-based) as a ClusterParams."""
        return ClusterParams(
            theta=float(self.theta[c - 1]),
            phi=[p[c - 1].copy() for p in self.phi],
        )

    def validate(self, data: ProfileDataset | None = None, atol: float = 1e-12):
        """Assert all state invariants; raises AssertionError on violation."""
        C = self.C
        assert len(self.theta) == C
        assert all(p.shape[0] == C for p in self.phi)
        assert self.alpha > 0
        if self.n:
            assert self.Z.min() >= 1 and self.Z.max() <= C
            assert np.all(self.U > 0) and np.all(self.U < self.psi[self.Z - 1])
        if C:
            assert np.all((self.V > 0) & (self.V < 1))
            assert np.all((self.psi > 0) & (self.psi < 1))
            assert self.psi.sum() < 1.0
            assert np.max(np.abs(self.psi - stick_weights(self.V))) <= atol
        for p in self.phi:
            assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12 if p.size else True
        if data is not None:
            assert self.n == data.n
            assert len(self.phi) == data.J
            assert len(self.beta) == data.L


@dataclass
class SweepRecord:
    """Per-sweep diagnostics emitted by the sampler.

    The three log marginal factors (covariate, response, partition
    prior) and their total are None on sweeps where the marginal
    partition posterior was not evaluated.  Move acceptance flags are
    None when a move was disabled or could not be attempted.
    """

    sweep: int
    alpha: float
    cstar: int
    log_cov_marginal: float | None = None
    log_resp_marginal: float | None = None
    log_partition_prior: float | None = None
    log_mpp: float | None = None
    ls1_accepted: bool | None = None
    ls2_accepted: bool | None = None
    ls3_accepted: bool | None = None

    def __post_init__(self):
        parts = (self.log_cov_marginal, self.log_resp_marginal, self.log_partition_prior)
        if self.log_mpp is not None:
            if any(p is None for p in parts):
                raise ValueError("log_mpp requires all three components")
            if abs(self.log_mpp - sum(parts)) > 1e-10:
                raise ValueError("log_mpp must equal the sum of its components")


def safe_log(p: np.ndarray | float) -> np.ndarray | float:
    """log with simplex entries clamped away from zero."""
    return np.log(np.maximum(p, SIMPLEX_FLOOR))


def log_response_term(y: int, eta: float) -> float:
    """Bernoulli log likelihood under logit P(Y=1) = eta."""
    # y*eta - log(1 + e^eta), computed stably
    return float(y * eta - np.logaddexp(0.0, eta))


def log_likelihood_obs(i: int, c: int, state: ChainState, data: ProfileDataset) -> float:
    """Log likelihood of observation i under stick c.

    Sum of the logistic response term (intercept theta_c plus fixed
    effects) and the categorical covariate term prod_j phi_{c,j,X_ij}.
    """
    if not (1 <= c <= state.C):
        raise IndexError("stick index out of range")
    eta = state.theta[c - 1] + (data.W[i] @ state.beta if data.L else 0.0)
    ll = log_response_term(int(data.Y[i]), float(eta))
    for j in range(data.J):
        ll += float(safe_log(state.phi[j][c - 1, data.X[i, j]]))
    return ll


def loglik_matrix(state: ChainState, data: ProfileDataset) -> np.ndarray:
    """(n, C) matrix of log_likelihood_obs values, vectorized."""
    n, C = data.n, state.C
    wb = data.W @ state.beta if data.L else np.zeros(n)
    eta = state.theta[None, :] + wb[:, None]
    ll = data.Y[:, None] * eta - np.logaddexp(0.0, eta)
    for j in range(data.J):
        ll += safe_log(state.phi[j])[:, data.X[:, j]].T
    return ll


def cluster_counts(
    Z: np.ndarray,
    C: int,
    X: np.ndarray | None = None,
    K: np.ndarray | None = None,
) -> np.ndarray | tuple[np.ndarray, list[np.ndarray]]:
    """Occupancy counts n_c per stick, and n_{c,j,k} when X, K are given.

    Returns n_c (length C) alone, or (n_c, [per-covariate (C, K_j)
    count arrays]).
    """
    Z = np.asarray(Z, dtype=np.int64)
    if len(Z) and (Z.min() < 1 or Z.max() > C):
        raise ValueError("allocation labels must lie in [1, C]")
    n_c = np.bincount(Z - 1, minlength=C) if len(Z) else np.zeros(C, dtype=np.int64)
    if X is None:
        return n_c
    X = np.asarray(X, dtype=np.int64)
    K = np.asarray(K, dtype=np.int64)
    n_cjk = []
    for j in range(X.shape[1]):
        flat = (Z - 1) * K[j] + X[:, j]
        n_cjk.append(np.bincount(flat, minlength=C * K[j]).reshape(C, K[j]))
    return n_c, n_cjk
