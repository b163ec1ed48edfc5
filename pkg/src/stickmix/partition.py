"""Marginal partition posterior: log p(Z | D, W) up to a constant.

Factorises as covariate marginal * response marginal * partition
prior.  The covariate factor integrates the Dirichlet simplices in
closed form; the response factor integrates the logistic intercepts
and fixed effects by a multivariate Laplace approximation; the
partition prior uses the exchangeable partition probability function
of the DP at a fixed concentration alpha_star.

All three factors depend on Z only through cluster counts, so they are
invariant to relabelling.  Values are comparable across partitions for
fixed data and alpha_star only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln

from stickmix.model import HyperParams, ProfileDataset

__all__ = [
    "LaplaceResult",
    "MppResult",
    "log_covariate_marginal",
    "log_partition_prior",
    "log_response_marginal_laplace",
    "log_mpp",
    "response_objective",
]


def log_covariate_marginal(Z, X, a: float, K) -> float:
    """log p(X | Z): Dirichlet-multinomial marginal over non-empty clusters.

    Sum over non-empty c and covariates j of
    log Gamma(K_j a) - K_j log Gamma(a)
      + sum_k log Gamma(a + n_cjk) - log Gamma(K_j a + n_c).
    """
    Z = np.asarray(Z, dtype=np.int64)
    X = np.asarray(X, dtype=np.int64)
    K = np.asarray(K, dtype=np.int64)
    if X.size == 0:
        return 0.0
    total = 0.0
    labels, inv = np.unique(Z, return_inverse=True)
    m = len(labels)
    n_c = np.bincount(inv, minlength=m)
    for j in range(X.shape[1]):
        kj = int(K[j])
        counts = np.bincount(inv * kj + X[:, j], minlength=m * kj).reshape(m, kj)
        total += m * (gammaln(kj * a) - kj * gammaln(a))
        total += gammaln(a + counts).sum() - gammaln(kj * a + n_c).sum()
    return float(total)


def log_partition_prior(Z, alpha_star: float) -> float:
    """log p(Z) under the DP EPPF at fixed concentration alpha_star.

    Uses the cluster-size multiset form
    n! Gamma(a*) / Gamma(a* + n) * prod_j a*^{a_j} / (j^{a_j} a_j!)
    with a_j the number of clusters of size j.
    """
    if alpha_star <= 0:
        raise ValueError("alpha_star must be positive")
    Z = np.asarray(Z, dtype=np.int64)
    n = len(Z)
    if n == 0:
        return 0.0
    sizes = np.bincount(Z)[1:]
    sizes = sizes[sizes > 0]
    a_j = np.bincount(sizes)  # a_j[j] = number of clusters of size j
    j = np.arange(len(a_j))
    mask = a_j > 0
    total = gammaln(n + 1) + gammaln(alpha_star) - gammaln(alpha_star + n)
    total += (a_j[mask] * (np.log(alpha_star) - np.log(j[mask]))).sum()
    total -= gammaln(a_j[mask] + 1).sum()
    return float(total)


@dataclass
class LaplaceResult:
    """Laplace approximation of the response marginal.

    value is None when the Newton solve failed to converge or the
    Hessian at the candidate optimum was not positive definite.
    """

    value: float | None
    eta_hat: np.ndarray | None
    iterations: int
    converged: bool
    message: str = ""


def _t_prior_terms(x: np.ndarray, nu: float, sigma: float):
    """Log density, gradient and second derivative of a scaled-t prior."""
    z2 = x * x / (sigma * sigma)
    logp = (
        gammaln((nu + 1) / 2)
        - gammaln(nu / 2)
        - 0.5 * np.log(nu * np.pi)
        - np.log(sigma)
        - (nu + 1) / 2 * np.log1p(z2 / nu)
    )
    denom = nu * sigma * sigma + x * x
    grad = -(nu + 1) * x / denom
    hess = -(nu + 1) * (nu * sigma * sigma - x * x) / (denom * denom)
    return logp.sum(), grad, hess


def response_objective(Z, Y, W, hyper: HyperParams):
    """Laplace objective h(eta) = -(log lik + log prior)/n with derivatives.

    Returns (h_grad_hess, d): a callable mapping eta = (theta*, beta)
    of length d = C* + L to (h, gradient, Hessian), all analytic.
    Exposed so the derivatives can be verified against finite
    differences independently of the Newton solve.
    """
    Z = np.asarray(Z, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W.reshape(len(W), -1)
    n = len(Y)
    if n == 0:
        raise ValueError("need at least one observation")
    _, g = np.unique(Z, return_inverse=True)
    m = int(g.max()) + 1
    L = W.shape[1]
    d = m + L

    def h_grad_hess(eta):
        theta, beta = eta[:m], eta[m:]
        lam = theta[g] + (W @ beta if L else 0.0)
        loglik = float(Y @ lam - np.logaddexp(0.0, lam).sum())
        lp_t, gr_t, hs_t = _t_prior_terms(theta, hyper.nu, hyper.sigma_theta)
        lp_b, gr_b, hs_b = _t_prior_terms(beta, hyper.nu, hyper.sigma_beta)
        p = expit(lam)
        resid = Y - p
        grad = np.empty(d)
        grad[:m] = np.bincount(g, weights=resid, minlength=m) + gr_t
        if L:
            grad[m:] = W.T @ resid + gr_b
        w = p * (1.0 - p)
        hess = np.zeros((d, d))
        hess[np.arange(m), np.arange(m)] = -np.bincount(g, weights=w, minlength=m)
        if L:
            wW = W * w[:, None]
            hess[m:, m:] = -(W.T @ wW)
            cross = np.zeros((m, L))
            np.add.at(cross, g, -wW)
            hess[:m, m:] = cross
            hess[m:, :m] = cross.T
        hess[np.arange(m), np.arange(m)] += hs_t
        if L:
            hess[m + np.arange(L), m + np.arange(L)] += hs_b
        hval = -(loglik + lp_t + lp_b) / n
        return hval, -grad / n, -hess / n

    return h_grad_hess, d


def log_response_marginal_laplace(
    Z,
    Y,
    W,
    hyper: HyperParams,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
) -> LaplaceResult:
    """log p(Y | Z, W) by Laplace approximation over (theta*, beta).

    Minimises h(eta) = -(log lik + log prior)/n by damped Newton with
    analytic gradient and Hessian, starting at eta = 0, and returns

        -n h(eta_hat) + 0.5 log|Sigma| - 0.5 d log n + 0.5 d log 2pi

    with d = C* + L and Sigma the inverse Hessian of h at the optimum.
    """
    n = len(np.asarray(Y))
    h_grad_hess, d = response_objective(Z, Y, W, hyper)
    eta = np.zeros(d)
    hval, grad, hess = h_grad_hess(eta)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= grad_tol:
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        # damped Newton: halve until h decreases (or step is negligible)
        t = 1.0
        for _ in range(60):
            trial = eta - t * step
            h_new, g_new, hs_new = h_grad_hess(trial)
            if h_new <= hval or t * float(np.max(np.abs(step))) < 1e-16:
                eta, hval, grad, hess = trial, h_new, g_new, hs_new
                break
            t *= 0.5
    else:
        return LaplaceResult(None, None, max_iter, False, "Newton did not converge")
    if float(np.max(np.abs(grad))) > grad_tol:
        return LaplaceResult(None, None, it, False, "Newton did not converge")
    sign, logdet_h = np.linalg.slogdet(hess)
    if sign <= 0:
        return LaplaceResult(None, None, it, False, "Hessian not positive definite")
    value = -n * hval - 0.5 * logdet_h - 0.5 * d * np.log(n) + 0.5 * d * np.log(2 * np.pi)
    return LaplaceResult(float(value), eta, it, True)


@dataclass
class MppResult:
    """Log marginal partition posterior and its three components."""

    total: float | None
    log_cov_marginal: float
    log_resp_marginal: float | None
    log_partition_prior: float
    ok: bool
    message: str = ""


def log_mpp(Z, data: ProfileDataset, hyper: HyperParams, alpha_star: float) -> MppResult:
    """log p(Z | Y, X, W) up to a constant, at fixed alpha_star."""
    c1 = log_covariate_marginal(Z, data.X, hyper.a, data.K)
    c3 = log_partition_prior(Z, alpha_star)
    lap = log_response_marginal_laplace(Z, data.Y, data.W, hyper)
    if not lap.converged:
        return MppResult(None, c1, None, c3, False, lap.message)
    return MppResult(c1 + lap.value + c3, c1, lap.value, c3, True)
