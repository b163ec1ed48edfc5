"""Seedable random variate generation and log densities.

One RngStream per chain; substreams (for e.g. data generation) are
derived deterministically from the parent seed so multi-chain runs are
reproducible regardless of scheduling.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betaln, gammaln

__all__ = [
    "RngStream",
    "log_beta_pdf",
    "log_gamma_pdf",
    "log_dirichlet_pdf",
    "log_student_t_pdf",
    "log_bernoulli_logit",
]


def _check_positive(**params):
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)) or np.any(value <= 0):
            raise ValueError(f"{name} must be finite and strictly positive")


class RngStream:
    """A seeded PCG64 stream; equal seeds give bit-identical sequences."""

    def __init__(self, seed: int, *, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self) -> "RngStream":
        """Derive an independent child stream (deterministic in order)."""
        child = self._seq.spawn(1)[0]
        return RngStream(self.seed, _seq=child)

    # -- raw draws -------------------------------------------------------
    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self._gen.permutation(x)

    # -- model distributions ---------------------------------------------
    def draw_beta(self, a, b, size=None):
        _check_positive(a=a, b=b)
        return self._gen.beta(a, b, size)

    def draw_gamma(self, shape, rate, size=None):
        _check_positive(shape=shape, rate=rate)
        return self._gen.gamma(shape, 1.0 / np.asarray(rate, dtype=np.float64), size)

    def draw_dirichlet(self, conc):
        conc = np.asarray(conc, dtype=np.float64)
        _check_positive(conc=conc)
        if len(conc) == 1:
            return np.ones(1)
        return self._gen.dirichlet(conc)

    def draw_dirichlet_rows(self, conc: np.ndarray) -> np.ndarray:
        """Row-wise Dirichlet draws for a (m, K) concentration matrix."""
        conc = np.asarray(conc, dtype=np.float64)
        _check_positive(conc=conc)
        g = self._gen.standard_gamma(conc)
        return g / g.sum(axis=-1, keepdims=True)

    def draw_student_t_scaled(self, nu, sigma, size=None):
        _check_positive(nu=nu, sigma=sigma)
        return sigma * self._gen.standard_t(nu, size)


# -- log densities ---------------------------------------------------------


def log_beta_pdf(x, a, b):
    _check_positive(a=a, b=b)
    x = np.asarray(x, dtype=np.float64)
    return (a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - betaln(a, b)


def log_gamma_pdf(x, shape, rate):
    _check_positive(shape=shape, rate=rate)
    x = np.asarray(x, dtype=np.float64)
    return shape * np.log(rate) + (shape - 1) * np.log(x) - rate * x - gammaln(shape)


def log_dirichlet_pdf(x, conc):
    x = np.asarray(x, dtype=np.float64)
    conc = np.asarray(conc, dtype=np.float64)
    _check_positive(conc=conc)
    return float(
        gammaln(conc.sum()) - gammaln(conc).sum() + ((conc - 1) * np.log(x)).sum()
    )


def log_student_t_pdf(x, nu, sigma):
    """Scaled t density: x/sigma ~ t_nu."""
    _check_positive(nu=nu, sigma=sigma)
    x = np.asarray(x, dtype=np.float64)
    z = x / sigma
    return (
        gammaln((nu + 1) / 2)
        - gammaln(nu / 2)
        - 0.5 * np.log(nu * np.pi)
        - np.log(sigma)
        - (nu + 1) / 2 * np.log1p(z * z / nu)
    )


def log_bernoulli_logit(y, eta):
    """log P(Y=y) under logit P(Y=1) = eta."""
    y = np.asarray(y, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    return y * eta - np.logaddexp(0.0, eta)
