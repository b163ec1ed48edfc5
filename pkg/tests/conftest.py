"""Shared helpers: state construction, joint-density oracle, ARI."""

import numpy as np
import pytest

from stickmix.model import ChainState, ProfileDataset, log_likelihood_obs
from stickmix.rng import (
    RngStream,
    log_beta_pdf,
    log_dirichlet_pdf,
    log_student_t_pdf,
)


def make_dataset(rng: RngStream, n: int, K=(2,), L: int = 0) -> ProfileDataset:
    K = np.asarray(K, dtype=np.int64)
    X = (
        np.column_stack([rng.integers(0, int(k), size=n) for k in K])
        if len(K)
        else np.empty((n, 0), dtype=np.int64)
    )
    return ProfileDataset(
        X=X,
        Y=rng.integers(0, 2, size=n),
        W=rng.normal(size=(n, L)) if L else np.empty((n, 0)),
        K=K,
    )


def make_state(rng: RngStream, data: ProfileDataset, C: int, alpha: float = 1.0,
               Z=None) -> ChainState:
    """Random valid state with C sticks over the given dataset."""
    if Z is None:
        Z = rng.integers(1, C + 1, size=data.n)
    Z = np.asarray(Z, dtype=np.int64)
    V = rng.uniform(0.05, 0.8, size=C)
    theta = rng.normal(size=C)
    phi = [rng.draw_dirichlet_rows(np.ones((C, int(k)))) for k in data.K]
    beta = rng.normal(size=data.L)
    state = ChainState(
        Z=Z, V=V, U=np.empty(data.n), theta=theta, phi=phi,
        beta=np.atleast_1d(beta), alpha=alpha,
    )
    state.U = (
        rng.uniform(0.0, state.psi[Z - 1]) if data.n else np.empty(0)
    )
    return state


def log_joint(state: ChainState, data: ProfileDataset, hyper=None) -> float:
    """Full log joint density of (Z, V, theta, phi | data), brute force.

    Slice variables are marginalised out (the moves never touch them)
    and the beta prior is a constant across label switches, so both are
    omitted.  Used as the independent oracle for move acceptance
    ratios.
    """
    total = 0.0
    for i in range(data.n):
        c = int(state.Z[i])
        total += float(np.log(state.psi[c - 1]))
        total += log_likelihood_obs(i, c, state, data)
    total += float(np.sum(log_beta_pdf(state.V, 1.0, state.alpha)))
    total += float(np.sum(log_student_t_pdf(state.theta, 7.0, 1.0)))
    for p in state.phi:
        for row in p:
            total += log_dirichlet_pdf(row, np.ones(len(row)))
    return total


def clone_state(state: ChainState) -> ChainState:
    return ChainState(
        Z=state.Z.copy(), V=state.V.copy(), U=state.U.copy(),
        theta=state.theta.copy(), phi=[p.copy() for p in state.phi],
        beta=state.beta.copy(), alpha=state.alpha, sweep=state.sweep,
    )


def adjusted_rand(a, b) -> float:
    """Adjusted Rand index between two label vectors."""
    from math import comb

    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ct = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(ct, (ai, bi), 1)
    sij = sum(comb(int(v), 2) for v in ct.ravel())
    sa = sum(comb(int(v), 2) for v in ct.sum(axis=1))
    sb = sum(comb(int(v), 2) for v in ct.sum(axis=0))
    expected = sa * sb / comb(n, 2)
    return float((sij - expected) / ((sa + sb) / 2 - expected))


class FixedRng:
    """Deterministic stand-in for RngStream in move-level tests.

    Feeds preset cluster selections and uniform draws so a test can
    force a specific proposal and acceptance decision.
    """

    def __init__(self, choices=(), integers=(), uniforms=()):
        self._choices = list(choices)
        self._integers = list(integers)
        self._uniforms = list(uniforms)

    def choice(self, a, size=None, replace=True):
        return np.asarray(self._choices.pop(0))

    def integers(self, low, high=None, size=None):
        return self._integers.pop(0)

    def random(self, size=None):
        return self._uniforms.pop(0)


@pytest.fixture
def rng():
    return RngStream(12345)
