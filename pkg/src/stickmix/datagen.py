"""Synthetic dataset generators.

Dataset 1: 1000 observations in 5 balanced clusters of 200, 10 binary
covariates, Bernoulli response, no fixed effects; cluster parameters
chosen so the clusters are well separated.

Dataset 2: allocations grow by sequential stick breaking where every
new stick draws its own concentration alpha ~ Gamma(9, rate 2) and
V ~ Beta(1, alpha); cluster and fixed-effect parameters come from the
model priors (t_7(0,1) intercepts and coefficients, Dirichlet(1,...)
simplices, standard normal fixed-effect data); 10 covariates with 5
categories each and 10 fixed effects.
"""

from __future__ import annotations

import numpy as np

from stickmix.model import ProfileDataset
from stickmix.rng import RngStream

__all__ = ["DATASET1_THETA", "DATASET1_P_X0", "generate_dataset1", "generate_dataset2", "generate_toy"]

# Cluster intercepts and P(X_j = 0) per cluster (rows: covariates 1..10,
# columns: clusters 1..5).
DATASET1_THETA = np.array([-2.19, -0.84, 0.0, 0.84, 2.19])
DATASET1_P_X0 = np.array(
    [
        [0.9, 0.9, 0.1, 0.1, 0.1],
        [0.9, 0.9, 0.9, 0.1, 0.1],
        [0.9, 0.9, 0.1, 0.1, 0.1],
        [0.9, 0.9, 0.9, 0.1, 0.1],
        [0.1, 0.9, 0.1, 0.1, 0.9],
        [0.1, 0.9, 0.9, 0.1, 0.9],
        [0.1, 0.9, 0.1, 0.1, 0.9],
        [0.1, 0.9, 0.9, 0.1, 0.9],
        [0.9, 0.9, 0.1, 0.9, 0.9],
        [0.1, 0.1, 0.9, 0.1, 0.1],
    ]
)


def generate_dataset1(rng: RngStream) -> tuple[ProfileDataset, np.ndarray]:
    """Five balanced clusters of 200, binary covariates, no fixed effects.

    Returns the dataset and the true allocation vector (1-based).
    """
    per_cluster = 200
    n_clusters = 5
    J = DATASET1_P_X0.shape[0]
    Z = np.repeat(np.arange(1, n_clusters + 1), per_cluster)
    n = len(Z)
    p_y1 = 1.0 / (1.0 + np.exp(-DATASET1_THETA))
    Y = (rng.random(n) < p_y1[Z - 1]).astype(np.int64)
    # X_j = 0 with the tabulated probability, else 1
    p_x0 = DATASET1_P_X0[:, Z - 1].T  # (n, J)
    X = (rng.random((n, J)) >= p_x0).astype(np.int64)
    data = ProfileDataset(X=X, Y=Y, W=np.empty((n, 0)), K=np.full(J, 2))
    return data, Z


def generate_dataset2(
    rng: RngStream, n: int = 2000
) -> tuple[ProfileDataset, np.ndarray, np.ndarray]:
    """Stick-breaking allocations with a fresh alpha draw per new stick.

    Returns (dataset, true allocations, per-stick alpha draws).
    """
    J, K, L = 10, 5, 10
    V: list[float] = []
    psi: list[float] = []
    alphas: list[float] = []
    Z = np.empty(n, dtype=np.int64)
    for i in range(n):
        u = float(rng.random())
        c = 0
        acc = 0.0
        while True:
            if c == len(psi):
                alphas.append(float(rng.draw_gamma(9.0, 2.0)))
                V.append(float(rng.draw_beta(1.0, alphas[-1])))
                psi.append(V[-1] * float(np.prod([1.0 - v for v in V[:-1]])))
            acc += psi[c]
            if u < acc:
                Z[i] = c + 1
                break
            c += 1
    n_sticks = len(psi)
    theta = rng.draw_student_t_scaled(7.0, 1.0, size=n_sticks)
    phi = rng.draw_dirichlet_rows(np.ones((n_sticks, J, K)))
    beta = rng.draw_student_t_scaled(7.0, 1.0, size=L)
    W = rng.normal(size=(n, L))
    lam = theta[Z - 1] + W @ beta
    Y = (rng.random(n) < 1.0 / (1.0 + np.exp(-lam))).astype(np.int64)
    X = np.empty((n, J), dtype=np.int64)
    u = rng.random((n, J))
    cum = np.cumsum(phi[Z - 1], axis=-1)
    X = (u[:, :, None] >= cum).sum(axis=-1)
    data = ProfileDataset(X=X, Y=Y, W=W, K=np.full(J, K))
    return data, Z, np.array(alphas)


def generate_toy(
    rng: RngStream,
    n: int,
    K: list[int] | np.ndarray = (2,),
    L: int = 0,
    Z: np.ndarray | None = None,
) -> tuple[ProfileDataset, np.ndarray]:
    """Small fully random instance (n <= 10 intended) for enumeration tests."""
    K = np.asarray(K, dtype=np.int64)
    J = len(K)
    if Z is None:
        Z = rng.integers(1, 3, size=n)
    Z = np.asarray(Z, dtype=np.int64)
    X = np.column_stack(
        [rng.integers(0, int(k), size=n) for k in K]
    ) if J else np.empty((n, 0), dtype=np.int64)
    Y = rng.integers(0, 2, size=n)
    W = rng.normal(size=(n, L)) if L else np.empty((n, 0))
    return ProfileDataset(X=X, Y=Y, W=W, K=K), Z
