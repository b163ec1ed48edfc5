"""Label-switching Metropolis moves on the stick-breaking state.

The stick-breaking prior is only weakly identified over cluster
orderings (E[psi_c] decreases in c), so a Gibbs sampler that updates
allocations one at a time rarely reorders clusters.  Three moves fix
this:

  1. swap the labels (allocations and parameters) of two random
     clusters, leaving the weights in place;
  2. swap two neighbouring clusters together with their stick
     fractions V_c, V_{c+1};
  3. swap two neighbouring clusters and simultaneously move their
     weights toward the conditional expectations implied by the
     proposed allocations.

Moves 1 and 2 leave everything except the swapped quantities
untouched.  Move 3 preserves the combined weight psi_c + psi_{c+1} and
the product (1-V_c)(1-V_{c+1}); its proposal is a deterministic
involution, so the acceptance ratio reduces to the posterior ratio of
the allocation factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stickmix.model import ChainState, cluster_counts

__all__ = [
    "MoveOutcome",
    "expected_weight",
    "move1_swap_random_pair",
    "move2_swap_neighbours_with_v",
    "move3_expected_weight_switch",
    "propose_move3",
]


@dataclass
class MoveOutcome:
    """Result of one label-switching attempt."""

    move: int
    clusters: tuple[int, ...]
    log_ratio: float
    accepted: bool
    attempted: bool = True

    @classmethod
    def noop(cls, move: int) -> "MoveOutcome":
        return cls(move=move, clusters=(), log_ratio=0.0, accepted=False, attempted=False)


def expected_weight(c: int, counts: np.ndarray, alpha: float) -> float:
    """Conditional expectation E[psi_c | Z, alpha] under the stick posterior.

    counts[l-1] is the occupancy n_l of stick l; sticks beyond
    len(counts) are treated as empty.
    """
    counts = np.asarray(counts, dtype=np.float64)
    tails = np.concatenate((np.cumsum(counts[::-1])[::-1][1:], [0.0]))
    n_c, tail_c = counts[c - 1], tails[c - 1]
    value = (1.0 + n_c) / (1.0 + alpha + n_c + tail_c)
    for l in range(c - 1):
        value *= (alpha + tails[l]) / (1.0 + alpha + counts[l] + tails[l])
    return float(value)


def _swap_labels(state: ChainState, c1: int, c2: int):
    """Swap allocations and cluster parameters of sticks c1, c2 in place."""
    m1 = state.Z == c1
    m2 = state.Z == c2
    state.Z[m1] = c2
    state.Z[m2] = c1
    i1, i2 = c1 - 1, c2 - 1
    state.theta[i1], state.theta[i2] = state.theta[i2], state.theta[i1]
    for p in state.phi:
        p[[i1, i2]] = p[[i2, i1]]


def move1_swap_random_pair(state: ChainState, rng) -> MoveOutcome:
    """Exchange the labels of two clusters chosen uniformly from 1..Z*.

    Weights stay attached to their positions, so the acceptance ratio
    is (psi_c1 / psi_c2) ** (n_c2 - n_c1).
    """
    zstar = state.zstar()
    if zstar < 2:
        return MoveOutcome.noop(1)
    c1, c2 = (int(v) + 1 for v in rng.choice(zstar, size=2, replace=False))
    n = cluster_counts(state.Z, state.C)
    log_r = (n[c2 - 1] - n[c1 - 1]) * (
        np.log(state.psi[c1 - 1]) - np.log(state.psi[c2 - 1])
    )
    accepted = np.log(rng.random()) < log_r
    if accepted:
        _swap_labels(state, c1, c2)
    return MoveOutcome(1, (c1, c2), float(log_r), bool(accepted))


def move2_swap_neighbours_with_v(state: ChainState, rng) -> MoveOutcome:
    """Swap neighbouring clusters c, c+1 along with V_c, V_{c+1}.

    Acceptance ratio (1 - V_{c+1})^{n_c} / (1 - V_c)^{n_{c+1}}; in
    particular the move is always accepted when cluster c is empty.
    """
    zstar = state.zstar()
    if zstar < 2:
        return MoveOutcome.noop(2)
    c = int(rng.integers(1, zstar))
    n = cluster_counts(state.Z, state.C)
    v_c, v_c1 = state.V[c - 1], state.V[c]
    log_r = n[c - 1] * np.log1p(-v_c1) - n[c] * np.log1p(-v_c)
    accepted = np.log(rng.random()) < log_r
    if accepted:
        _swap_labels(state, c, c + 1)
        state.V[c - 1], state.V[c] = v_c1, v_c
        state.refresh_psi()
    return MoveOutcome(2, (c, c + 1), float(log_r), bool(accepted))


def _move3_quantities(state: ChainState, c: int):
    """Proposal weights and acceptance factors for move 3 at cluster c."""
    n = cluster_counts(state.Z, state.C)
    n_c, n_c1 = float(n[c - 1]), float(n[c])
    tail = float(n[c + 1 :].sum())
    alpha = state.alpha
    r1 = (1.0 + alpha + n_c1 + tail) / (alpha + n_c1 + tail)
    r2 = (alpha + n_c + tail) / (1.0 + alpha + n_c + tail)
    psi_c, psi_c1 = state.psi[c - 1], state.psi[c]
    psi_plus = psi_c + psi_c1
    psi_norm = psi_c1 * r1 + psi_c * r2
    psi_c_new = psi_c1 * (psi_plus / psi_norm) * r1
    psi_c1_new = psi_c * (psi_plus / psi_norm) * r2
    log_r = (
        (n_c + n_c1) * (np.log(psi_plus) - np.log(psi_norm))
        + n_c1 * np.log(r1)
        + n_c * np.log(r2)
    )
    return psi_c_new, psi_c1_new, float(log_r)


def propose_move3(state: ChainState, c: int) -> tuple[float, float, float, float]:
    """Move-3 proposal at cluster c: (psi'_c, psi'_{c+1}, V'_c, V'_{c+1}).

    Exposed separately so the algebraic identities (weight-sum and
    (1-V) product preservation, involution) can be checked directly.
    """
    psi_c_new, psi_c1_new, _ = _move3_quantities(state, c)
    head = float(np.prod(1.0 - state.V[: c - 1]))
    v_c_new = psi_c_new / head
    v_c1_new = psi_c1_new / ((1.0 - v_c_new) * head)
    return psi_c_new, psi_c1_new, v_c_new, v_c1_new


def move3_expected_weight_switch(state: ChainState, rng) -> MoveOutcome:
    """Swap neighbours c, c+1 and retarget their weights.

    The proposed weights rescale the swapped pair by the ratio of
    conditional stick expectations under the new and old allocations,
    preserving their sum.  Slice variables, alpha, the fixed effects
    and all other sticks are untouched.
    """
    zstar = state.zstar()
    if zstar < 2:
        return MoveOutcome.noop(3)
    c = int(rng.integers(1, zstar))
    _, _, log_r = _move3_quantities(state, c)
    accepted = np.log(rng.random()) < log_r
    if accepted:
        _, _, v_c_new, v_c1_new = propose_move3(state, c)
        _swap_labels(state, c, c + 1)
        state.V[c - 1], state.V[c] = v_c_new, v_c1_new
        state.refresh_psi()
    return MoveOutcome(3, (c, c + 1), float(log_r), bool(accepted))
