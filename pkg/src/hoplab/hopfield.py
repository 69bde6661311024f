"""Discrete Hopfield networks over bipolar states.

States are vectors in {-1, +1}^N. Learning sums outer products,
W = sum_s s s^T, and the per-neuron energy of a state is the vector

    E_i = -1/2 * s_i * (W s)_i

A neuron with positive energy is unstable; a state is stable when no
neuron has positive energy. Relaxation repeatedly updates randomly
chosen neurons by the sign of their incoming field until stable.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "RelaxationCapError",
    "RelaxInfo",
    "ThermalParams",
    "energy",
    "hebbian_learn",
    "is_stable",
    "prototype_strength",
    "relax",
    "thermal_perceptron_learn",
    "total_energy",
]


class RelaxationCapError(RuntimeError):
    """Relaxation exceeded its flip cap without reaching a stable state."""

    def __init__(self, flips, message=None):
        super().__init__(message or f"relaxation did not stabilize within {flips} flips")
        self.flips = flips


@dataclass
class RelaxInfo:
    """Bookkeeping from one relaxation.

    energies holds the total energy after each accepted flip and is only
    populated when the trace was requested.
    """

    flips: int
    energies: np.ndarray | None = None


def _as_states(states, dimension=None):
    s = np.asarray(states, dtype=np.float64)
    if s.size == 0:
        if s.ndim == 2 and s.shape[1] > 0:
            dimension = s.shape[1]
        if dimension is None:
            raise ValueError("empty state sequence needs an explicit dimension")
        return np.zeros((0, int(dimension)), dtype=np.float64)
    if s.ndim == 1:
        s = s.reshape(1, -1)
    if s.ndim != 2:
        raise ValueError("states must be a sequence of equal-length vectors")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("states must be bipolar (+1/-1 entries)")
    return s


def hebbian_learn(states, dimension=None, zero_diagonal=False):
    """Sum of outer products of the given bipolar states.

    Returns the N x N matrix W = sum_s s s^T. The diagonal of the raw sum
    equals the number of states; pass zero_diagonal=True to clear it, which
    removes the self-coupling term from every neuron's field.
    """
    s = _as_states(states, dimension)
    n = s.shape[1]
    if s.shape[0] == 0:
        return np.zeros((n, n), dtype=np.float64)
    w = s.T @ s
    if zero_diagonal:
        np.fill_diagonal(w, 0.0)
    return w


def _check_pair(w, state):
    w = np.ascontiguousarray(w, dtype=np.float64)
    s = np.asarray(state, dtype=np.float64).ravel()
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weight matrix must be square")
    if s.shape[0] != w.shape[0]:
        raise ValueError(f"state length {s.shape[0]} does not match matrix size {w.shape[0]}")
    return w, s


def energy(w, state):
    """Per-neuron energies E_i = -1/2 * s_i * (W s)_i."""
    w, s = _check_pair(w, state)
    return -0.5 * s * (w @ s)


def total_energy(w, state):
    """Sum of the per-neuron energies."""
    return float(energy(w, state).sum())


def is_stable(w, state):
    """True when no neuron has positive energy (zero counts as stable)."""
    return not bool(np.any(energy(w, state) > 0.0))


@njit(cache=True, nogil=True)
def _relax_kernel(w, state, h, idx, max_flips, flips_start, trace, do_trace, e_tot):
    """Asynchronous sign updates over one block of pre-drawn neuron indices.

    state and h (incoming fields h_i = sum_j w[j, i] state[j]) are updated in
    place. Returns (status, flips, e_tot) where status is 0 when a full
    stability pass succeeded, 1 when the index block ran out, and 2 when the
    flip cap was hit. The energy trace uses the symmetric-matrix identity
    dE = 2 s_i h_i - 2 w_ii for an accepted flip at i.
    """
    n = state.shape[0]
    flips = flips_start
    misses = 0
    for pos in range(idx.shape[0]):
        i = idx[pos]
        s = state[i]
        f = h[i]
        if (f > 0.0 and s < 0.0) or (f < 0.0 and s > 0.0):
            if flips >= max_flips:
                return 2, flips, e_tot
            if do_trace:
                e_tot += 2.0 * s * f - 2.0 * w[i, i]
            state[i] = -s
            d = -2.0 * s
            for j in range(n):
                h[j] += d * w[i, j]
            flips += 1
            if do_trace:
                trace[flips - 1] = e_tot
            misses = 0
        else:
            misses += 1
            if misses >= n:
                stable = True
                for a in range(n):
                    if state[a] * h[a] < 0.0:
                        stable = False
                        break
                if stable:
                    return 0, flips, e_tot
                misses = 0
    return 1, flips, e_tot


def relax(w, probe, rng, max_flips=1_000_000, return_info=False, trace_energies=False):
    """Relax a probe state to a stable attractor by random asynchronous updates.

    Each update draws a neuron index uniformly with replacement and sets
    s_i := sign(sum_j w[j, i] s_j), keeping the current value on a zero field.
    After N consecutive non-flipping updates a full stability pass re-checks
    every neuron. Raises RelaxationCapError when more than max_flips flips
    are accepted. With return_info=True also returns a RelaxInfo with the
    accepted flip count; trace_energies=True additionally records the total
    energy after every flip.
    """
    w, s0 = _check_pair(w, probe)
    if not np.all(np.abs(s0) == 1.0):
        raise ValueError("probe must be bipolar (+1/-1 entries)")
    n = s0.shape[0]
    state = s0.copy()
    h = w.T @ state
    if not np.any(state * h < 0.0) and is_stable(w, state):
        out = state.astype(np.int8)
        if return_info:
            info = RelaxInfo(flips=0, energies=np.empty(0) if trace_energies else None)
            return out, info
        return out

    do_trace = bool(return_info and trace_energies)
    trace = np.empty(max_flips if do_trace else 0, dtype=np.float64)
    e_tot = float(-0.5 * state @ (w @ state)) if do_trace else 0.0
    flips = 0
    block = 4096
    while True:
        idx = rng.integers(0, n, size=block).astype(np.int64)
        status, flips, e_tot = _relax_kernel(
            w, state, h, idx, max_flips, flips, trace, do_trace, e_tot
        )
        if status == 0:
            break
        if status == 2:
            raise RelaxationCapError(flips)
        block = min(2 * block, 65536)
    if not is_stable(w, state):
        raise RelaxationCapError(
            flips, "dynamics halted at a state that is unstable under the energy rule"
        )
    out = state.astype(np.int8)
    if return_info:
        return out, RelaxInfo(flips=flips, energies=trace[:flips].copy() if do_trace else None)
    return out


@dataclass(frozen=True)
class ThermalParams:
    """Settings for the thermal perceptron rule.

    learning_rate is the step size alpha (zero is allowed as a degenerate
    no-op), temperature scales the error-proximity factor exp(-|field|/T),
    and epochs is the number of passes over the states.
    """

    learning_rate: float
    temperature: float
    epochs: int

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


def thermal_perceptron_learn(states, params, rng):
    """Train a weight matrix with the thermal perceptron rule.

    Per visited state s, with incoming fields f_i = sum_j w[j, i] s_j and the
    one-step update s'(f) (sign of the field, +1 on a zero field):

        w[j, i] += alpha * (s'_i - s_i) * s_j * exp(-|f_i| / T)

    States are visited in a fresh shuffled order each epoch. A state whose
    one-step update already reproduces it contributes nothing.
    """
    if not isinstance(params, ThermalParams):
        raise TypeError("params must be a ThermalParams")
    s = _as_states(states)
    if s.shape[0] == 0:
        raise ValueError("thermal perceptron needs at least one state")
    n = s.shape[1]
    w = np.zeros((n, n), dtype=np.float64)
    for _ in range(params.epochs):
        for m in rng.permutation(s.shape[0]):
            x = s[m]
            f = w.T @ x
            pred = np.where(f >= 0.0, 1.0, -1.0)
            delta = pred - x
            if not delta.any():
                continue
            g = params.learning_rate * delta * np.exp(-np.abs(f) / params.temperature)
            w += np.outer(x, g)
    return w


def prototype_strength(num_instances, p):
    """Attractor strength |eta| * (1 - 4p + 4p^2) of a prototype.

    num_instances is the number of instances |eta| and p the per-entry flip
    probability used to derive them. The strength is maximal at p = 0 and
    vanishes at p = 0.5.
    """
    if num_instances < 1:
        raise ValueError("num_instances must be at least 1")
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 0.5]")
    return float(num_instances) * (1.0 - 4.0 * p + 4.0 * p * p)
