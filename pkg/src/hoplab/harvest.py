"""Energy-profile harvesting.

A harvest trains a Hopfield network on a task's learned states, takes
the sorted per-neuron energy profile of every prototype and learned
state directly from the trained matrix, then relaxes a batch of uniform
random probes and records each attractor that is neither a prototype
nor a learned state as a spurious profile. Sorting the energies removes
the neuron identity, which is the point: a profile describes how stable
a state is, not which neurons make it so.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from hoplab.hopfield import (
    RelaxationCapError,
    ThermalParams,
    hebbian_learn,
    relax,
    thermal_perceptron_learn,
)
from hoplab.tasks import PrototypeTask

__all__ = [
    "EnergyProfile",
    "HarvestSet",
    "ProbeStats",
    "StateClass",
    "energy_profile",
    "harvest",
    "label_state",
    "normalize_profile",
    "normalize_rows",
]


class StateClass(Enum):
    """Kind of a harvested state."""

    PROTOTYPE = "prototype"
    LEARNED = "learned"
    PLAIN_LEARNED = "plain_learned"
    SPURIOUS = "spurious"


@dataclass
class EnergyProfile:
    """Sorted per-neuron energies of one state, most negative first."""

    values: np.ndarray
    normalized: bool = False


@dataclass
class ProbeStats:
    """Where the probes ended up, plus relaxation effort."""

    probes: int = 0
    to_prototype: int = 0
    to_learned: int = 0
    to_spurious: int = 0
    to_negated_prototype: int = 0
    to_negated_learned: int = 0
    unique_spurious: int = 0
    cap_exceeded: int = 0
    total_flips: int = 0


@dataclass
class HarvestSet:
    """All profiles gathered from one trained network.

    Rows of profiles line up with labels; the order is prototypes, then
    learned states, then spurious attractors in discovery order.
    """

    network_id: str
    task_config: object
    profiles: np.ndarray = field(repr=False)
    labels: list = field(repr=False)
    probe_stats: ProbeStats = field(default_factory=ProbeStats)
    normalized: bool = False

    def items(self):
        """Iterate (EnergyProfile, StateClass) pairs."""
        for row, label in zip(self.profiles, self.labels):
            yield EnergyProfile(values=row, normalized=self.normalized), label


def _batch_energies(w, states):
    s = np.asarray(states, dtype=np.float64)
    return -0.5 * s * (s @ w.T)


def energy_profile(w, state):
    """Ascending sort of the per-neuron energies of state under w."""
    w = np.asarray(w, dtype=np.float64)
    s = np.asarray(state, dtype=np.float64).ravel()
    if s.shape[0] != w.shape[0]:
        raise ValueError(f"state length {s.shape[0]} does not match matrix size {w.shape[0]}")
    e = -0.5 * s * (w @ s)
    return EnergyProfile(values=np.sort(e), normalized=False)


def normalize_rows(values):
    """Affine-map each row to span [-1, 1]; constant rows become all zeros."""
    x = np.asarray(values, dtype=np.float64)
    lo = x.min(axis=-1, keepdims=True)
    hi = x.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0)
    safe = np.where(flat, 1.0, span)
    out = -1.0 + 2.0 * (x - lo) / safe
    return np.where(flat, 0.0, out)


def normalize_profile(profile):
    """Rescale a profile so its minimum is -1 and its maximum +1.

    A constant profile has no scale and maps to all zeros. A profile
    already flagged as normalized is returned unchanged.
    """
    if profile.normalized:
        return profile
    return EnergyProfile(values=normalize_rows(profile.values), normalized=True)


def _key(state):
    return np.packbits(np.asarray(state) > 0).tobytes()


def label_state(state, task):
    """Classify a state by exact match against a task's states.

    Prototypes are checked before learned states; anything else is
    spurious, including negations of known states.
    """
    if not isinstance(task, PrototypeTask):
        raise TypeError("task must be a PrototypeTask")
    key = _key(state)
    for proto in task.prototypes:
        if key == _key(proto):
            return StateClass.PROTOTYPE
    learned_class = (
        StateClass.LEARNED if task.config.num_prototypes > 0 else StateClass.PLAIN_LEARNED
    )
    for learned in task.learned:
        if key == _key(learned):
            return learned_class
    return StateClass.SPURIOUS


def harvest(
    task,
    num_probes,
    rng,
    learn_rule="hebbian",
    zero_diagonal=True,
    thermal_params=None,
    max_flips=1_000_000,
    network_id=None,
):
    """Train on a task, profile its states, and probe for spurious attractors.

    Profiles of prototypes and learned states are computed directly from
    the trained matrix whether or not they are stable. num_probes uniform
    random probes are then relaxed; an attractor that matches no prototype
    or learned state adds one spurious profile (exact duplicates collapse,
    negations stay distinct). Probes that exceed the flip cap are skipped
    and counted. Each probe draws from its own child stream, so the result
    is deterministic in rng and independent of execution order.

    The default learn rule is the Hebbian sum with the diagonal cleared;
    zero_diagonal=False keeps the raw self-couplings. learn_rule="thermal"
    uses the thermal perceptron instead and needs thermal_params.
    """
    if not isinstance(task, PrototypeTask):
        raise TypeError("task must be a PrototypeTask")
    if num_probes < 0:
        raise ValueError("num_probes must be non-negative")
    n = task.config.dimension

    streams = rng.spawn(num_probes + 1)
    if learn_rule == "hebbian":
        w = hebbian_learn(task.learned, dimension=n, zero_diagonal=zero_diagonal)
    elif learn_rule == "thermal":
        if thermal_params is None:
            raise ValueError("learn_rule='thermal' needs thermal_params")
        if not isinstance(thermal_params, ThermalParams):
            raise TypeError("thermal_params must be a ThermalParams")
        w = thermal_perceptron_learn(task.learned, thermal_params, streams[0])
    else:
        raise ValueError(f"unknown learn_rule {learn_rule!r}")

    learned_class = (
        StateClass.LEARNED if task.config.num_prototypes > 0 else StateClass.PLAIN_LEARNED
    )
    direct = np.vstack([task.prototypes, task.learned]).astype(np.float64)
    profiles = [np.sort(_batch_energies(w, direct), axis=1)]
    labels = [StateClass.PROTOTYPE] * task.prototypes.shape[0]
    labels += [learned_class] * task.learned.shape[0]

    proto_keys = {_key(s) for s in task.prototypes}
    learned_keys = {_key(s) for s in task.learned}
    neg_proto_keys = {_key(-s) for s in task.prototypes}
    neg_learned_keys = {_key(-s) for s in task.learned}

    stats = ProbeStats(probes=num_probes)
    seen_spurious = set()
    spurious_rows = []
    for child in streams[1:]:
        probe = (child.integers(0, 2, size=n, dtype=np.int8) * 2 - 1).astype(np.int8)
        try:
            final, info = relax(w, probe, child, max_flips=max_flips, return_info=True)
        except RelaxationCapError:
            stats.cap_exceeded += 1
            continue
        stats.total_flips += info.flips
        key = _key(final)
        if key in proto_keys:
            stats.to_prototype += 1
            continue
        if key in learned_keys:
            stats.to_learned += 1
            continue
        stats.to_spurious += 1
        if key in neg_proto_keys:
            stats.to_negated_prototype += 1
        elif key in neg_learned_keys:
            stats.to_negated_learned += 1
        if key not in seen_spurious:
            seen_spurious.add(key)
            spurious_rows.append(np.sort(_batch_energies(w, final[None, :])[0]))
            labels.append(StateClass.SPURIOUS)
    stats.unique_spurious = len(seen_spurious)

    if spurious_rows:
        profiles.append(np.array(spurious_rows))
    matrix = np.vstack(profiles) if labels else np.zeros((0, n))
    if network_id is None:
        network_id = f"task{task.config.seed}"
    return HarvestSet(
        network_id=network_id,
        task_config=task.config,
        profiles=matrix,
        labels=labels,
        probe_stats=stats,
    )
