"""Synthesis of learning tasks for Hopfield networks.

A task is either prototype-regime (a set of random prototypes, each
surrounded by noisy instances, and the instances are what the network
learns) or plain-regime (uniformly random learned states with no
prototype structure). Generation is deterministic in the task seed and
independent per state, so reordering or subsetting never changes what
any individual state looks like.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PrototypeTask",
    "TaskConfig",
    "build_task",
    "generate_instances",
    "generate_prototypes",
]

_SEED_MASK = (1 << 64) - 1

# Stream tags keep prototype, instance, and plain-state draws disjoint.
_TAG_PROTOTYPE = 1
_TAG_INSTANCE = 2
_TAG_PLAIN = 3


@dataclass(frozen=True)
class TaskConfig:
    """Parameters of one task.

    Exactly one of num_prototypes and num_plain_learned may be positive:
    a task is either prototype-regime or plain-regime, never a mix.
    """

    dimension: int
    seed: int
    num_prototypes: int = 0
    instances_per_prototype: int = 1
    bernoulli_p: float = 0.2
    num_plain_learned: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.num_prototypes < 0:
            raise ValueError("num_prototypes must be non-negative")
        if self.instances_per_prototype < 1:
            raise ValueError("instances_per_prototype must be a positive integer")
        if not 0.0 <= self.bernoulli_p <= 0.5:
            raise ValueError("bernoulli_p must lie in [0, 0.5]")
        if self.num_plain_learned < 0:
            raise ValueError("num_plain_learned must be non-negative")
        if self.num_prototypes > 0 and self.num_plain_learned > 0:
            raise ValueError(
                "num_prototypes and num_plain_learned cannot both be positive"
            )
        if self.num_prototypes == 0 and self.num_plain_learned == 0:
            raise ValueError(
                "one of num_prototypes or num_plain_learned must be positive"
            )


@dataclass
class PrototypeTask:
    """A realized task: the config plus the generated states.

    prototypes has shape (num_prototypes, N) and is empty in the plain
    regime. learned has one row per state the network will memorize; in
    the prototype regime the rows come in prototype-ordered blocks of
    instances_per_prototype.
    """

    config: TaskConfig
    prototypes: np.ndarray = field(repr=False)
    learned: np.ndarray = field(repr=False)


def _random_bipolar(count, n, rng):
    return (rng.integers(0, 2, size=(count, n), dtype=np.int8) * 2 - 1).astype(np.int8)


def generate_prototypes(count, n, rng):
    """count random bipolar states of length n, each entry uniform over +-1."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if n < 1:
        raise ValueError("n must be a positive integer")
    return _random_bipolar(count, n, rng)


def generate_instances(prototype, count, p, rng):
    """Noisy copies of a prototype.

    Each instance flips each entry of the prototype independently with
    probability p; rows are mutually independent.
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 0.5]")
    if count < 1:
        raise ValueError("count must be a positive integer")
    proto = np.asarray(prototype, dtype=np.int8).ravel()
    flips = rng.random((count, proto.shape[0])) < p
    return np.where(flips, -proto, proto).astype(np.int8)


def _stream(config_seed, *key):
    return np.random.default_rng(np.random.SeedSequence((config_seed & _SEED_MASK,) + key))


def build_task(config):
    """Generate the full task for a config, deterministically in its seed.

    Every prototype, instance, and plain learned state draws from its own
    counter-derived stream, so state (j, k) is identical no matter how many
    other states the task asks for.
    """
    if not isinstance(config, TaskConfig):
        raise TypeError("config must be a TaskConfig")
    n = config.dimension
    if config.num_prototypes > 0:
        protos = np.empty((config.num_prototypes, n), dtype=np.int8)
        for j in range(config.num_prototypes):
            protos[j] = generate_prototypes(1, n, _stream(config.seed, _TAG_PROTOTYPE, j))[0]
        learned = np.empty(
            (config.num_prototypes * config.instances_per_prototype, n), dtype=np.int8
        )
        for j in range(config.num_prototypes):
            for k in range(config.instances_per_prototype):
                learned[j * config.instances_per_prototype + k] = generate_instances(
                    protos[j], 1, config.bernoulli_p, _stream(config.seed, _TAG_INSTANCE, j, k)
                )[0]
    else:
        protos = np.zeros((0, n), dtype=np.int8)
        learned = np.empty((config.num_plain_learned, n), dtype=np.int8)
        for m in range(config.num_plain_learned):
            learned[m] = generate_prototypes(1, n, _stream(config.seed, _TAG_PLAIN, m))[0]
    return PrototypeTask(config=config, prototypes=protos, learned=learned)
