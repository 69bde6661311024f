"""Prototype formation in a Hebbian Hopfield network.

Learn 2000 noisy instances drawn from 20 hidden prototypes. The
prototypes, which the network never saw, end up at the bottom of the
energy landscape and most become exactly stable, while every one of the
2000 states actually learned stays unstable.

Run: python3 demos/01_prototype_formation.py  (about ten seconds)
"""

import numpy as np

from hoplab import TaskConfig, build_task, energy, hebbian_learn, is_stable

config = TaskConfig(
    dimension=256,
    seed=0,
    num_prototypes=20,
    instances_per_prototype=100,
    bernoulli_p=0.2,
)
task = build_task(config)
w = hebbian_learn(task.learned, zero_diagonal=True)

proto_stable = sum(is_stable(w, s) for s in task.prototypes)
learned_stable = sum(is_stable(w, s) for s in task.learned)
print(f"stable prototypes: {proto_stable}/{task.prototypes.shape[0]}")
print(f"stable learned states: {learned_stable}/{task.learned.shape[0]}")

proto_max = [energy(w, s).max() for s in task.prototypes]
learned_max = [energy(w, s).max() for s in task.learned]
print(f"max neuron energy, prototypes: median {np.median(proto_max):+.0f}")
print(f"max neuron energy, learned:    median {np.median(learned_max):+.0f}")
print("negative means every neuron is locked in; positive means unstable.")

print("\nraising the instance noise to p=0.3 destroys the prototypes:")
noisy = build_task(
    TaskConfig(
        dimension=256,
        seed=0,
        num_prototypes=20,
        instances_per_prototype=100,
        bernoulli_p=0.3,
    )
)
w_noisy = hebbian_learn(noisy.learned, zero_diagonal=True)
proto_stable = sum(is_stable(w_noisy, s) for s in noisy.prototypes)
proto_max = [energy(w_noisy, s).max() for s in noisy.prototypes]
print(f"stable prototypes at p=0.3: {proto_stable}/20 "
      f"(median max energy {np.median(proto_max):+.0f})")
