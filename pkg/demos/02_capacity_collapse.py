"""Storage capacity of plain Hebbian learning.

Store increasing numbers of unrelated random states in a 256-neuron
network and measure how many remain stable. The fraction collapses from
one to almost zero in a narrow band around 0.138 * N stored states.

Run: python3 demos/02_capacity_collapse.py  (a few seconds)
"""

import numpy as np

from hoplab import TaskConfig, build_task, hebbian_learn, is_stable

N = 256
print(f"N = {N}, theoretical capacity 0.138 N = {0.138 * N:.0f} states\n")
print("stored  stable fraction (median of 5 seeds)")

for stored in (10, 20, 30, 36, 42, 50, 60, 80):
    fractions = []
    for seed in range(5):
        task = build_task(
            TaskConfig(dimension=N, seed=seed, num_plain_learned=stored)
        )
        w = hebbian_learn(task.learned, zero_diagonal=True)
        fractions.append(np.mean([is_stable(w, s) for s in task.learned]))
    bar = "#" * int(round(20 * np.median(fractions)))
    print(f"{stored:6d}  {np.median(fractions):6.3f}  {bar}")
