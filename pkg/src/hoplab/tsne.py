"""Exact t-distributed stochastic neighbor embedding.

Small-scale, non-approximated: full pairwise Gaussian affinities with
per-point bandwidths tuned to a target perplexity by bisection, a
Student-t low-dimensional kernel, and plain momentum gradient descent
on the KL divergence. Quadratic in the number of points, which is fine
at the couple-of-thousand-profile scale it is used at.
"""

import numpy as np

__all__ = ["tsne_embed"]


def _squared_distances(x):
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _conditional_affinities(d2, perplexity, tol=1e-5, max_iter=50):
    """Per-row Gaussian affinities whose entropy matches log(perplexity)."""
    m = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((m, m))
    for i in range(m):
        row = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_iter):
            ex = np.exp(-row * beta)
            total = ex.sum()
            if total <= 0:
                h = 0.0
                probs = np.zeros_like(ex)
            else:
                probs = ex / total
                h = float(np.log(total) + beta * np.dot(row, probs))
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        p[i, np.arange(m) != i] = probs
    return p


def tsne_embed(
    profiles,
    perplexity=30.0,
    iterations=1000,
    seed=0,
    learning_rate=200.0,
    return_kl=False,
):
    """Embed rows of profiles into the plane.

    The input affinity of a pair is the symmetrized conditional Gaussian
    probability; the output affinity is Student-t with one degree of
    freedom. Gradient descent runs with momentum 0.5 for the first 250
    iterations and 0.8 after. Deterministic for a fixed seed. With
    return_kl=True also returns the KL divergence per iteration.
    """
    x = np.asarray(profiles, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ValueError("need a matrix with at least 4 rows")
    m = x.shape[0]
    if not 0 < perplexity < m:
        raise ValueError(f"perplexity must lie in (0, {m}) for {m} points")
    if iterations < 1:
        raise ValueError("iterations must be positive")

    d2 = _squared_distances(x)
    p_cond = _conditional_affinities(d2, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * m)
    np.clip(p, 1e-12, None, out=p)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(m, 2))
    inc = np.zeros_like(y)
    kl_track = np.empty(iterations)
    for it in range(iterations):
        num = 1.0 / (1.0 + _squared_distances(y))
        np.fill_diagonal(num, 0.0)
        q = num / num.sum()
        np.clip(q, 1e-12, None, out=q)
        pq = (p - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
        momentum = 0.5 if it < 250 else 0.8
        inc = momentum * inc - learning_rate * grad
        y += inc
        y -= y.mean(axis=0)
        kl_track[it] = float((p * np.log(p / q)).sum())
    if return_kl:
        return y, kl_track
    return y
