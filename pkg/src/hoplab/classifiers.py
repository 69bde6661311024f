"""Classifiers over labeled energy profiles.

Four families, all class-weighted so the rare prototype rows count as
much as the plentiful spurious ones: a logistic regression on the
scalar stability ratio, softmax feed-forward networks trained with
adaptive-moment gradient descent, one-vs-rest squared-hinge SVMs with
linear and radial basis kernels, and a single-hidden-layer rectifier
network whose hidden rows are read as memory vectors.

The cross-entropy losses here are weighted means, CE = sum_i w_i ce_i /
sum_i w_i, plus an L2 penalty on all parameters. The SVM objective is
C * sum_i w_i hinge_i^2 + ||params||^2, so C multiplies the data term
and smaller C means stronger regularization.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from hoplab.harvest import EnergyProfile, StateClass, normalize_rows

__all__ = [
    "ClassWeights",
    "DamModel",
    "DeepModel",
    "KernelModel",
    "LabeledDataset",
    "LinearModel",
    "StabilityRatioModel",
    "class_weights",
    "decision_values",
    "default_ratio_k",
    "nn_loss_and_grad",
    "predict",
    "predict_many",
    "stability_ratio",
    "train_dam",
    "train_nn",
    "train_stability_ratio",
    "train_svm",
]

_CLASS_ORDER = (
    StateClass.PROTOTYPE,
    StateClass.LEARNED,
    StateClass.PLAIN_LEARNED,
    StateClass.SPURIOUS,
)

_RATIO_EPS = 1e-12


@dataclass
class LabeledDataset:
    """Profiles as rows plus their state classes.

    class_set is the ordered set of classes present; label indices and
    one-hot encodings follow its order.
    """

    profiles: np.ndarray = field(repr=False)
    labels: list = field(repr=False)
    class_set: tuple
    normalized: bool = False

    def __post_init__(self):
        x = np.asarray(self.profiles, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("profiles must be a non-empty matrix")
        if len(self.labels) != x.shape[0]:
            raise ValueError("labels must match the number of profile rows")
        self.class_set = tuple(self.class_set)
        missing = {lab for lab in self.labels} - set(self.class_set)
        if missing:
            raise ValueError(f"labels {missing} not in class_set")
        self.profiles = x

    @classmethod
    def from_harvests(cls, harvests, normalize=False):
        """Pool one or more harvests into a single training set."""
        harvests = list(harvests)
        if not harvests:
            raise ValueError("at least one harvest is required")
        flags = {h.normalized for h in harvests}
        if len(flags) > 1:
            raise ValueError("cannot mix normalized and raw harvests")
        x = np.vstack([h.profiles for h in harvests])
        labels = [lab for h in harvests for lab in h.labels]
        already = flags.pop()
        if normalize and not already:
            x = normalize_rows(x)
        present = set(labels)
        class_set = tuple(c for c in _CLASS_ORDER if c in present)
        return cls(
            profiles=x,
            labels=labels,
            class_set=class_set,
            normalized=already or normalize,
        )

    def label_indices(self):
        index = {c: i for i, c in enumerate(self.class_set)}
        return np.array([index[lab] for lab in self.labels], dtype=np.int64)

    @property
    def dimension(self):
        return self.profiles.shape[1]


@dataclass
class ClassWeights:
    """Per-class weights w_c = M / (|class_set| * count_c)."""

    weights: dict

    def per_item(self, dataset):
        return np.array([self.weights[lab] for lab in dataset.labels])


def class_weights(dataset):
    """Weights that give every class equal total influence.

    With these, sum_c w_c * count_c = M exactly, and a class counted
    once weighs |class_set| times less than the whole set.
    """
    if len(dataset.class_set) < 2:
        raise ValueError("class weighting needs at least two classes")
    m = len(dataset.labels)
    k = len(dataset.class_set)
    weights = {}
    for c in dataset.class_set:
        count = sum(lab is c for lab in dataset.labels)
        if count == 0:
            raise ValueError(f"class {c} has no items")
        weights[c] = m / (k * count)
    return ClassWeights(weights=weights)


def default_ratio_k(n):
    """The paper's operating point: the most/least stable tenth."""
    return max(1, int(np.floor(0.1 * n)))


def _ratio_values(x, k):
    n = x.shape[1]
    if k < 1 or 2 * k > n:
        raise ValueError(f"k must satisfy 1 <= k and 2k <= N, got k={k}, N={n}")
    s = np.sort(x, axis=1)
    num = s[:, :k].sum(axis=1)
    den = s[:, -k:].sum(axis=1)
    small = np.abs(den) < _RATIO_EPS
    den = np.where(small, np.copysign(_RATIO_EPS, den), den)
    return num / den


def stability_ratio(profile, k):
    """Sum of the k smallest energies over the sum of the k largest.

    A stable state has all energies negative, pushing the ratio toward
    +1 and beyond; unstable states mix signs and drive it negative. A
    near-zero denominator is clamped to +-1e-12, keeping its sign.
    """
    x = profile.values if isinstance(profile, EnergyProfile) else np.asarray(profile)
    return float(_ratio_values(np.atleast_2d(np.asarray(x, dtype=np.float64)), k)[0])


# ---------------------------------------------------------------------------
# shared softmax network engine (also the logistic regression with no hidden
# layer), used by train_nn, train_dam, and train_stability_ratio


def _init_layers(layer_sizes, rng):
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        params.append([w, np.zeros(fan_out)])
    return params


def _forward(params, x):
    acts = [x]
    h = x
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = z if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def nn_loss_and_grad(params, x, y_idx, item_weights, lam):
    """Weighted-mean softmax cross-entropy plus lam * sum of squared params.

    Returns (loss, grads) with grads shaped like params. Exposed so the
    analytic gradient can be checked against finite differences.
    """
    acts = _forward(params, x)
    logits = acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    wsum = item_weights.sum()
    ce = -logp[np.arange(x.shape[0]), y_idx]
    loss = float(np.dot(item_weights, ce) / wsum)
    for w, b in params:
        loss += lam * float((w * w).sum() + (b * b).sum())

    probs = np.exp(logp)
    delta = probs
    delta[np.arange(x.shape[0]), y_idx] -= 1.0
    delta *= (item_weights / wsum)[:, None]
    grads = []
    for i in reversed(range(len(params))):
        w, b = params[i]
        a_in = acts[i]
        gw = delta.T @ a_in + 2.0 * lam * w
        gb = delta.sum(axis=0) + 2.0 * lam * b
        grads.append([gw, gb])
        if i > 0:
            delta = (delta @ w) * (acts[i] > 0.0)
    grads.reverse()
    return loss, grads


def _adam_train(params, x, y_idx, item_weights, lam, lr, epochs, batch_size, rng):
    moments = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params]
    velocities = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0
    m = x.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(m)
        for start in range(0, m, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = nn_loss_and_grad(params, x[idx], y_idx[idx], item_weights[idx], lam)
            if not np.isfinite(loss):
                raise ValueError(f"non-finite loss at epoch {epoch}, step {t}")
            t += 1
            corr1 = 1.0 - b1**t
            corr2 = 1.0 - b2**t
            for p, mo, ve, g in zip(params, moments, velocities, grads):
                for j in range(2):
                    mo[j] = b1 * mo[j] + (1 - b1) * g[j]
                    ve[j] = b2 * ve[j] + (1 - b2) * g[j] ** 2
                    p[j] -= lr * (mo[j] / corr1) / (np.sqrt(ve[j] / corr2) + eps)
    return params


@dataclass
class LinearModel:
    """One coefficient row and bias per class; scores = coef @ x + bias."""

    coef: np.ndarray
    bias: np.ndarray
    kind: str
    class_set: tuple
    normalized: bool = False


@dataclass
class DeepModel:
    layer_sizes: tuple
    weights: list
    biases: list
    class_set: tuple
    normalized: bool = False


@dataclass
class KernelModel:
    """RBF one-vs-rest machine: scores = dual @ k(x, supports) + bias."""

    supports: np.ndarray
    dual: np.ndarray
    gamma: float
    bias: np.ndarray
    class_set: tuple
    normalized: bool = False


@dataclass
class StabilityRatioModel:
    """Multinomial logistic regression on the scalar stability ratio."""

    k: int
    coef: np.ndarray
    bias: np.ndarray
    class_set: tuple
    normalized: bool = False
    l2_strength: float = 1.0


@dataclass
class DamModel:
    """Hidden rows are memory vectors, sorted by output-weight magnitude."""

    memories: np.ndarray
    output: np.ndarray
    hidden_bias: np.ndarray
    bias: np.ndarray
    class_set: tuple
    normalized: bool = False


def train_nn(dataset, layer_sizes, lam=10.0, lr=1e-3, seed=0, epochs=200, batch_size=256):
    """Train a softmax network on the profiles.

    layer_sizes must start at the profile length and end at the number
    of classes. Two entries give a plain linear-softmax model whose
    coefficient rows map one-to-one onto classes.
    """
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if layer_sizes[0] != dataset.dimension:
        raise ValueError(
            f"layer_sizes starts at {layer_sizes[0]} but profiles have length {dataset.dimension}"
        )
    if layer_sizes[-1] != len(dataset.class_set):
        raise ValueError(
            f"layer_sizes ends at {layer_sizes[-1]} but there are {len(dataset.class_set)} classes"
        )
    rng = np.random.default_rng(seed)
    params = _init_layers(layer_sizes, rng)
    wts = class_weights(dataset).per_item(dataset)
    params = _adam_train(
        params, dataset.profiles, dataset.label_indices(), wts, lam, lr, epochs, batch_size, rng
    )
    if len(layer_sizes) == 2:
        return LinearModel(
            coef=params[0][0],
            bias=params[0][1],
            kind="neural-softmax",
            class_set=dataset.class_set,
            normalized=dataset.normalized,
        )
    return DeepModel(
        layer_sizes=layer_sizes,
        weights=[w for w, _ in params],
        biases=[b for _, b in params],
        class_set=dataset.class_set,
        normalized=dataset.normalized,
    )


def train_dam(dataset, memories=128, lr=1e-3, lam=10.0, seed=0, epochs=200, batch_size=256):
    """Train the associative-memory classifier.

    Identical to train_nn with layer sizes (N, memories, classes); the
    hidden rows are returned sorted by the magnitude of their outgoing
    weights, strongest memory first.
    """
    if memories < 1:
        raise ValueError("memories must be at least 1")
    model = train_nn(
        dataset,
        (dataset.dimension, memories, len(dataset.class_set)),
        lam=lam,
        lr=lr,
        seed=seed,
        epochs=epochs,
        batch_size=batch_size,
    )
    hidden_w, out_w = model.weights
    hidden_b, out_b = model.biases
    order = np.argsort(-np.linalg.norm(out_w, axis=0), kind="stable")
    return DamModel(
        memories=hidden_w[order],
        output=out_w[:, order],
        hidden_bias=hidden_b[order],
        bias=out_b,
        class_set=dataset.class_set,
        normalized=dataset.normalized,
    )


def _flatten(params):
    return np.concatenate([p.ravel() for pair in params for p in pair])


def _unflatten(theta, shapes):
    out, pos = [], 0
    for sw, sb in shapes:
        nw = int(np.prod(sw))
        w = theta[pos : pos + nw].reshape(sw)
        pos += nw
        nb = int(np.prod(sb))
        b = theta[pos : pos + nb].reshape(sb)
        pos += nb
        out.append([w, b])
    return out


def train_stability_ratio(dataset, seed=0):
    """Logistic regression on the stability ratio, L2 strength 1.0.

    The single scalar feature makes this convex, so it starts from zero
    parameters and runs a quasi-Newton solver to tight tolerance.
    """
    if len(dataset.class_set) < 2:
        raise ValueError("need at least two classes")
    k = default_ratio_k(dataset.dimension)
    feats = _ratio_values(dataset.profiles, k)[:, None]
    if not np.isfinite(feats).all():
        raise ValueError("non-finite stability-ratio features")
    y = dataset.label_indices()
    wts = class_weights(dataset).per_item(dataset)
    c = len(dataset.class_set)
    shapes = [((c, 1), (c,))]

    def objective(theta):
        params = _unflatten(theta, shapes)
        loss, grads = nn_loss_and_grad(params, feats, y, wts, 1.0)
        return loss, _flatten(grads)

    res = minimize(
        objective,
        np.zeros(2 * c),
        jac=True,
        method="L-BFGS-B",
        options={"gtol": 1e-6, "maxiter": 10_000, "maxfun": 50_000},
    )
    params = _unflatten(res.x, shapes)
    return StabilityRatioModel(
        k=k,
        coef=params[0][0].ravel(),
        bias=params[0][1],
        class_set=dataset.class_set,
        normalized=dataset.normalized,
    )


def _svm_linear_objective(theta, x, y, wt, c_param):
    w, b = theta[:-1], theta[-1]
    f = x @ w + b
    slack = np.maximum(1.0 - y * f, 0.0)
    loss = c_param * float(np.dot(wt, slack * slack)) + float(w @ w) + b * b
    dfd = c_param * wt * 2.0 * slack * (-y)
    grad_w = x.T @ dfd + 2.0 * w
    grad_b = dfd.sum() + 2.0 * b
    return loss, np.concatenate([grad_w, [grad_b]])


def _svm_kernel_objective(theta, kmat, y, wt, c_param):
    alpha, b = theta[:-1], theta[-1]
    ka = kmat @ alpha
    f = ka + b
    slack = np.maximum(1.0 - y * f, 0.0)
    loss = c_param * float(np.dot(wt, slack * slack)) + float(alpha @ ka)
    dfd = c_param * wt * 2.0 * slack * (-y)
    grad_a = kmat @ (dfd + 2.0 * alpha)
    grad_b = dfd.sum()
    return loss, np.concatenate([grad_a, [grad_b]])


def _rbf_kernel(a, b, gamma, block=4096):
    out = np.empty((a.shape[0], b.shape[0]))
    bb = (b * b).sum(axis=1)
    for start in range(0, a.shape[0], block):
        chunk = a[start : start + block]
        d2 = (chunk * chunk).sum(axis=1)[:, None] + bb[None, :] - 2.0 * (chunk @ b.T)
        np.maximum(d2, 0.0, out=d2)
        out[start : start + block] = np.exp(-gamma * d2)
    return out


def _solve(objective, x0):
    res = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"gtol": 1e-6, "maxiter": 10_000, "maxfun": 50_000},
    )
    return res.x


def train_svm(dataset, kernel="linear", c_param=0.001, gamma=None, seed=0):
    """One-vs-rest squared-hinge SVMs.

    Every class gets a binary separator against the rest with margin
    target +-1; prediction takes the argmax of the per-class decision
    values. C multiplies the weighted data term, so small C regularizes
    hard. The RBF bandwidth defaults to 1 / (N * mean feature variance).
    The kernel machine optimizes a dual coefficient per training row and
    prunes rows whose coefficients all vanish.
    """
    if c_param <= 0:
        raise ValueError("c_param must be positive")
    if kernel not in ("linear", "rbf"):
        raise ValueError(f"unknown kernel {kernel!r}")
    x = dataset.profiles
    y_idx = dataset.label_indices()
    wts = class_weights(dataset).per_item(dataset)
    n_class = len(dataset.class_set)

    if kernel == "linear":
        coef = np.zeros((n_class, x.shape[1]))
        bias = np.zeros(n_class)
        for ci in range(n_class):
            y = np.where(y_idx == ci, 1.0, -1.0)
            theta = _solve(
                lambda t: _svm_linear_objective(t, x, y, wts, c_param),
                np.zeros(x.shape[1] + 1),
            )
            coef[ci] = theta[:-1]
            bias[ci] = theta[-1]
        return LinearModel(
            coef=coef,
            bias=bias,
            kind="svm-ovr",
            class_set=dataset.class_set,
            normalized=dataset.normalized,
        )

    if gamma is None:
        mean_var = float(x.var(axis=0).mean())
        if mean_var <= 0:
            raise ValueError("cannot derive gamma from zero-variance features")
        gamma = 1.0 / (x.shape[1] * mean_var)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    kmat = _rbf_kernel(x, x, gamma)
    dual = np.zeros((n_class, x.shape[0]))
    bias = np.zeros(n_class)
    for ci in range(n_class):
        y = np.where(y_idx == ci, 1.0, -1.0)
        theta = _solve(
            lambda t: _svm_kernel_objective(t, kmat, y, wts, c_param),
            np.zeros(x.shape[0] + 1),
        )
        dual[ci] = theta[:-1]
        bias[ci] = theta[-1]
    keep = (np.abs(dual) >= 1e-8).any(axis=0)
    return KernelModel(
        supports=x[keep].copy(),
        dual=dual[:, keep].copy(),
        gamma=float(gamma),
        bias=bias,
        class_set=dataset.class_set,
        normalized=dataset.normalized,
    )


def decision_values(model, x):
    """Per-class scores for a matrix of profiles, one row per profile."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model, LinearModel):
        return x @ model.coef.T + model.bias
    if isinstance(model, DeepModel):
        h = x
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = h @ w.T + b
            h = z if i == len(model.weights) - 1 else np.maximum(z, 0.0)
        return h
    if isinstance(model, StabilityRatioModel):
        r = _ratio_values(x, model.k)
        return r[:, None] * model.coef + model.bias
    if isinstance(model, KernelModel):
        kmat = _rbf_kernel(x, model.supports, model.gamma)
        return kmat @ model.dual.T + model.bias
    if isinstance(model, DamModel):
        h = np.maximum(x @ model.memories.T + model.hidden_bias, 0.0)
        return h @ model.output.T + model.bias
    raise TypeError(f"unknown model type {type(model).__name__}")


def _input_width(model):
    if isinstance(model, LinearModel):
        return model.coef.shape[1]
    if isinstance(model, DeepModel):
        return model.layer_sizes[0]
    if isinstance(model, StabilityRatioModel):
        return None  # any width that satisfies 2k <= N
    if isinstance(model, KernelModel):
        return model.supports.shape[1]
    if isinstance(model, DamModel):
        return model.memories.shape[1]
    raise TypeError(f"unknown model type {type(model).__name__}")


def predict_many(model, x, normalized=None):
    """Predicted StateClass for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if normalized is not None and normalized != model.normalized:
        state = "normalized" if model.normalized else "raw"
        raise ValueError(f"model was trained on {state} profiles")
    width = _input_width(model)
    if width is not None and x.shape[1] != width:
        raise ValueError(f"profile length {x.shape[1]} does not match model width {width}")
    scores = decision_values(model, x)
    picks = scores.argmax(axis=1)
    return [model.class_set[i] for i in picks]


def predict(model, profile):
    """Predicted StateClass for one profile; ties break by class_set order."""
    if isinstance(profile, EnergyProfile):
        return predict_many(model, profile.values[None, :], normalized=profile.normalized)[0]
    return predict_many(model, np.asarray(profile)[None, :])[0]
