"""Polytopic autoencoder with a smooth clustering network.

Encoder ``mu(v) = sftmx(F_enc(v) + e1)`` returns ``(rho0, rho)`` on the
simplex; the clustering network ``c(rho) = sftmx(F_clstr(rho) + e1)``
blends ``q`` local bases; the decoder is ``W (c(rho) kron rho)``.  All
layers are bias free with activations through the origin, so the origin
encodes to ``(1, 0)`` and decodes to 0 exactly.

Gradients are hand-written (reverse mode) and checked against finite
differences in the test-suite.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

log = logging.getLogger(__name__)

CE_CLAMP = 1e-12


class DegenerateInputError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch):
        super().__init__(f"training loss became NaN at epoch {epoch}")
        self.epoch = epoch


# softmax variant x -> x_i tanh(a x_i) / sum_j x_j tanh(a x_j)


def _g(x, a):
    return x * np.tanh(a * x)


def _dg(x, a):
    t = np.tanh(a * x)
    return t + a * x * (1.0 - t * t)


def softmax_variant(x, a=10.0):
    """Map onto the probability simplex along the last axis."""
    x = np.asarray(x, dtype=float)
    num = _g(x, a)
    den = num.sum(axis=-1, keepdims=True)
    if np.any(den <= 0):
        raise DegenerateInputError("softmax variant undefined for the zero vector")
    return num / den


def _softmax_variant_backward(x, s, gs, a):
    den = _g(x, a).sum(axis=-1, keepdims=True)
    inner = (gs * s).sum(axis=-1, keepdims=True)
    return _dg(x, a) / den * (gs - inner)


# model


def _mlp_forward(weights, X):
    """Bias-free MLP with tanh on hidden layers and a linear output layer."""
    acts = [X]
    A = X
    for i, Wi in enumerate(weights):
        Z = A @ Wi.T
        A = np.tanh(Z) if i < len(weights) - 1 else Z
        acts.append(A)
    return acts


def _mlp_backward(weights, acts, gOut):
    grads = [None] * len(weights)
    g = gOut
    for i in range(len(weights) - 1, -1, -1):
        if i < len(weights) - 1:
            g = g * (1.0 - acts[i + 1] ** 2)
        grads[i] = g.T @ acts[i]
        g = g @ weights[i]
    return grads, g


@dataclass
class PolytopicAutoencoder:
    """Weights and dimensions of a polytopic autoencoder.

    ``enc`` and ``clu`` hold weight matrices of shape ``(out, in)``.  For
    ``q = 1`` the clustering network is empty since ``c`` is identically 1.
    """

    n: int
    r: int
    q: int
    enc: list
    clu: list
    W: np.ndarray
    a: float = 10.0
    input_scale: float = 1.0
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def params(self):
        out = {f"enc{i}": w for i, w in enumerate(self.enc)}
        out.update({f"clu{i}": w for i, w in enumerate(self.clu)})
        out["W"] = self.W
        return out

    def copy(self):
        return PolytopicAutoencoder(
            self.n, self.r, self.q, [w.copy() for w in self.enc], [w.copy() for w in self.clu],
            self.W.copy(), self.a, self.input_scale, dict(self.config), list(self.history))


def init_model(n, r, q, a=10.0, seed=0, input_scale=1.0):
    """Seeded uniform initialization scaled by 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)

    def layer(out, inp):
        s = 1.0 / np.sqrt(inp)
        return rng.uniform(-s, s, size=(out, inp))

    enc_widths = [n, 4 * r, 2 * r, r + 1]
    enc = [layer(o, i) for i, o in zip(enc_widths[:-1], enc_widths[1:])]
    clu = []
    if q > 1:
        clu_widths = [r, 2 * q, q]
        clu = [layer(o, i) for i, o in zip(clu_widths[:-1], clu_widths[1:])]
    W = layer(n, q * r)
    return PolytopicAutoencoder(n, r, q, enc, clu, W, float(a), float(input_scale))


def _as_batch(model, V):
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        if V.shape[0] != model.n:
            raise ValueError(f"state must have length {model.n}")
        return V[None, :], True
    if V.shape[0] != model.n:
        raise ValueError(f"snapshots must have {model.n} rows")
    return V.T, False


def _encode_rows(model, X):
    acts = _mlp_forward(model.enc, model.input_scale * X)
    x = acts[-1].copy()
    x[:, 0] += 1.0
    return softmax_variant(x, model.a), x, acts


def _cluster_rows(model, R):
    if model.q == 1:
        return np.ones((R.shape[0], 1)), None, None
    acts = _mlp_forward(model.clu, R)
    y = acts[-1].copy()
    y[:, 0] += 1.0
    return softmax_variant(y, model.a), y, acts


def _kron_rows(c, rho):
    return (c[:, :, None] * rho[:, None, :]).reshape(c.shape[0], -1)


def encode(model, v):
    """Return ``(rho0, rho)``; for an n x N snapshot matrix, arrays of length N and N x r."""
    X, single = _as_batch(model, v)
    mu, _, _ = _encode_rows(model, X)
    if single:
        return float(mu[0, 0]), mu[0, 1:]
    return mu[:, 0], mu[:, 1:]


def cluster_weights(model, rho):
    rho = np.asarray(rho, dtype=float)
    R = np.atleast_2d(rho)
    if R.shape[1] != model.r:
        raise ValueError(f"rho must have length {model.r}")
    c, _, _ = _cluster_rows(model, R)
    return c[0] if rho.ndim == 1 else c


def decode(model, rho):
    """``W (c(rho) kron rho)``; rows of a 2-d ``rho`` decode to columns."""
    rho = np.asarray(rho, dtype=float)
    R = np.atleast_2d(rho)
    if R.shape[1] != model.r:
        raise ValueError(f"rho must have length {model.r}")
    c, _, _ = _cluster_rows(model, R)
    out = _kron_rows(c, R) @ model.W.T
    return out[0] if rho.ndim == 1 else out.T


def reconstruct(model, V):
    """decode(encode(V)) for a state or n x N snapshot matrix."""
    _, rho = encode(model, V)
    return decode(model, rho)


def first_order_decode(model, rho):
    """Linearization ``sum_j rho_j w_j`` of the decoder about 0."""
    return model.W[:, : model.r] @ np.asarray(rho, dtype=float).T


# loss and gradient


def _mnorms(E, M):
    ME = E if M is None else E @ M  # rows; M symmetric
    return np.sqrt(np.maximum((E * ME).sum(axis=1), 0.0)), ME


def loss_and_grad(model, V, labels, lam, M=None, *, need_grad=True):
    """Batch-averaged ``lam ||v~ - v||_M - l . log c(rho)`` and its gradient.

    ``V`` is n x N; ``labels`` is N x q one-hot or None (reconstruction only).
    """
    X, _ = _as_batch(model, V)
    N = X.shape[0]
    mu, x, eacts = _encode_rows(model, X)
    rho = mu[:, 1:]
    c, y, cacts = _cluster_rows(model, rho)
    theta = _kron_rows(c, rho)
    Vt = theta @ model.W.T
    E = Vt - X
    nrm, ME = _mnorms(E, M)
    loss = lam * nrm.mean()
    cc = np.maximum(c, CE_CLAMP)
    if labels is not None:
        labels = np.asarray(labels, dtype=float)
        loss -= (labels * np.log(cc)).sum() / N
    if not need_grad:
        return float(loss), None

    safe = np.where(nrm > 0, nrm, 1.0)
    gVt = np.where(nrm[:, None] > 0, lam / N * ME / safe[:, None], 0.0)
    grads = {"W": gVt.T @ theta}
    gtheta = (gVt @ model.W).reshape(N, model.q, model.r)
    gc = np.einsum("nqr,nr->nq", gtheta, rho)
    grho = np.einsum("nqr,nq->nr", gtheta, c)
    if labels is not None:
        gc = gc - np.where(c > CE_CLAMP, labels / cc, 0.0) / N
    if model.q > 1:
        gy = _softmax_variant_backward(y, c, gc, model.a)
        cg, gin = _mlp_backward(model.clu, cacts, gy)
        grho = grho + gin
        grads.update({f"clu{i}": g for i, g in enumerate(cg)})
    gmu = np.hstack([np.zeros((N, 1)), grho])
    gx = _softmax_variant_backward(x, mu, gmu, model.a)
    eg, _ = _mlp_backward(model.enc, eacts, gx)
    grads.update({f"enc{i}": g for i, g in enumerate(eg)})
    return float(loss), grads


def compute_loss(model, V, labels, lam, M=None):
    return loss_and_grad(model, V, labels, lam, M, need_grad=False)[0]


# training


class Adam:
    def __init__(self, params, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] *= self.beta1
            self.m[k] += (1.0 - self.beta1) * g
            self.v[k] *= self.beta2
            self.v[k] += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * self.m[k] / (np.sqrt(self.v[k] / bc2) + self.eps)


def kmeans_labels(codes, q, seed=0):
    """One-hot k-means labels; the cluster nearest to the origin is first.

    Remaining clusters are ordered by centroid distance to the origin.
    """
    from sklearn.cluster import KMeans

    codes = np.asarray(codes, dtype=float)
    N = codes.shape[0]
    if N < q:
        raise ValueError(f"need at least q={q} codes, got {N}")
    if np.unique(codes, axis=0).shape[0] < q:
        raise ValueError(f"fewer distinct codes than clusters (q={q})")
    if q == 1:
        return np.ones((N, 1))
    km = KMeans(n_clusters=q, init="k-means++", n_init=1, max_iter=300, random_state=seed)
    raw = km.fit_predict(codes)
    order = np.argsort(np.linalg.norm(km.cluster_centers_, axis=1), kind="stable")
    rank = np.empty(q, dtype=int)
    rank[order] = np.arange(q)
    return np.eye(q)[rank[raw]]


@dataclass
class TrainConfig:
    r: int = 5
    q: int = 3
    lam: float = 100.0
    lr: float = 0.005
    epochs: int = 3200
    batch: int = 64
    seed: int = 0
    a: float = 10.0
    warmup_frac: float = 0.1


def train(snapshots, config=None, M=None, **overrides):
    """Train a polytopic autoencoder on an n x N snapshot matrix.

    Protocol: reconstruction-only warm-up for ``warmup_frac`` of the epochs,
    then k-means labels of the warm-up codes are frozen and the combined
    loss is minimized with Adam.  Deterministic per seed.
    """
    cfg = config or TrainConfig()
    if overrides:
        cfg = TrainConfig(**{**cfg.__dict__, **overrides})
    S = np.asarray(snapshots, dtype=float)
    n, N = S.shape
    if N < cfg.batch:
        raise ValueError(f"need at least batch={cfg.batch} snapshots, got {N}")
    amp = np.abs(S).max()
    model = init_model(n, cfg.r, cfg.q, cfg.a, cfg.seed, 1.0 / amp if amp > 0 else 1.0)
    model.config = dict(cfg.__dict__)
    if cfg.epochs == 0:
        return model

    rng = np.random.default_rng(cfg.seed + 1)
    params = model.params()
    opt = Adam(params, lr=cfg.lr)
    warmup = int(round(cfg.warmup_frac * cfg.epochs))
    labels = None if warmup > 0 else kmeans_labels(encode(model, S)[1], cfg.q, cfg.seed)
    model.history.append(compute_loss(model, S, labels, cfg.lam, M))
    for epoch in range(cfg.epochs):
        if epoch == warmup and labels is None:
            labels = kmeans_labels(encode(model, S)[1], cfg.q, cfg.seed)
        perm = rng.permutation(N)
        for start in range(0, N, cfg.batch):
            idx = perm[start:start + cfg.batch]
            lb = None if labels is None else labels[idx]
            loss, grads = loss_and_grad(model, S[:, idx], lb, cfg.lam, M)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            opt.step(params, grads)
        model.history.append(compute_loss(model, S, labels, cfg.lam, M))
        if not np.isfinite(model.history[-1]):
            raise TrainingDivergedError(epoch)
    model.config["labels"] = None if labels is None else labels.argmax(axis=1).tolist()
    return model


# POD baseline


@dataclass
class PodBasis:
    V: np.ndarray
    singular_values: np.ndarray
    M: np.ndarray = None

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def r(self):
        return self.V.shape[1]

    def project(self, X):
        Mx = X if self.M is None else self.M @ X
        return self.V @ (self.V.T @ Mx)


def pod_basis(snapshots, r, M=None):
    """Leading ``r`` M-orthonormal POD modes of an n x N snapshot matrix."""
    S = np.asarray(snapshots, dtype=float)
    n, N = S.shape
    if not 1 <= r <= min(n, N):
        raise ValueError(f"r={r} must lie in [1, {min(n, N)}]")
    if M is None:
        U, s, _ = np.linalg.svd(S, full_matrices=False)
        V = U[:, :r]
    else:
        Lc = np.linalg.cholesky(M)
        U, s, _ = np.linalg.svd(Lc.T @ S, full_matrices=False)
        V = spla.solve_triangular(Lc.T, U[:, :r], lower=False)
    # fix signs for reproducibility
    V = V * np.where(V[np.abs(V).argmax(axis=0), np.arange(r)] < 0, -1.0, 1.0)
    return PodBasis(V, s, M)


def count_parameters(obj):
    """Parameter and layer counts by component."""
    if isinstance(obj, PodBasis):
        return {"scheme": f"POD {obj.r}", "r": obj.r, "q": 1,
                "encoding_params": obj.n * obj.r, "encoding_layers": "1(lin.)",
                "decoding_params": obj.n * obj.r, "decoding_layers": "1"}
    enc = sum(w.size for w in obj.enc)
    clu = sum(w.size for w in obj.clu)
    dec_layers = "1" if obj.q == 1 else f"{len(obj.clu)}(nonl.)+1(lin.)"
    return {"scheme": f"PAE {obj.q} {obj.r}", "r": obj.r, "q": obj.q,
            "encoding_params": enc, "encoding_layers": f"{len(obj.enc)}(nonl.)",
            "decoding_params": clu + obj.W.size, "clustering_params": clu,
            "decoding_layers": dec_layers}
