"""PointNet segmentation network with optional input/feature transform nets.

Architecture (widths are defaults; the reduced variant halves all of them)::

    xyz --[input TNet 3x3]--+
                            +-- concat(xyz', rcs, doppler)
    shared MLP (64, 64) -> local --[feature TNet 64x64]--> local'
    shared MLP (64, 128, 1024) -> max over points -> global
    concat(local', tiled global) -> shared MLP (512, 256, 128) -> linear -> 5 logits

The concatenation with the tiled global feature is never materialised: the
first segmentation layer splits its weight matrix into a per-point block and
a per-sample block, which is mathematically identical and avoids a
(batch, points, 1088) intermediate.

Everything runs on the numpy kernels in :mod:`radarseg.tensor` with a
hand-written backward pass; :func:`loss_and_grads` is the single entry point
used by both training and gradient checks.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import tensor as T
from ._validation import check_labels, check_samples
from .config import VARIANTS, ConfigError
from .returns import CLASS_CODES, N_CLASSES

log = logging.getLogger(__name__)

DEFAULT_WIDTHS = {
    "tnet_conv": (64, 128, 1024),
    "tnet_fc": (512, 256),
    "mlp1": (64, 64),
    "mlp2": (64, 128, 1024),
    "seg": (512, 256, 128),
}
_TNETS = {
    "full": (True, True),
    "one-tnet": (True, False),
    "one-tnet-reduced": (True, False),
    "no-tnet": (False, False),
}
N_INPUT = 5
N_SPATIAL = 3


@dataclass(frozen=True)
class NetworkConfig:
    variant: str = "one-tnet"
    widths: tuple = ()
    num_classes: int = N_CLASSES

    @classmethod
    def build(cls, variant="one-tnet", widths=None, num_classes=N_CLASSES) -> "NetworkConfig":
        if variant not in _TNETS:
            raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        base = dict(DEFAULT_WIDTHS)
        for k, v in (widths or {}).items():
            if k not in base:
                raise ConfigError(f"unknown width group {k!r}")
            base[k] = tuple(int(x) for x in v)
        if any(w <= 0 for v in base.values() for w in v):
            raise ConfigError("layer widths must be positive")
        scale = 0.5 if variant == "one-tnet-reduced" else 1.0
        resolved = {k: tuple(max(1, int(round(w * scale))) for w in v) for k, v in base.items()}
        if len(resolved["tnet_conv"]) < 1 or len(resolved["mlp1"]) < 1 or len(resolved["mlp2"]) < 1:
            raise ConfigError("tnet_conv, mlp1 and mlp2 need at least one layer")
        return cls(variant, tuple(sorted(resolved.items())), num_classes)

    @property
    def width(self) -> dict:
        return dict(self.widths)

    @property
    def input_tnet(self) -> bool:
        return _TNETS[self.variant][0]

    @property
    def feature_tnet(self) -> bool:
        return _TNETS[self.variant][1]

    @property
    def width_scale(self) -> float:
        return 0.5 if self.variant == "one-tnet-reduced" else 1.0


# -- parameters ------------------------------------------------------------------

def _layer_shapes(cfg: NetworkConfig):
    """Ordered (name, fan_in, fan_out, kind) for every affine layer."""
    w = cfg.width
    out = []

    def tnet(prefix, k_in, k):
        c = k_in
        for i, width in enumerate(w["tnet_conv"]):
            out.append((f"{prefix}.conv{i}", c, width, "relu"))
            c = width
        for i, width in enumerate(w["tnet_fc"]):
            out.append((f"{prefix}.fc{i}", c, width, "relu"))
            c = width
        out.append((f"{prefix}.out", c, k * k, "tnet_out"))

    if cfg.input_tnet:
        tnet("tin", N_SPATIAL, N_SPATIAL)
    c = N_INPUT
    for i, width in enumerate(w["mlp1"]):
        out.append((f"mlp1.{i}", c, width, "relu"))
        c = width
    local = c
    if cfg.feature_tnet:
        tnet("tfeat", local, local)
    for i, width in enumerate(w["mlp2"]):
        out.append((f"mlp2.{i}", c, width, "relu"))
        c = width
    c = local + c
    for i, width in enumerate(w["seg"]):
        out.append((f"seg.{i}", c, width, "relu"))
        c = width
    out.append(("head", c, cfg.num_classes, "linear"))
    return out


def init_params(cfg: NetworkConfig, seed=0, dtype=np.float32) -> dict:
    """Uniform fan-in initialisation; transform nets start as the identity."""
    gen = np.random.default_rng(seed)
    params = {}
    for name, fan_in, fan_out, kind in _layer_shapes(cfg):
        if kind == "tnet_out":
            k = int(round(np.sqrt(fan_out)))
            params[f"{name}.W"] = np.zeros((fan_in, fan_out), dtype)
            params[f"{name}.b"] = np.eye(k, dtype=dtype).reshape(-1)
            continue
        limit = np.sqrt((6.0 if kind == "relu" else 1.0) / fan_in)
        params[f"{name}.W"] = gen.uniform(-limit, limit, (fan_in, fan_out)).astype(dtype)
        params[f"{name}.b"] = np.zeros(fan_out, dtype)
    return params


def param_count(variant="one-tnet", widths=None) -> int:
    """Number of trainable scalars of a variant."""
    cfg = NetworkConfig.build(variant, widths)
    return sum(fi * fo + fo for _, fi, fo, _ in _layer_shapes(cfg))


# -- forward / backward -----------------------------------------------------------

def _point_layers(x, params, names, acc, tape):
    for name in names:
        h = T.relu(T.conv1d_k1(x, params[f"{name}.W"], params[f"{name}.b"], accumulate=acc))
        tape.append((name, x, h))
        x = h
    return x


def _point_layers_back(dh, params, tape, grads, need_dx=True):
    for i, (name, x, h) in enumerate(reversed(tape)):
        dz = T.relu_backward(h, dh)
        last = i == len(tape) - 1
        if last and not need_dx:
            b, n, c = x.shape
            d2 = dz.reshape(b * n, -1)
            grads[f"{name}.W"] = x.reshape(b * n, c).T @ d2
            grads[f"{name}.b"] = d2.sum(axis=0)
            return None
        dh, grads[f"{name}.W"], grads[f"{name}.b"] = T.conv1d_k1_backward(x, params[f"{name}.W"], dz)
    return dh


def _fc_layers(x, params, names, tape):
    for name in names:
        h = T.relu(T.matmul(x, params[f"{name}.W"]) + params[f"{name}.b"])
        tape.append((name, x, h))
        x = h
    return x


def _fc_layers_back(dh, params, tape, grads):
    for name, x, h in reversed(tape):
        dz = T.relu_backward(h, dh)
        dh, grads[f"{name}.W"] = T.matmul_backward(x, params[f"{name}.W"], dz)
        grads[f"{name}.b"] = dz.sum(axis=0)
    return dh


def _names(cfg, prefix, group=None):
    if group is not None:
        return [f"{prefix}.{group}{i}" for i in range(len(cfg.width["tnet_" + group]))]
    return [f"{prefix}.{i}" for i in range(len(cfg.width[prefix]))]


def _tnet_forward(x, params, cfg, prefix, k, acc):
    conv_tape, fc_tape = [], []
    h = _point_layers(x, params, _names(cfg, prefix, "conv"), acc, conv_tape)
    g, arg = T.maxpool_points(h)
    f = _fc_layers(g, params, _names(cfg, prefix, "fc"), fc_tape)
    flat = T.matmul(f, params[f"{prefix}.out.W"]) + params[f"{prefix}.out.b"]
    A = flat.reshape(-1, k, k)
    return A, (conv_tape, fc_tape, arg, h.shape[1], f)


def _tnet_backward(dA, params, cache, prefix, grads, need_dx):
    conv_tape, fc_tape, arg, n, f = cache
    dflat = dA.reshape(dA.shape[0], -1)
    df, grads[f"{prefix}.out.W"] = T.matmul_backward(f, params[f"{prefix}.out.W"], dflat)
    grads[f"{prefix}.out.b"] = dflat.sum(axis=0)
    dg = _fc_layers_back(df, params, fc_tape, grads)
    dh = T.maxpool_points_backward(dg, arg, n)
    return _point_layers_back(dh, params, conv_tape, grads, need_dx=need_dx)


def orthogonality(A):
    """Per-sample ``||I - A A^T||_F^2`` and the residual ``A A^T - I``."""
    k = A.shape[-1]
    M = T.bmm(A, np.swapaxes(A, 1, 2)) - np.eye(k, dtype=A.dtype)
    return (M.astype(np.float64) ** 2).sum(axis=(1, 2)), M


def forward(params, cfg: NetworkConfig, X, fused_concat=True, accumulate=None):
    """Logits (batch, points, classes) plus the tape needed by :func:`backward`."""
    X = np.asarray(X)
    cache = {}
    xyz, rest = X[:, :, :N_SPATIAL], X[:, :, N_SPATIAL:]
    if cfg.input_tnet:
        A_in, cache["tin"] = _tnet_forward(xyz, params, cfg, "tin", N_SPATIAL, accumulate)
        cache["A_in"], cache["xyz"] = A_in, xyz
        xyz = T.bmm(xyz, A_in)
    h0 = T.concat(xyz, rest)
    tape1 = []
    local = _point_layers(h0, params, _names(cfg, "mlp1", None), accumulate, tape1)
    cache["mlp1"] = tape1
    if cfg.feature_tnet:
        A_f, cache["tfeat"] = _tnet_forward(local, params, cfg, "tfeat", local.shape[2], accumulate)
        cache["A_f"], cache["local_pre"] = A_f, local
        local = T.bmm(local, A_f)
    cache["local"] = local
    tape2 = []
    g_pts = _point_layers(local, params, _names(cfg, "mlp2", None), accumulate, tape2)
    cache["mlp2"] = tape2
    g, arg = T.maxpool_points(g_pts)
    cache["pool"] = (arg, g_pts.shape[1])
    cache["global"] = g

    c = local.shape[2]
    W0, b0 = params["seg.0.W"], params["seg.0.b"]
    if fused_concat:
        z0 = T.conv1d_k1(local, W0[:c], b0, accumulate=accumulate)
        z0 += T.matmul(g, W0[c:])[:, None, :]
    else:
        tiled = np.broadcast_to(g[:, None, :], local.shape[:2] + g.shape[1:])
        z0 = T.conv1d_k1(T.concat(local, tiled), W0, b0, accumulate=accumulate)
    h = T.relu(z0)
    cache["seg0"] = h
    seg_tape = []
    h = _point_layers(h, params, _names(cfg, "seg", None)[1:], accumulate, seg_tape)
    cache["seg"] = seg_tape
    cache["head_in"] = h
    logits = T.conv1d_k1(h, params["head.W"], params["head.b"], accumulate=accumulate)
    return logits, cache


def backward(params, cfg: NetworkConfig, cache, dlogits, dA_f=None) -> dict:
    grads = {}
    dh, grads["head.W"], grads["head.b"] = T.conv1d_k1_backward(cache["head_in"], params["head.W"], dlogits)
    dh = _point_layers_back(dh, params, cache["seg"], grads)
    dz0 = T.relu_backward(cache["seg0"], dh)
    local, g = cache["local"], cache["global"]
    c = local.shape[2]
    W0 = params["seg.0.W"]
    b, n, _ = local.shape
    d2 = dz0.reshape(b * n, -1)
    dsum = dz0.sum(axis=1)
    dlocal = (d2 @ W0[:c].T).reshape(local.shape)
    dg = dsum @ W0[c:].T
    grads["seg.0.W"] = np.concatenate([local.reshape(b * n, c).T @ d2, g.T @ dsum], axis=0)
    grads["seg.0.b"] = d2.sum(axis=0)

    arg, npts = cache["pool"]
    dg_pts = T.maxpool_points_backward(dg, arg, npts)
    dlocal += _point_layers_back(dg_pts, params, cache["mlp2"], grads)
    if cfg.feature_tnet:
        local_pre, A_f = cache["local_pre"], cache["A_f"]
        dpre, dA = T.bmm_backward(local_pre, A_f, dlocal)
        if dA_f is not None:
            dA = dA + dA_f
        dpre += _tnet_backward(dA, params, cache["tfeat"], "tfeat", grads, need_dx=True)
        dlocal = dpre
    dh0 = _point_layers_back(dlocal, params, cache["mlp1"], grads)
    if cfg.input_tnet:
        dxyz_t = dh0[:, :, :N_SPATIAL]
        _, dA_in = T.bmm_backward(cache["xyz"], cache["A_in"], dxyz_t)
        _tnet_backward(dA_in, params, cache["tin"], "tin", grads, need_dx=False)
    return grads


def loss_and_grads(params, cfg: NetworkConfig, X, targets, reg_weight=1e-3, fused_concat=True,
                   accumulate=None, need_grads=True):
    """Total loss, its parameter gradients and the regulariser value.

    ``targets`` are zero-based class indices (batch, points). The loss is the
    mean per-point cross-entropy plus ``reg_weight`` times the batch mean of
    the feature-transform orthogonality penalty.
    """
    logits, cache = forward(params, cfg, X, fused_concat=fused_concat, accumulate=accumulate)
    ce, dlogits = T.cross_entropy(logits, targets)
    reg = 0.0
    dA_f = None
    if cfg.feature_tnet:
        per, M = orthogonality(cache["A_f"])
        reg = float(per.mean())
        if reg_weight:
            dA_f = (reg_weight * 4.0 / len(per)) * T.bmm(M, cache["A_f"])
    total = ce + reg_weight * reg
    if not need_grads:
        return total, None, reg
    grads = backward(params, cfg, cache, dlogits.astype(logits.dtype), dA_f)
    return total, grads, reg


def loss_value(logits, labels, tnet_matrices=None, reg_weight=1e-3) -> float:
    """Stand-alone loss for logits and 1-based labels (no gradients)."""
    labels = check_labels(labels, shape=np.shape(logits)[:-1])
    ce, _ = T.cross_entropy(np.asarray(logits, dtype=np.float64), labels - 1)
    reg = 0.0
    if tnet_matrices is not None and len(tnet_matrices):
        reg = float(orthogonality(np.asarray(tnet_matrices, dtype=np.float64))[0].mean())
    return ce + reg_weight * reg


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            params[k] -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)


# -- estimator -----------------------------------------------------------------------

class PointNetSegmenter(ClassifierMixin, BaseEstimator):
    """Per-point classifier over fixed-size radar samples.

    ``X`` has shape (n_samples, pc, 5), already normalised; ``y`` holds class
    codes 1..5 with shape (n_samples, pc). When validation data is supplied,
    training stops once validation loss has not improved by more than
    ``min_delta`` for ``patience`` epochs and the best parameters are kept.
    """

    def __init__(self, variant="one-tnet", widths=None, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 adam_eps=1e-8, batch_size=32, max_epochs=100, patience=10, min_delta=1e-4,
                 reg_weight=1e-3, random_state=0, dtype="float32", fused_concat=True,
                 max_seconds=None, verbose=0):
        self.variant = variant
        self.widths = widths
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.reg_weight = reg_weight
        self.random_state = random_state
        self.dtype = dtype
        self.fused_concat = fused_concat
        self.max_seconds = max_seconds
        self.verbose = verbose

    def _prepare(self, X, y=None):
        X = check_samples(X, dtype=np.dtype(self.dtype))
        if y is None:
            return X, None
        return X, check_labels(y, shape=X.shape[:2]) - 1

    def _init(self, cfg=None):
        self.config_ = cfg or NetworkConfig.build(self.variant, self.widths)
        self.params_ = init_params(self.config_, seed=[int(self.random_state), 1], dtype=np.dtype(self.dtype))
        self.classes_ = CLASS_CODES.copy()
        self.n_features_in_ = N_INPUT

    def fit(self, X, y, X_val=None, y_val=None):
        X, t = self._prepare(X, y)
        if len(X) == 0:
            raise ValueError("empty training set")
        has_val = X_val is not None and y_val is not None
        if has_val:
            Xv, tv = self._prepare(X_val, y_val)
        if self.batch_size <= 0 or self.max_epochs <= 0:
            raise ConfigError("batch_size and max_epochs must be positive")
        self._init()
        params = self.params_
        opt = Adam(params, self.learning_rate, self.beta1, self.beta2, self.adam_eps)
        gen = np.random.default_rng([int(self.random_state), 2])
        best, best_params, wait = np.inf, None, 0
        self.history_ = []
        started = time.perf_counter()
        for epoch in range(1, self.max_epochs + 1):
            t0 = time.perf_counter()
            order = gen.permutation(len(X))
            tot, regs, seen = 0.0, 0.0, 0
            for s in range(0, len(X), self.batch_size):
                idx = order[s:s + self.batch_size]
                loss, grads, reg = loss_and_grads(params, self.config_, X[idx], t[idx], self.reg_weight,
                                                  fused_concat=self.fused_concat)
                opt.step(params, grads)
                tot += loss * len(idx)
                regs += reg * len(idx)
                seen += len(idx)
            train_loss = tot / seen
            row = {"epoch": epoch, "train_loss": train_loss, "reg": regs / seen}
            if has_val:
                val_loss, val_acc = self._evaluate(Xv, tv)
                row.update(val_loss=val_loss, val_accuracy=val_acc)
                monitor = val_loss
            else:
                row.update(val_loss=float("nan"), val_accuracy=float("nan"))
                monitor = train_loss
            if monitor < best - self.min_delta:
                best, wait = monitor, 0
                best_params = {k: v.copy() for k, v in params.items()}
            else:
                wait += 1
            row["best_val_loss"] = best
            row["seconds"] = time.perf_counter() - t0
            self.history_.append(row)
            if self.verbose:
                log.info("epoch %d train %.4f val %.4f acc %.4f (%.1fs)", epoch, train_loss,
                         row["val_loss"], row["val_accuracy"], row["seconds"])
            if wait >= self.patience:
                break
            if self.max_seconds is not None and time.perf_counter() - started > self.max_seconds:
                log.warning("stopping after %.0fs wall-clock budget", time.perf_counter() - started)
                break
        if best_params is not None:
            self.params_ = best_params
        self.n_epochs_ = len(self.history_)
        return self

    def _evaluate(self, X, t, batch=64):
        tot, correct = 0.0, 0
        for s in range(0, len(X), batch):
            logits, _ = forward(self.params_, self.config_, X[s:s + batch], self.fused_concat)
            ce, _ = T.cross_entropy(logits, t[s:s + batch])
            tot += ce * t[s:s + batch].size
            correct += int((logits.argmax(-1) == t[s:s + batch]).sum())
        return tot / t.size, correct / t.size

    def decision_function(self, X, batch=64):
        check_is_fitted(self, "params_")
        X, _ = self._prepare(X)
        out = [forward(self.params_, self.config_, X[s:s + batch], self.fused_concat)[0]
               for s in range(0, len(X), batch)]
        return np.concatenate(out, axis=0) if out else np.zeros((0, X.shape[1], N_CLASSES), X.dtype)

    def predict_proba(self, X):
        return T.softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(-1)]

    def score(self, X, y, sample_weight=None):
        y = check_labels(y)
        return float(np.mean(self.predict(X) == y))

    def transforms(self, X):
        """Input and feature transform matrices for ``X`` (``None`` where absent)."""
        check_is_fitted(self, "params_")
        X, _ = self._prepare(X)
        _, cache = forward(self.params_, self.config_, X, self.fused_concat)
        return cache.get("A_in"), cache.get("A_f")

    @property
    def n_params_(self) -> int:
        check_is_fitted(self, "params_")
        return int(sum(v.size for v in self.params_.values()))

    def history_frame(self):
        """Training history as a list of ordered rows (CSV friendly)."""
        check_is_fitted(self, "history_")
        return [dict(r) for r in self.history_]

    @classmethod
    def from_params(cls, params: dict, config: NetworkConfig, **kwargs) -> "PointNetSegmenter":
        """Rebuild a fitted estimator from stored parameters."""
        est = cls(variant=config.variant, **kwargs)
        est._init(config)
        missing = set(est.params_) - set(params)
        extra = set(params) - set(est.params_)
        if missing or extra:
            raise ValueError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, v in params.items():
            if v.shape != est.params_[k].shape:
                raise ValueError(f"parameter {k} has shape {v.shape}, expected {est.params_[k].shape}")
            est.params_[k] = np.asarray(v, dtype=np.dtype(est.dtype)).copy()
        est.history_ = []
        return est
