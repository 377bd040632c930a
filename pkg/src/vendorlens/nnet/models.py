"""Linear and shallow classifiers over sparse/dense feature rows, plus multinomial NB.

Gradient models expose a uniform surface consumed by the training loop and by
finite-difference gradient checking:

    params            dict name -> float64 ndarray (updated in place)
    loss(batch)       scalar cross-entropy, dropout/stochasticity off
    loss_and_grads(batch, train, rng) -> (loss, grads dict)
    predict_proba(X)  (n, K) rows summing to 1

A batch is (X, y, sample_weights-or-None); X may be dense or scipy CSR.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..features import SparseDocMatrix


def as_feature_matrix(X):
    if isinstance(X, SparseDocMatrix):
        return X.csr
    return X


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def cross_entropy_from_logits(logits: np.ndarray, y: np.ndarray, weights=None):
    """Weighted-mean cross entropy; returns (loss, d_loss/d_logits)."""
    n, k = logits.shape
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
    wsum = w.sum()
    probs = softmax_probs(logits)
    picked = np.clip(probs[np.arange(n), y], 1e-300, None)
    loss = float(-(w * np.log(picked)).sum() / wsum)
    dlogits = probs * (w / wsum)[:, np.newaxis]
    dlogits[np.arange(n), y] -= w / wsum
    return loss, dlogits


def _matmul(X, W):
    return X @ W  # works for both ndarray and CSR


class SoftmaxModel:
    """Multinomial logistic regression: logits = X W + b."""

    kind = "softmax"

    def __init__(self, input_dim: int, n_classes: int, seed: int = 1111):
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(input_dim)
        self.input_dim = input_dim
        self.n_classes = n_classes
        self.params = {
            "W": rng.uniform(-scale, scale, size=(input_dim, n_classes)),
            "b": np.zeros(n_classes),
        }

    def _logits(self, X):
        return _matmul(as_feature_matrix(X), self.params["W"]) + self.params["b"]

    def predict_proba(self, X) -> np.ndarray:
        return softmax_probs(self._logits(X))

    def loss(self, batch) -> float:
        X, y, w = batch
        loss, _ = cross_entropy_from_logits(self._logits(X), y, w)
        return loss

    def loss_and_grads(self, batch, train: bool = False, rng=None):
        X, y, w = batch
        Xm = as_feature_matrix(X)
        loss, dlogits = cross_entropy_from_logits(_matmul(Xm, self.params["W"]) + self.params["b"], y, w)
        gW = Xm.T @ dlogits
        if sp.issparse(gW):
            gW = np.asarray(gW.todense())
        grads = {"W": np.asarray(gW), "b": dlogits.sum(axis=0)}
        return loss, grads


class MLPModel:
    """One tanh hidden layer over feature rows: X -> tanh(XW1+b1) -> W2 -> softmax."""

    kind = "mlp"

    def __init__(self, input_dim: int, n_classes: int, hidden: int = 64, seed: int = 1111):
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.n_classes = n_classes
        self.hidden = hidden
        s1 = 1.0 / np.sqrt(input_dim)
        s2 = 1.0 / np.sqrt(hidden)
        self.params = {
            "W1": rng.uniform(-s1, s1, size=(input_dim, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.uniform(-s2, s2, size=(hidden, n_classes)),
            "b2": np.zeros(n_classes),
        }

    def _forward(self, X):
        Xm = as_feature_matrix(X)
        a1 = np.tanh(_matmul(Xm, self.params["W1"]) + self.params["b1"])
        logits = a1 @ self.params["W2"] + self.params["b2"]
        return Xm, a1, logits

    def predict_proba(self, X) -> np.ndarray:
        return softmax_probs(self._forward(X)[2])

    def loss(self, batch) -> float:
        X, y, w = batch
        loss, _ = cross_entropy_from_logits(self._forward(X)[2], y, w)
        return loss

    def loss_and_grads(self, batch, train: bool = False, rng=None):
        X, y, w = batch
        Xm, a1, logits = self._forward(X)
        loss, dlogits = cross_entropy_from_logits(logits, y, w)
        gW2 = a1.T @ dlogits
        da1 = dlogits @ self.params["W2"].T
        dz1 = da1 * (1.0 - a1 * a1)
        gW1 = Xm.T @ dz1
        if sp.issparse(gW1):
            gW1 = np.asarray(gW1.todense())
        grads = {
            "W1": np.asarray(gW1),
            "b1": dz1.sum(axis=0),
            "W2": gW2,
            "b2": dlogits.sum(axis=0),
        }
        return loss, grads


def nb_fit(X, y: np.ndarray, n_classes: int, alpha: float = 1.0):
    """Multinomial NB over raw counts: log-priors + Laplace-smoothed log-likelihoods."""
    Xm = as_feature_matrix(X)
    if sp.issparse(Xm):
        if Xm.nnz and Xm.data.min() < 0:
            raise ValueError("multinomial NB requires non-negative count features")
    elif np.asarray(Xm).size and np.asarray(Xm).min() < 0:
        raise ValueError("multinomial NB requires non-negative count features")
    if alpha <= 0:
        raise ValueError(f"smoothing alpha must be > 0, got {alpha}")
    y = np.asarray(y)
    n_docs, n_terms = Xm.shape
    class_counts = np.zeros(n_classes)
    term_counts = np.zeros((n_classes, n_terms))
    for k in range(n_classes):
        rows = y == k
        class_counts[k] = rows.sum()
        if class_counts[k]:
            sub = Xm[np.flatnonzero(rows)] if sp.issparse(Xm) else np.asarray(Xm)[rows]
            term_counts[k] = np.asarray(sub.sum(axis=0)).ravel()
    with np.errstate(divide="ignore"):
        log_prior = np.where(class_counts > 0, np.log(class_counts / max(n_docs, 1)), -np.inf)
    smoothed = term_counts + alpha
    log_likelihood = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    return {"class_log_prior": log_prior, "feature_log_prob": log_likelihood}


def nb_predict_proba(params: dict, X) -> np.ndarray:
    Xm = as_feature_matrix(X)
    joint = _matmul(Xm, params["feature_log_prob"].T) + params["class_log_prior"]
    joint = np.asarray(joint)
    finite = np.where(np.isfinite(joint), joint, -1e300)
    return softmax_probs(finite)
