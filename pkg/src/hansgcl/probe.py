"""Linear evaluation of frozen embeddings."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .graph import DatasetError
from .model import encode, normalize_adj


def final_embeddings(params, graph):
    """Encoder output on the original, un-augmented graph."""
    adj = normalize_adj(graph.edges, graph.num_nodes)
    return encode(params, adj, graph.features)


def micro_f1(predictions, labels, mask=None):
    """Micro-averaged F1; for single-label multiclass data this is accuracy."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        predictions, labels = predictions[mask], labels[mask]
    if labels.size == 0:
        raise ValueError("micro_f1 needs at least one evaluated node")
    return float(np.mean(predictions == labels))


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


class LinearProbe(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained by full-batch proximal gradient descent.

    The objective is mean cross-entropy plus ``alpha / n_train * ||W||^2 / 2``;
    the L2 part is applied as an exact shrink, so any ``alpha`` is stable.
    Inputs are standardised with training-row statistics. When a validation
    set is passed to :meth:`fit`, the weights with the best validation
    accuracy among every ``eval_every`` iterations are kept.
    """

    def __init__(self, alpha=1e-4, lr=0.05, max_iter=2000, eval_every=100,
                 standardize=True, random_state=None):
        self.alpha = alpha
        self.lr = lr
        self.max_iter = max_iter
        self.eval_every = eval_every
        self.standardize = standardize
        self.random_state = random_state

    def _scale(self, X):
        return (X - self.mean_) / self.scale_

    def _objective(self, Xs, onehot):
        p = _softmax(Xs @ self.coef_ + self.intercept_)
        ce = -np.mean(np.log(np.maximum(np.sum(p * onehot, axis=1), 1e-300)))
        return ce + 0.5 * self._penalty * np.sum(self.coef_ ** 2)

    def fit(self, X, y, X_val=None, y_val=None, n_classes=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.int64)
        self.classes_ = np.arange(n_classes if n_classes is not None else y.max() + 1)
        n_classes = self.classes_.shape[0]
        missing = np.setdiff1d(self.classes_, np.unique(y))
        if missing.size:
            raise DatasetError(f"classes {missing.tolist()} have no training example")
        n, d = X.shape

        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_ = np.where(std > 1e-12, std, 1.0)
        else:
            self.mean_ = np.zeros(d)
            self.scale_ = np.ones(d)
        Xs = self._scale(X)
        onehot = np.eye(n_classes)[y]
        self._penalty = self.alpha / n

        self.coef_ = np.zeros((d, n_classes))
        self.intercept_ = np.zeros(n_classes)
        have_val = X_val is not None and y_val is not None
        if have_val:
            X_val = check_array(X_val, dtype=np.float64)
            y_val = np.asarray(y_val)
        best = (-1.0, self.coef_.copy(), self.intercept_.copy(), 0)
        self.loss_curve_ = []
        shrink = 1.0 / (1.0 + self.lr * self._penalty)
        for it in range(1, self.max_iter + 1):
            p = _softmax(Xs @ self.coef_ + self.intercept_)
            resid = (p - onehot) / n
            self.coef_ = (self.coef_ - self.lr * (Xs.T @ resid)) * shrink
            self.intercept_ = self.intercept_ - self.lr * resid.sum(axis=0)
            if have_val and (it % self.eval_every == 0 or it == self.max_iter):
                acc = micro_f1(self.predict(X_val), y_val)
                if acc > best[0]:
                    best = (acc, self.coef_.copy(), self.intercept_.copy(), it)
            if it % self.eval_every == 0 or it == self.max_iter:
                self.loss_curve_.append(self._objective(Xs, onehot))
        if have_val:
            self.best_val_score_, self.coef_, self.intercept_, self.best_iter_ = best
        self.n_iter_ = self.max_iter
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return self._scale(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        # argmax breaks ties toward the lowest class index
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def train_probe(embeddings, labels, masks, alpha=1e-4, iters=2000, lr=0.05, seed=0,
                num_classes=None):
    """Fit a :class:`LinearProbe` on the train rows, model-selected on the val rows.

    Only rows under ``masks.train`` and ``masks.val`` are passed to the
    estimator; test labels are never seen.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    n_classes = num_classes if num_classes is not None else int(labels.max()) + 1
    probe = LinearProbe(alpha=alpha, lr=lr, max_iter=iters, random_state=seed)
    return probe.fit(
        embeddings[masks.train], labels[masks.train],
        embeddings[masks.val], labels[masks.val],
        n_classes=n_classes,
    )


def export_embeddings(embeddings, path):
    """One line per node, comma-separated values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(embeddings, dtype=np.float64), delimiter=",", fmt="%.17g")
    return path
