"""Five small deterministic classifiers over one-hot feature matrices.

All of them share the fit/predict/predict_proba surface and are seeded
where any randomness exists, so identical inputs give identical models.
Inputs are dense float arrays with binary indicator columns.
"""

from __future__ import annotations

import numpy as np


class DecisionTree:
    """CART with gini impurity; splits are x <= threshold."""

    def __init__(self, max_depth=12, min_samples_split=2, rng=None, max_features=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.rng = rng
        self.max_features = max_features

    @staticmethod
    def _gini(counts: np.ndarray) -> float:
        total = counts.sum()
        if total == 0:
            return 0.0
        p = counts / total
        return float(1.0 - np.sum(p * p))

    def _best_split(self, X, y):
        n, d = X.shape
        features = np.arange(d)
        if self.max_features is not None and self.max_features < d:
            features = np.sort(self.rng.choice(d, size=self.max_features, replace=False))
        parent_counts = np.bincount(y, minlength=2)
        best = (None, None, self._gini(parent_counts))
        for j in features:
            left = X[:, j] <= 0.5
            n_left = int(left.sum())
            if n_left == 0 or n_left == n:
                continue
            left_counts = np.bincount(y[left], minlength=2)
            right_counts = parent_counts - left_counts
            gini = (n_left * self._gini(left_counts) + (n - n_left) * self._gini(right_counts)) / n
            if gini < best[2] - 1e-12:
                best = (j, 0.5, gini)
        return best[0], best[1]

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.tree_ = self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth):
        counts = np.bincount(y, minlength=2)
        prob = counts[1] / counts.sum() if counts.sum() else 0.0
        if (
            depth >= self.max_depth
            or len(y) < self.min_samples_split
            or counts[0] == 0
            or counts[1] == 0
        ):
            return {"leaf": True, "prob": prob}
        feature, threshold = self._best_split(X, y)
        if feature is None:
            return {"leaf": True, "prob": prob}
        mask = X[:, feature] <= threshold
        return {
            "leaf": False,
            "feature": int(feature),
            "threshold": threshold,
            "left": self._grow(X[mask], y[mask], depth + 1),
            "right": self._grow(X[~mask], y[~mask], depth + 1),
        }

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X))
        for i, row in enumerate(X):
            node = self.tree_
            while not node["leaf"]:
                node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
            out[i] = node["prob"]
        return out

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


class RandomForest:
    """Bagged CART trees; the vote share doubles as a probability."""

    def __init__(self, n_trees=100, max_depth=12, seed=0, max_features=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.seed = seed
        self.max_features = max_features

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        rng = np.random.default_rng(self.seed)
        n = len(y)
        self.trees_ = []
        for _ in range(self.n_trees):
            idx = rng.integers(0, n, size=n)
            tree = DecisionTree(self.max_depth, rng=rng, max_features=self.max_features)
            tree.fit(X[idx], y[idx])
            self.trees_.append(tree)
        return self

    def predict_proba(self, X):
        votes = np.zeros(len(X))
        for tree in self.trees_:
            votes += (tree.predict_proba(X) >= 0.5).astype(float)
        return votes / len(self.trees_)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


class KNearestNeighbors:
    """k-NN with Hamming distance on indicator columns."""

    def __init__(self, k=5, seed=0):
        self.k = k

    def fit(self, X, y):
        self.X_ = np.asarray(X, dtype=float)
        self.y_ = np.asarray(y, dtype=int)
        self._row_sums = self.X_.sum(axis=1)
        return self

    def _vote_share(self, X):
        X = np.asarray(X, dtype=float)
        # For binary vectors: hamming(a, b) = sum(a) + sum(b) - 2 a.b
        cross = X @ self.X_.T
        dist = X.sum(axis=1, keepdims=True) + self._row_sums[None, :] - 2.0 * cross
        k = min(self.k, len(self.y_))
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return self.y_[order].mean(axis=1)

    def predict_proba(self, X):
        return self._vote_share(X)

    def predict(self, X):
        return (self._vote_share(X) >= 0.5).astype(int)


class LogisticRegression:
    """Full-batch gradient descent with L2 regularization."""

    def __init__(self, lr=0.5, iterations=400, l2=1e-3, seed=0):
        self.lr = lr
        self.iterations = iterations
        self.l2 = l2

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        self.w_ = np.zeros(d)
        self.b_ = 0.0
        for _ in range(self.iterations):
            z = X @ self.w_ + self.b_
            p = 1.0 / (1.0 + np.exp(-z))
            grad_w = X.T @ (p - y) / n + self.l2 * self.w_
            grad_b = float(np.mean(p - y))
            self.w_ -= self.lr * grad_w
            self.b_ -= self.lr * grad_b
        return self

    def predict_proba(self, X):
        z = np.asarray(X, dtype=float) @ self.w_ + self.b_
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


class GaussianNaiveBayes:
    """Gaussian likelihoods over the indicator columns, smoothed variances."""

    def __init__(self, var_smoothing=1e-9, seed=0):
        self.var_smoothing = var_smoothing

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.classes_ = np.unique(y)
        self.theta_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.array([X[y == c].var(axis=0) for c in self.classes_])
        self.var_ += self.var_smoothing * max(X.var(axis=0).max(), 1e-12)
        counts = np.array([(y == c).sum() for c in self.classes_], dtype=float)
        self.log_prior_ = np.log(counts / counts.sum())
        return self

    def _joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=float)
        jll = []
        for i, _ in enumerate(self.classes_):
            log_det = np.sum(np.log(2.0 * np.pi * self.var_[i]))
            quad = np.sum((X - self.theta_[i]) ** 2 / self.var_[i], axis=1)
            jll.append(self.log_prior_[i] - 0.5 * (log_det + quad))
        return np.vstack(jll).T

    def predict_proba(self, X):
        jll = self._joint_log_likelihood(X)
        if len(self.classes_) == 1:
            return np.full(len(jll), float(self.classes_[0]))
        jll -= jll.max(axis=1, keepdims=True)
        probs = np.exp(jll)
        probs /= probs.sum(axis=1, keepdims=True)
        positive = np.where(self.classes_ == 1)[0]
        return probs[:, positive[0]] if len(positive) else np.zeros(len(jll))

    def predict(self, X):
        jll = self._joint_log_likelihood(X)
        return self.classes_[np.argmax(jll, axis=1)]


class LinearSVM:
    """Hinge-loss linear classifier trained by stochastic subgradient."""

    def __init__(self, l2=1e-4, epochs=30, seed=0):
        self.l2 = l2
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        signs = np.where(np.asarray(y, dtype=int) == 1, 1.0, -1.0)
        n, d = X.shape
        rng = np.random.default_rng(self.seed)
        w = np.zeros(d)
        b = 0.0
        t = 0
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (self.l2 * t)
                margin = signs[i] * (X[i] @ w + b)
                w *= 1.0 - eta * self.l2
                if margin < 1.0:
                    w += eta * signs[i] * X[i]
                    b += eta * signs[i] * 0.1
        self.w_, self.b_ = w, b
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=float) @ self.w_ + self.b_

    def predict_proba(self, X):
        # Sigmoid-squashed margin: a ranking score, not a calibrated one.
        return 1.0 / (1.0 + np.exp(-self.decision_function(X)))

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(int)


CLASSIFIERS = {
    "RandomForest": RandomForest,
    "KNearestNeighbors": KNearestNeighbors,
    "LogisticRegression": LogisticRegression,
    "GaussianNaiveBayes": GaussianNaiveBayes,
    "LinearSVM": LinearSVM,
}
