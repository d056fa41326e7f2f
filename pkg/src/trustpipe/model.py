"""Multinomial logistic-regression model bundle: training, inference and
closed-form input gradients.

The bundle records everything needed for identical inference: preprocessing
spec, weights, ordered labels, seed and hyperparameters. Serialized as
canonical JSON so model artifacts are content-addressable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .docfmt import canonical_json
from .errors import InvariantError, TrustPipeError


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class ModelBundle:
    dims: int  # inputs are resized to dims x dims grayscale in [0, 1]
    labels: tuple
    weights: tuple  # classes x (dims*dims), row-major nested tuples
    bias: tuple
    seed: int
    hyperparams: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        k, d = len(self.labels), self.dims * self.dims
        if len(self.weights) != k or any(len(row) != d for row in self.weights):
            raise InvariantError("weight matrix shape inconsistent with labels and dims")
        if len(self.bias) != k:
            raise InvariantError("bias length inconsistent with label count")

    @property
    def W(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.bias, dtype=np.float64)

    def to_json(self) -> str:
        return canonical_json(
            {
                "kind": "model-bundle",
                "preprocessing": {"resize": self.dims, "grayscale": True, "scale": "unit"},
                "labels": list(self.labels),
                "weights": [list(r) for r in self.weights],
                "bias": list(self.bias),
                "seed": self.seed,
                "hyperparams": self.hyperparams,
                "metrics": self.metrics,
            }
        )

    @staticmethod
    def from_json(text: str) -> "ModelBundle":
        doc = json.loads(text)
        if doc.get("kind") != "model-bundle":
            raise TrustPipeError("not a model bundle")
        return ModelBundle(
            dims=int(doc["preprocessing"]["resize"]),
            labels=tuple(doc["labels"]),
            weights=tuple(tuple(float(x) for x in r) for r in doc["weights"]),
            bias=tuple(float(x) for x in doc["bias"]),
            seed=int(doc["seed"]),
            hyperparams=doc.get("hyperparams", {}),
            metrics=doc.get("metrics", {}),
        )


def preprocess_image(image, dims: int) -> np.ndarray:
    """Grayscale, resize to dims x dims (bilinear), scale to [0, 1]."""
    if isinstance(image, (str, Path)):
        image = Image.open(image)
    if isinstance(image, Image.Image):
        arr = np.asarray(image.convert("L"), dtype=np.float64) / 255.0
    else:
        arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise TrustPipeError("expected a grayscale image")
    if arr.shape != (dims, dims):
        im = Image.fromarray(arr.astype(np.float32), mode="F")
        arr = np.asarray(im.resize((dims, dims), Image.BILINEAR), dtype=np.float64)
    return np.clip(arr, 0.0, 1.0)


class BundleModel:
    """Scoring interface over a bundle; inputs are preprocessed feature images."""

    def __init__(self, bundle: ModelBundle):
        self.bundle = bundle
        self._W = bundle.W
        self._b = bundle.b

    def predict_proba(self, x) -> np.ndarray:
        """x: dims x dims array (or flat vector) already in [0, 1]."""
        v = np.asarray(x, dtype=np.float64).reshape(-1)
        if v.shape[0] != self._W.shape[1]:
            raise TrustPipeError(
                f"input has {v.shape[0]} features, model expects {self._W.shape[1]}"
            )
        return softmax(self._W @ v + self._b)

    def predict_proba_image(self, image) -> np.ndarray:
        return self.predict_proba(preprocess_image(image, self.bundle.dims))

    def loss_grad(self, x, y_index: int) -> np.ndarray:
        """d(cross-entropy)/dx in closed form for the linear model."""
        v = np.asarray(x, dtype=np.float64)
        shape = v.shape
        p = self.predict_proba(v)
        onehot = np.zeros_like(p)
        onehot[int(y_index)] = 1.0
        return (self._W.T @ (p - onehot)).reshape(shape)

    def flip_epsilon(self, x, y_index: int) -> float:
        """Smallest FGSM epsilon that flips a correctly-classified sample.

        For the linear model the logit margin after a sign-step perturbation
        is analytic: eps* = min over rival classes c of
        margin(y, c) / ||w_c - w_y||_1 evaluated along the attack direction.
        Ignores clipping, so it is exact for interior inputs.
        """
        v = np.asarray(x, dtype=np.float64).reshape(-1)
        z = self._W @ v + self._b
        g = self._W.T @ (softmax(z) - _onehot(len(z), y_index))
        s = np.sign(g)
        best = np.inf
        for c in range(len(z)):
            if c == int(y_index):
                continue
            delta = self._W[c] - self._W[int(y_index)]
            slope = delta @ s
            margin = z[int(y_index)] - z[c]
            if slope > 0 and margin >= 0:
                best = min(best, margin / slope)
        return float(best)


def _onehot(k: int, i: int) -> np.ndarray:
    v = np.zeros(k)
    v[int(i)] = 1.0
    return v


def load_class_folders(root) -> list:
    """Read a class-foldered image dir into (label, path) pairs, sorted."""
    root = Path(root)
    pairs = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(sub.iterdir()):
            if f.is_file():
                pairs.append((sub.name, f))
    return pairs


def train_toy(class_dir, epochs: int = 50, lr: float = 0.1, seed: int = 1,
              dims: int = 16, holdout: float = 0.2, batch_size: int = 32) -> ModelBundle:
    """Seeded mini-batch SGD on flattened, downscaled, unit-scaled pixels."""
    pairs = load_class_folders(class_dir)
    labels = sorted({l for l, _ in pairs})
    if len(labels) < 2:
        raise TrustPipeError("training requires at least 2 classes")
    by_label = {l: [p for ll, p in pairs if ll == l] for l in labels}
    if any(len(v) < 2 for v in by_label.values()):
        raise TrustPipeError("training requires at least 2 images per class")

    idx = {l: i for i, l in enumerate(labels)}
    X = []
    y = []
    for label, path in pairs:
        try:
            X.append(preprocess_image(path, dims).reshape(-1))
        except Exception as e:
            raise TrustPipeError(f"unreadable image {path}: {e}") from None
        y.append(idx[label])
    X = np.asarray(X)
    y = np.asarray(y)
    n, d = X.shape
    k = len(labels)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_hold = int(round(holdout * n))
    hold, tr = perm[:n_hold], perm[n_hold:]

    W = np.zeros((k, d))
    b = np.zeros(k)
    for _ in range(epochs):
        order = rng.permutation(len(tr))
        for start in range(0, len(tr), batch_size):
            batch = tr[order[start : start + batch_size]]
            Xb, yb = X[batch], y[batch]
            Z = Xb @ W.T + b
            Z -= Z.max(axis=1, keepdims=True)
            P = np.exp(Z)
            P /= P.sum(axis=1, keepdims=True)
            P[np.arange(len(batch)), yb] -= 1.0
            W -= lr * (P.T @ Xb) / len(batch)
            b -= lr * P.mean(axis=0)

    def acc(indices):
        if len(indices) == 0:
            return None
        Z = X[indices] @ W.T + b
        return float(np.mean(np.argmax(Z, axis=1) == y[indices]))

    # quantize to the canonical-JSON float precision so serialization
    # round-trips exactly
    q = lambda v: float("%.12g" % v)
    return ModelBundle(
        dims=dims,
        labels=tuple(labels),
        weights=tuple(tuple(q(v) for v in row) for row in W),
        bias=tuple(q(v) for v in b),
        seed=seed,
        hyperparams={"epochs": epochs, "lr": lr, "holdout": holdout, "batch_size": batch_size},
        metrics={
            "holdout_accuracy": acc(hold),
            "train_accuracy": acc(tr),
            "n_train": int(len(tr)),
            "n_holdout": int(len(hold)),
        },
    )


def predict_rows(bundle: ModelBundle, labeled_paths) -> list:
    """Score (label, path) pairs into prediction rows for evaluation."""
    from .evalmetrics import PredRow

    model = BundleModel(bundle)
    rows = []
    for true_label, path in labeled_paths:
        p = model.predict_proba_image(path)
        rows.append(
            PredRow(
                sample_id=str(Path(path).name),
                y_true=str(true_label),
                y_pred=bundle.labels[int(np.argmax(p))],
                scores=tuple(float(v) for v in p),
            )
        )
    return rows
