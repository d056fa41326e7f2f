"""Perturbation-based tile explainer with heatmap rendering.

The explainer partitions an image into a rectangular tile grid, samples
random keep/drop masks, replaces dropped tiles with a neutral fill value,
queries the model for the base class score, and fits a weighted linear
surrogate from mask vectors to scores. The surrogate coefficients are the
per-tile weights.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import TrustPipeError

KERNEL_SCALE = 0.25  # weight = exp(-(1 - kept_fraction)^2 / KERNEL_SCALE)


class SingularFitError(TrustPipeError):
    pass


@dataclass(frozen=True)
class ExplanationMap:
    rows: int
    cols: int
    weights: tuple  # row-major tile coefficients
    base_label: int
    base_score: float
    seed: int
    n_samples: int

    def to_report(self) -> dict:
        return {
            "kind": "explanation",
            "rows": self.rows,
            "cols": self.cols,
            "weights": list(self.weights),
            "base_label": self.base_label,
            "base_score": self.base_score,
            "seed": self.seed,
            "n_samples": self.n_samples,
        }


def tile_masks_to_image(image: np.ndarray, mask: np.ndarray, rows: int, cols: int, fill: float) -> np.ndarray:
    h, w = image.shape
    out = image.copy()
    for t in range(rows * cols):
        if mask[t]:
            continue
        r, c = divmod(t, cols)
        r0, r1 = r * h // rows, (r + 1) * h // rows
        c0, c1 = c * w // cols, (c + 1) * w // cols
        out[r0:r1, c0:c1] = fill
    return out


def sample_masks(rng: np.random.Generator, n_samples: int, tiles: int) -> np.ndarray:
    return rng.random((n_samples, tiles)) < 0.5


def weighted_surrogate(masks: np.ndarray, scores: np.ndarray, seed: int) -> np.ndarray:
    """Solve the weighted normal equations for [intercept, tile coefficients]."""
    n, tiles = masks.shape
    X = np.hstack([np.ones((n, 1)), masks.astype(np.float64)])
    kept = masks.mean(axis=1)
    w = np.exp(-((1.0 - kept) ** 2) / KERNEL_SCALE)
    XtW = X.T * w
    A = XtW @ X
    b = XtW @ scores
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise SingularFitError(f"degenerate mask design matrix for seed {seed}") from None
    if not np.all(np.isfinite(beta)):
        raise SingularFitError(f"degenerate mask design matrix for seed {seed}")
    return beta


def explain(image, model, tiling, n_samples: int, seed: int, fill: float | None = None) -> ExplanationMap:
    """Fit the tile surrogate for the model's predicted class on `image`.

    `model` maps a float image in [0, 1] to per-class probabilities.
    `fill` defaults to the image mean (stand-in for the dataset mean).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise TrustPipeError("explainer expects a 2-D grayscale image")
    rows, cols = tiling
    tiles = rows * cols
    if n_samples < tiles + 1:
        raise TrustPipeError(f"n_samples must be at least tiles + 1 ({tiles + 1})")
    if fill is None:
        fill = float(img.mean())

    base = np.asarray(model(img), dtype=np.float64)
    base_label = int(np.argmax(base))

    rng = np.random.default_rng(seed)
    masks = sample_masks(rng, n_samples, tiles)
    scores = np.empty(n_samples)
    for i in range(n_samples):
        scores[i] = float(np.asarray(model(tile_masks_to_image(img, masks[i], rows, cols, fill)))[base_label])
    beta = weighted_surrogate(masks, scores, seed)
    return ExplanationMap(
        rows=rows,
        cols=cols,
        weights=tuple(float(x) for x in beta[1:]),
        base_label=base_label,
        base_score=float(base[base_label]),
        seed=seed,
        n_samples=n_samples,
    )


POSITIVE_HUE = (220, 40, 40)  # red ramp for supporting tiles
NEGATIVE_HUE = (40, 80, 220)  # blue ramp for opposing tiles


def render_heatmap(emap: ExplanationMap, image) -> bytes:
    """Overlay PNG: alpha proportional to |weight| / max |weight|."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise TrustPipeError("heatmap rendering expects a 2-D grayscale image")
    h, w = img.shape
    base = np.clip(img * 255.0, 0, 255).astype(np.uint8)
    rgb = np.stack([base, base, base], axis=-1).astype(np.float64)
    weights = np.asarray(emap.weights, dtype=np.float64)
    peak = np.max(np.abs(weights)) if len(weights) else 0.0
    if peak > 0:
        for t, wt in enumerate(weights):
            if wt == 0.0:
                continue
            r, c = divmod(t, emap.cols)
            r0, r1 = r * h // emap.rows, (r + 1) * h // emap.rows
            c0, c1 = c * w // emap.cols, (c + 1) * w // emap.cols
            hue = POSITIVE_HUE if wt > 0 else NEGATIVE_HUE
            alpha = abs(wt) / peak
            block = rgb[r0:r1, c0:c1]
            rgb[r0:r1, c0:c1] = (1.0 - alpha) * block + alpha * np.array(hue, dtype=np.float64)
    out = Image.fromarray(np.round(rgb).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    out.save(buf, format="PNG")
    return buf.getvalue()
