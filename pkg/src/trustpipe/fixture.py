"""Synthetic image-classification fixture with controllable label bias.

Stands in for clinical CT data: classA images carry a bright centered blob,
classB images carry horizontal stripes, so the classes are linearly separable
after downscaling. Bias knobs fix the favorable-label rate per gender group
exactly (up to rounding), which lets fairness metrics recover the injected
bias quantitatively.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import TrustPipeError

IMAGE_SIZE = 64
FAVORABLE = "classA"
UNFAVORABLE = "classB"
GENDERS = ("F", "M")


def _blob_image(rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    cy = IMAGE_SIZE / 2 + rng.uniform(-4, 4)
    cx = IMAGE_SIZE / 2 + rng.uniform(-4, 4)
    sigma = rng.uniform(8, 12)
    img = 0.9 * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    img += rng.normal(0, 0.05, img.shape)
    return np.clip(img, 0, 1)


def _stripe_image(rng: np.random.Generator) -> np.ndarray:
    yy = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE][0]
    period = rng.uniform(6, 10)
    phase = rng.uniform(0, 2 * np.pi)
    img = 0.45 + 0.4 * np.sin(2 * np.pi * yy / period + phase)
    img += rng.normal(0, 0.05, img.shape)
    return np.clip(img, 0, 1)


def gen_fixture(out_dir, seed: int, n_images: int, bias_knobs=None, n_invalid: int | None = None) -> dict:
    """Write metadata.csv, images/ and manifest.txt under out_dir.

    bias_knobs maps gender group -> favorable-label rate; defaults to 0.5
    for both groups. Returns per-group counts. Fully seeded: the same
    arguments produce a byte-identical fixture.
    """
    if n_images < 20:
        raise TrustPipeError("fixture needs at least 20 images")
    knobs = dict(bias_knobs or {})
    for g in GENDERS:
        knobs.setdefault(g, 0.5)
        if not (0.0 <= knobs[g] <= 1.0):
            raise TrustPipeError(f"bias knob for {g!r} outside [0, 1]")
    if n_invalid is None:
        n_invalid = max(1, n_images // 50)

    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    rows = []
    counts = {g: {"favorable": 0, "total": 0} for g in GENDERS}
    half = n_images // 2
    plan = []
    for gi, g in enumerate(GENDERS):
        n_g = half if gi == 0 else n_images - half
        n_fav = int(round(knobs[g] * n_g))
        for j in range(n_g):
            plan.append((g, FAVORABLE if j < n_fav else UNFAVORABLE))
    order = rng.permutation(len(plan))

    for i, pi in enumerate(order):
        gender, finding = plan[pi]
        filename = f"scan{i:04d}.png"
        img = _blob_image(rng) if finding == FAVORABLE else _stripe_image(rng)
        Image.fromarray(np.round(img * 255).astype(np.uint8), mode="L").save(images_dir / filename)
        age = int(rng.integers(20, 91))
        rows.append((filename, finding, gender, age))
        counts[gender]["total"] += 1
        if finding == FAVORABLE:
            counts[gender]["favorable"] += 1

    for i in range(n_invalid):
        gender = GENDERS[i % 2]
        finding = FAVORABLE if rng.random() < 0.5 else UNFAVORABLE
        rows.append((f"corrupt{i:02d}.gz", finding, gender, int(rng.integers(20, 91))))

    lines = ["filename,finding,gender,age"]
    lines += [f"{f},{c},{g},{a}" for f, c, g, a in rows]
    (out / "metadata.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = ["metadata.csv"] + sorted(f"images/{p.name}" for p in images_dir.iterdir())
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    return counts
