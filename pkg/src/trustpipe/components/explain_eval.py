"""explain-eval: tile-surrogate explanations plus heatmap overlays."""

from __future__ import annotations

from ..docfmt import canonical_json
from ..explain import explain, render_heatmap
from ..model import BundleModel, ModelBundle, preprocess_image
from ._protocol import die, input_path, output_path, param, run


def main():
    tiles = int(param("tiles", "8"))
    samples = int(param("samples", "300"))
    seed = int(param("seed", "0"))
    max_images = int(param("max_images", "4"))

    bundle = ModelBundle.from_json(input_path("model").read_text(encoding="utf-8"))
    model = BundleModel(bundle)
    files = sorted(p for p in input_path("images").rglob("*") if p.is_file())[:max_images]
    if not files:
        die("images input contains no files")

    heat_dir = output_path("heatmaps")
    heat_dir.mkdir(parents=True)
    per_image = {}
    for f in files:
        img = preprocess_image(f, bundle.dims)
        emap = explain(img, model.predict_proba, (tiles, tiles), samples, seed)
        doc = emap.to_report()
        doc["label"] = bundle.labels[emap.base_label]
        per_image[f.name] = doc
        (heat_dir / (f.stem + ".png")).write_bytes(render_heatmap(emap, img))

    report = {"kind": "explanation-set", "tiles": tiles, "images": per_image}
    output_path("report").write_text(canonical_json(report) + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
