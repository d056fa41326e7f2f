"""robustness-eval: fast-gradient-sign accuracy sweep."""

from __future__ import annotations

from ..docfmt import canonical_json
from ..model import BundleModel, ModelBundle, load_class_folders, preprocess_image
from ..robustness import fgsm_robustness
from ._protocol import die, input_path, output_path, param, run


def main():
    try:
        epsilons = [float(t) for t in param("epsilons", "0,0.05,0.1,0.2").split(",") if t.strip()]
    except ValueError:
        die("epsilons must be a comma-separated list of numbers")

    bundle = ModelBundle.from_json(input_path("model").read_text(encoding="utf-8"))
    idx = {l: i for i, l in enumerate(bundle.labels)}
    dataset = []
    for label, path in load_class_folders(input_path("data")):
        if label not in idx:
            die(f"class folder {label!r} is outside the model's label set")
        dataset.append((preprocess_image(path, bundle.dims), idx[label]))

    report = fgsm_robustness(BundleModel(bundle), dataset, epsilons).to_report()
    output_path("report").write_text(canonical_json(report) + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
