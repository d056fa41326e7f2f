"""confusion-eval: score a model on class-foldered images."""

from __future__ import annotations

from ..docfmt import canonical_json
from ..evalmetrics import confusion
from ..model import ModelBundle, load_class_folders, predict_rows
from ._protocol import input_path, output_path, run


def main():
    bundle = ModelBundle.from_json(input_path("model").read_text(encoding="utf-8"))
    rows = predict_rows(bundle, load_class_folders(input_path("data")))
    report = confusion(rows, bundle.labels).to_report()
    output_path("report").write_text(canonical_json(report) + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
