"""fairness-eval: group-fairness metrics over a labeled table.

The attributes parameter is a comma-separated list of
attribute:privileged-group pairs, e.g. "gender:M,age_group:false". When
prediction_column is empty the label column doubles as the prediction,
measuring bias present in the data itself.
"""

from __future__ import annotations

from .. import dsl
from ..docfmt import canonical_json
from ..evalmetrics import PredRow, fairness_report
from ._protocol import die, input_path, output_path, param, run


def parse_attributes(spec: str) -> list:
    pairs = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            die(f"attribute spec {part!r} must be 'attribute:privileged_group'")
        attr, priv = part.split(":", 1)
        pairs.append((attr.strip(), priv.strip()))
    if not pairs:
        die("attributes parameter names no attributes")
    return pairs


def main():
    specs = parse_attributes(param("attributes"))
    favorable = param("favorable")
    label_col = param("label_column", "finding")
    pred_col = param("prediction_column", "") or label_col

    table = dsl.read_table(input_path("data").read_text(encoding="utf-8"))
    for col in {label_col, pred_col, *(a for a, _ in specs)}:
        if col not in table.header:
            die(f"table has no column {col!r}")
    li = table.header.index(label_col)
    pi = table.header.index(pred_col)
    rows = [
        PredRow(
            sample_id=str(i),
            y_true=r[li],
            y_pred=r[pi],
            attrs={col: cell for col, cell in zip(table.header, r)},
        )
        for i, r in enumerate(table.rows)
    ]
    report = fairness_report(rows, specs, favorable)
    output_path("report").write_text(canonical_json(report) + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
