"""bless-gate: evaluate a threshold policy over a model and a report.

The step itself succeeds whenever the policy evaluates; the decision
("blessed" or "rejected") is data in the emitted blessing record.
"""

from __future__ import annotations

import hashlib
import json

from ..docfmt import canonical_json
from ..gate import evaluate_policy, parse_policy
from ._protocol import die, input_path, output_path, param, run


def main():
    policy = parse_policy(param("policy"))
    model_bytes = input_path("model").read_bytes()
    try:
        subjects = {
            "model": json.loads(model_bytes),
            "report": json.loads(input_path("report").read_text(encoding="utf-8")),
        }
    except json.JSONDecodeError as e:
        die(f"input is not valid JSON: {e}")
    record = evaluate_policy(policy, subjects, hashlib.sha256(model_bytes).hexdigest())
    output_path("record").write_text(canonical_json(record) + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
