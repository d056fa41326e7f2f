"""publish-report: terminal sink that surfaces a report for humans."""

from __future__ import annotations

import json

from ._protocol import die, input_path, param, run


def main():
    title = param("title", "report")
    try:
        doc = json.loads(input_path("report").read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        die(f"report is not valid JSON: {e}")
    kind = doc.get("kind", "unknown") if isinstance(doc, dict) else "unknown"
    print(f"published {title} (kind={kind})")


if __name__ == "__main__":
    run(main)
