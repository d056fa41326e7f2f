"""filter-rows: keep table rows for which a predicate expression is true."""

from __future__ import annotations

from .. import dsl
from ._protocol import input_path, output_path, param, run


def main():
    predicate = dsl.parse(param("predicate"))
    table = dsl.read_table(input_path("data").read_text(encoding="utf-8"))
    out = dsl.filter_rows(table, predicate)
    output_path("data").write_text(dsl.write_table(out), encoding="utf-8")


if __name__ == "__main__":
    run(main)
