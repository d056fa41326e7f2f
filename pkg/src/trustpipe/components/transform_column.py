"""transform-column: apply an expression to one column of a table."""

from __future__ import annotations

from .. import dsl
from ._protocol import input_path, output_path, param, run


def main():
    column = param("column")
    expr = dsl.parse(param("expr"))
    table = dsl.read_table(input_path("data").read_text(encoding="utf-8"))
    out = dsl.transform_column(table, column, expr)
    output_path("data").write_text(dsl.write_table(out), encoding="utf-8")


if __name__ == "__main__":
    run(main)
