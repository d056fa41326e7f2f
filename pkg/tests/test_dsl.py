import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsl_corpus import EVAL_CASES, EVAL_ERRORS, PARSE_ERRORS
from trustpipe.dsl import (
    BinOp,
    Call,
    Col,
    EvalError,
    LexError,
    Lit,
    Not,
    ParseError,
    Table,
    evaluate,
    filter_rows,
    parse,
    pretty_print,
    read_table,
    transform_column,
    write_table,
)

# ---------------------------------------------------------------------------
# parsing


def test_gz_predicate_ast():
    e = parse('not contains(filename, ".gz")')
    assert e == Not(Call("contains", (Col("filename"), Lit(".gz"))))


def test_precedence_and_or():
    e = parse("a and b or c")
    assert e == BinOp("or", BinOp("and", Col("a"), Col("b")), Col("c"))


def test_precedence_arith_vs_cmp():
    e = parse("a + 1 >= b * 2")
    assert e == BinOp(">=", BinOp("+", Col("a"), Lit(1.0)), BinOp("*", Col("b"), Lit(2.0)))


@pytest.mark.parametrize("text,frag", PARSE_ERRORS)
def test_parse_errors(text, frag):
    with pytest.raises((ParseError, LexError), match=frag):
        parse(text)


def test_errors_carry_offset():
    with pytest.raises(LexError) as exc:
        parse("aa and @")
    assert exc.value.offset == 7


# ---------------------------------------------------------------------------
# evaluation


@pytest.mark.parametrize("text,row,expected", EVAL_CASES)
def test_eval_corpus(text, row, expected):
    assert evaluate(parse(text), row) == expected


@pytest.mark.parametrize("text,row,frag", EVAL_ERRORS)
def test_eval_errors(text, row, frag):
    with pytest.raises(EvalError, match=frag):
        evaluate(parse(text), row)


# ---------------------------------------------------------------------------
# tables

CSV = """filename,finding,age
scan01.png,covid,34
labels.gz,covid,55
scan02.png,normal,71
"""


def test_filter_gz():
    t = read_table(CSV)
    out = filter_rows(t, parse('not contains(filename, ".gz")'))
    assert len(out.rows) == 2
    assert [r[0] for r in out.rows] == ["scan01.png", "scan02.png"]
    assert out.header == t.header


def test_filter_true_identity():
    t = read_table(CSV)
    assert filter_rows(t, parse("true")) == t


def test_filter_error_names_row():
    t = read_table(CSV)
    with pytest.raises(EvalError, match="row 0"):
        filter_rows(t, parse("lower(age)"))


def test_filter_matches_bruteforce_oracle():
    rng = random.Random(5)
    header = ["filename", "age"]
    rows = []
    for i in range(1000):
        name = f"f{i}" + (".gz" if rng.random() < 0.3 else ".png")
        age = str(rng.randint(0, 99)) if rng.random() > 0.1 else ""
        rows.append((name, age))
    t = Table(tuple(header), tuple(rows))
    pred = parse('not contains(filename, ".gz") and age >= 40')
    out = filter_rows(t, pred)
    # independent oracle: plain python over the raw cells
    expected = tuple(
        r for r in rows if ".gz" not in r[0] and r[1] != "" and float(r[1]) >= 40
    )
    assert out.rows == expected


def test_transform_slashes():
    t = Table(("finding",), (("COVID-19/PCR",), ("No/Finding",), ("normal",)))
    out = transform_column(t, "finding", parse('replace(finding, "/", "_")'))
    assert out.rows == (("COVID-19_PCR",), ("No_Finding",), ("normal",))
    assert len(out.rows) == len(t.rows)


def test_transform_identity():
    t = read_table(CSV)
    out = transform_column(t, "finding", parse("finding"))
    assert out == t


def test_transform_creates_missing_column():
    t = read_table(CSV)
    out = transform_column(t, "elderly", parse("age >= 65"))
    assert out.header == t.header + ("elderly",)
    assert [r[-1] for r in out.rows] == ["false", "false", "true"]


def test_transform_numeric_matches_oracle():
    rng = random.Random(7)
    rows = tuple((str(rng.randint(0, 99)),) for _ in range(100))
    t = Table(("age",), rows)
    out = transform_column(t, "age", parse("age * 2"))
    expected = tuple((str(int(r[0]) * 2),) for r in rows)
    assert out.rows == expected


def test_read_write_roundtrip():
    t = read_table(CSV)
    assert read_table(write_table(t)) == t


# ---------------------------------------------------------------------------
# properties

_names = st.sampled_from(["a", "b", "filename", "age"])


def _exprs():
    leaves = st.one_of(
        st.builds(Lit, st.one_of(st.booleans(), st.none(), st.text(max_size=6),
                                 st.floats(allow_nan=False, allow_infinity=False, width=32))),
        st.builds(Col, _names),
    )

    def extend(children):
        return st.one_of(
            st.builds(Not, children),
            st.builds(
                BinOp,
                st.sampled_from(["and", "or", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"]),
                children,
                children,
            ),
            st.builds(lambda a, b: Call("contains", (a, b)), children, children),
            st.builds(lambda a: Call("lower", (a,)), children),
        )

    return st.recursive(leaves, extend, max_leaves=24)


@given(_exprs())
@settings(max_examples=200)
def test_pretty_print_roundtrip(e):
    assert parse(pretty_print(e)) == e


@given(st.lists(st.tuples(st.text(alphabet="ab.gz", max_size=8)), max_size=30))
def test_filter_idempotent(rows):
    t = Table(("filename",), tuple(tuple(r) for r in rows))
    pred = parse('not contains(filename, ".gz")')
    once = filter_rows(t, pred)
    assert filter_rows(once, pred) == once


@given(st.text(max_size=40))
@settings(max_examples=500)
def test_fuzz_parse_never_crashes(text):
    try:
        e = parse(text)
    except (LexError, ParseError):
        return
    try:
        evaluate(e, {"a": 1.0, "b": None})
    except EvalError:
        pass
