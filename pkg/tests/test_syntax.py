import pytest
from hypothesis import given, settings, strategies as hst

from picore import ParseError, SourceFile, parse_model, pretty_print
from picore.arinc import MUTATIONS, model_text
from picore.model import Await, Basic, Seq
from picore.syntax import tokenize
from _gen import random_text
from conftest import MODELS, flat, mini

CORPUS = sorted(MODELS.glob("*.pic"))


def round_trip(text):
    m = parse_model(text)
    printed = pretty_print(m)
    again = parse_model(printed)
    assert again == m
    # printing is a fixed point after one pass
    assert pretty_print(again) == printed
    return m


@pytest.mark.parametrize("path", CORPUS, ids=[p.stem for p in CORPUS])
def test_corpus_round_trip(path):
    round_trip(path.read_text())


@pytest.mark.parametrize("mutation", (None,) + MUTATIONS)
def test_arinc_round_trip(mutation):
    round_trip(model_text(mutation=mutation))


@pytest.mark.parametrize("seed", range(40))
def test_random_model_round_trip(seed):
    round_trip(random_text(seed, owned=seed % 2 == 1))


def test_locked_structure(locked):
    ev = locked.event_map["evt1"]
    assert [p for p, _ in ev.params] == ["p0", "p1"]
    assert isinstance(ev.body, Seq)
    assert isinstance(ev.body.first, Await)
    assert isinstance(ev.body.second, Seq) and isinstance(ev.body.second.second, Basic)
    assert locked.state_dict(locked.s0) == {"lock": 0, "buf": 1, "out": 0}


def test_comments_and_whitespace_are_ignored():
    base = mini("x := 1")
    noisy = mini("x   :=\n   1  # set x\n")
    assert base == noisy


# ---------------------------------------------------------------- expressions


VARS = ("x", "y")


def exprs():
    atoms = hst.one_of(hst.sampled_from(VARS), hst.integers(0, 3).map(str))
    return hst.recursive(
        atoms,
        lambda sub: hst.one_of(
            hst.tuples(sub, hst.sampled_from(["+", "-"]), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            hst.tuples(bools_from(sub), sub, sub).map(lambda t: f"(if {t[0]} then {t[1]} else {t[2]})"),
        ),
        max_leaves=6)


def bools_from(ints):
    cmp = hst.tuples(ints, hst.sampled_from(["=", "!=", "<", "<=", ">", ">="]), ints).map(" ".join)
    return hst.recursive(
        hst.one_of(cmp, hst.sampled_from(["true", "false"])),
        lambda sub: hst.one_of(
            hst.tuples(sub, hst.sampled_from(["&", "|", "->", "<->"]), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            sub.map(lambda b: f"!({b})"),
        ),
        max_leaves=4)


@settings(max_examples=80, deadline=None)
@given(bools_from(exprs()), exprs())
def test_expression_round_trip(guard, rhs):
    m = round_trip(f"""MODEL e
VAR x : int[0..3]
VAR y : int[0..3]
CORES k0
EVENT e @ k WHERE {guard} THEN x := {rhs} END
PAR k0: (e)
POLICY
DOMAINS D
INTERF D -> D
DOME (k, ev) = D
""")
    # the printed guard means the same thing in every state
    ev = m.event_map["e"]
    again = parse_model(pretty_print(m)).event_map["e"]
    for s in m.universe():
        env = {"k": "k0"}
        assert m.eval_bexp(s, env, ev.guard) == m.eval_bexp(s, env, again.guard)


# ---------------------------------------------------------------- diagnostics


BROKEN = [
    ("PAR k0: (nope)", "undeclared event 'nope'"),
    ("VAR z : Nat\nPAR k0: (e)", "unknown type 'Nat'"),
    ("EVENT f @ k WHERE true THEN x := true END\nPAR k0: (e)", "bool"),
    ("PAR k0: (e)\nPAR k0: (e)", "PAR declared twice"),
    ("EVENT g @ k WHERE true THEN x := 1\nPAR k0: (e)", "expected END"),
    ("PAR k9: (e)", "'k9' is not a declared core"),
]


def model_with(line):
    return f"""MODEL broken
VAR x : int[0..3]
CORES k0
EVENT e @ k WHERE true THEN x := 1 END
{line}
POLICY
DOMAINS D
INTERF D -> D
DOME (k, ev) = D
"""


@pytest.mark.parametrize("line, msg", BROKEN)
def test_diagnostics_point_into_the_source(line, msg):
    text = model_with(line)
    with pytest.raises(ParseError) as ei:
        parse_model(text)
    (d,) = ei.value.diagnostics
    assert msg in d.message
    lines = text.split("\n")
    assert 1 <= d.line <= len(lines)
    assert 1 <= d.column <= len(lines[d.line - 1]) + 1
    assert d.snippet.strip() == lines[d.line - 1].strip()
    assert str(d).startswith(f"error: {d.line}:{d.column}:")


def test_undeclared_event_position():
    text = model_with("PAR k0: (nope)")
    with pytest.raises(ParseError) as ei:
        parse_model(text)
    d = ei.value.diagnostics[0]
    assert (d.line, d.column) == (5, 10)


def test_missing_policy_section():
    with pytest.raises(ParseError):
        parse_model("MODEL m\nVAR x : int[0..1]\nCORES k0\n")


def test_source_file_origin_survives():
    src = SourceFile(model_with("PAR k0: (e)"), "example.pic")
    assert parse_model(src).name == "broken"


@given(hst.text(alphabet="abcxyz0123 :=;()[]{}.,<>-+*|&!~'#\n", max_size=60))
def test_tokenizer_never_crashes_unexpectedly(text):
    try:
        toks = tokenize(text)
    except Exception as e:  # only the parser's own failure type may escape
        assert type(e).__name__ == "_Fail"
    else:
        assert all(t.line >= 1 for t in toks)


@settings(max_examples=60, deadline=None)
@given(hst.text(max_size=80))
def test_parser_rejects_garbage_cleanly(text):
    try:
        parse_model(text)
    except ParseError as e:
        assert e.diagnostics and all(d.line >= 1 for d in e.diagnostics)


def test_flat_rendering_of_seq_is_stable(locked):
    assert flat(pretty_print(locked)).count("AWAIT") == 1
