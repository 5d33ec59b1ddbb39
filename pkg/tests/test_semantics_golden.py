"""Hand-stepped successor sets, one case per transition rule."""
import pytest

from picore import parse_model
from picore.model import AnonyEvent, EvtSeq
from picore.semantics import AwaitDivergence, Config, step, step_program
from conftest import body_of, mini, render, st

NO = "NOEVT"


def succ_prog(body, start, **kw):
    m = mini(body, **kw)
    cfg = Config(body_of(m), st(m, **start), (NO,))
    return m, [(str(lab), m.state_dict(c.state), render(c.spec)) for lab, c in step_program(m, cfg, "k0")]


def test_basic_assigns_and_terminates():
    _, out = succ_prog("x := x + 1", {"x": 1})
    assert out == [("c@k0", {"x": 2, "y": 0}, "DONE")]


def test_basic_multiple_assignment_is_simultaneous():
    _, out = succ_prog("x := y, y := x", {"x": 1, "y": 3})
    assert out == [("c@k0", {"x": 3, "y": 1}, "DONE")]


def test_seq_first_step_keeps_remainder():
    _, out = succ_prog("x := 1 ;; y := 2", {})
    assert out == [("c@k0", {"x": 1, "y": 0}, "y := 2")]


def test_seq_nested_residual():
    _, out = succ_prog("BEGIN x := 1 ;; y := 2 END ;; x := 3", {})
    assert out == [("c@k0", {"x": 1, "y": 0}, "y := 2 ;; x := 3")]


@pytest.mark.parametrize("x, branch", [(0, "y := 1"), (2, "y := 2")])
def test_cond_picks_branch_without_state_change(x, branch):
    _, out = succ_prog("IF x = 0 THEN y := 1 ELSE y := 2 END", {"x": x})
    assert out == [("c@k0", {"x": x, "y": 0}, branch)]


def test_while_unfolds_when_true():
    _, out = succ_prog("WHILE x < 2 DO x := x + 1 END", {"x": 0})
    assert out == [("c@k0", {"x": 0, "y": 0}, "x := (x + 1) ;; WHILE (x < 2) DO x := (x + 1) END")]


def test_while_exits_when_false():
    _, out = succ_prog("WHILE x < 2 DO x := x + 1 END", {"x": 2})
    assert out == [("c@k0", {"x": 2, "y": 0}, "DONE")]


def test_await_runs_body_atomically():
    # no intermediate state with x = 1 and y = 0 is visible
    _, out = succ_prog("AWAIT x = 0 THEN x := 1 ;; y := x + 1 END", {"x": 0})
    assert out == [("c@k0", {"x": 1, "y": 2}, "DONE")]


def test_await_blocks_on_false_condition():
    _, out = succ_prog("AWAIT x = 0 THEN x := 1 END", {"x": 1})
    assert out == []


def test_await_collects_every_terminating_run():
    _, out = succ_prog("AWAIT true THEN CHOOSE x' != x & y' = y ;; y := 1 END", {"x": 2})
    assert out == [("c@k0", {"x": 0, "y": 1}, "DONE"), ("c@k0", {"x": 1, "y": 1}, "DONE"),
                   ("c@k0", {"x": 3, "y": 1}, "DONE")]


def test_await_divergence_is_reported():
    m = mini("AWAIT true THEN WHILE true DO SKIP END END")
    with pytest.raises(AwaitDivergence):
        step_program(m, Config(body_of(m), m.s0, (NO,)), "k0")


def test_nondt_all_related_states_sorted():
    _, out = succ_prog("CHOOSE x' > x & y' = y", {"x": 1})
    assert out == [("c@k0", {"x": 2, "y": 0}, "DONE"), ("c@k0", {"x": 3, "y": 0}, "DONE")]


def test_nondt_without_related_state_blocks():
    _, out = succ_prog("CHOOSE x' > 3", {"x": 1})
    assert out == []


# ---------------------------------------------------------------- events


def ev_succ(m, spec, state=None, ctx=(NO,), core="k0"):
    cfg = Config(spec, m.s0 if state is None else state, ctx)
    return [(str(lab), m.state_dict(c.state), render(c.spec), c.ctx) for lab, c in step(m, cfg, core)]


def test_basic_event_occurs_per_enabled_valuation():
    m = mini("y := p", params="p: Small", guard="p > x",
             decls="TYPE Small = int[0..2]\nVAR x : int[0..3]\nVAR y : int[0..3]")
    out = ev_succ(m, m.event_map["e"])
    assert out == [("e@k0", {"x": 0, "y": 0}, "ANON y := 1 END", ("e",)),
                   ("e@k0", {"x": 0, "y": 0}, "ANON y := 2 END", ("e",))]


def test_basic_event_with_false_guard_is_stuck():
    m = mini("y := 1", guard="x > 0")
    assert ev_succ(m, m.event_map["e"]) == []


def test_anonymous_event_takes_program_step_and_keeps_context():
    m = mini("x := 1 ;; y := 1")
    out = ev_succ(m, AnonyEvent(body_of(m)), ctx=("e",))
    assert out == [("c@k0", {"x": 1, "y": 0}, "ANON y := 1 END", ("e",))]


SYS = """MODEL sys
VAR x : int[0..3]
VAR y : int[0..3]
CORES k0, k1
EVENT a @ k WHERE x = 0 THEN x := 1 ;; y := 1 END
EVENT b @ k WHERE true THEN y := 2 END
PAR k0: a ; (a OR b), k1: (b)
POLICY
DOMAINS D
INTERF D -> D
DOME (k, e) = D
"""


@pytest.fixture(scope="module")
def sysm():
    return parse_model(SYS)


def test_evtset_occurrence_reenters_the_set(sysm):
    es = sysm.par.systems[0][1].rest
    out = ev_succ(sysm, es, ctx=(NO, NO))
    assert out == [("a@k0", {"x": 0, "y": 0}, "ANON x := 1 ;; y := 1 END ; (a OR b)", ("a", NO)),
                   ("b@k0", {"x": 0, "y": 0}, "ANON y := 2 END ; (a OR b)", ("b", NO))]


def test_evtset_only_enabled_events(sysm):
    es = sysm.par.systems[0][1].rest
    out = ev_succ(sysm, es, state=st(sysm, x=1), ctx=(NO, NO))
    assert [o[0] for o in out] == ["b@k0"]


def test_evtseq_inner_step_keeps_rest(sysm):
    es = sysm.par.systems[0][1]
    spec = EvtSeq(AnonyEvent(body_of(sysm, "a")), es.rest)
    out = ev_succ(sysm, spec, ctx=("a", NO))
    assert out == [("c@k0", {"x": 1, "y": 0}, "ANON y := 1 END ; (a OR b)", ("a", NO))]


def test_evtseq_hands_off_when_event_finishes(sysm):
    es = sysm.par.systems[0][1]
    spec = EvtSeq(AnonyEvent(body_of(sysm, "b")), es.rest)
    out = ev_succ(sysm, spec, ctx=("b", NO))
    assert out == [("c@k0", {"x": 0, "y": 2}, "(a OR b)", ("b", NO))]


def test_par_interleaves_cores_in_order(sysm):
    out = ev_succ(sysm, sysm.par, ctx=(NO, NO), core=None)
    assert [(o[0], o[3]) for o in out] == [("a@k0", ("a", NO)), ("b@k1", (NO, "b"))]
    assert out[0][2] == "k0: ANON x := 1 ;; y := 1 END ; (a OR b) | k1: (b)"


def test_par_program_step_changes_only_its_core(sysm):
    cfg = Config(sysm.par, sysm.s0, (NO, NO))
    (_, c1), _ = step(sysm, cfg)
    nxt = step(sysm, c1)
    labels = [str(l) for l, _ in nxt]
    assert labels == ["b@k1", "c@k0"]
    moved = dict(nxt)[nxt[1][0]]
    assert moved.spec.systems[1] == c1.spec.systems[1]
    assert moved.ctx == ("a", NO)
