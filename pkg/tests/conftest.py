import re
from pathlib import Path

import pytest

from picore import parse_model
from picore.model import AnonyEvent, EvtSeq, EvtSet, PROGRAM_TYPES, Par
from picore.syntax import esys_str, prog_str

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"


def flat(text):
    return re.sub(r"\s+", " ", text).strip()


def render(spec):
    """One-line rendering of a residual specification."""
    if spec is None:
        return "DONE"
    if isinstance(spec, PROGRAM_TYPES):
        return flat(prog_str(spec))
    if isinstance(spec, AnonyEvent):
        return "DONE" if spec.prog is None else f"ANON {flat(prog_str(spec.prog))} END"
    if isinstance(spec, EvtSeq) and isinstance(spec.event, AnonyEvent) and spec.event.prog is None:
        return f"DONE ; {render(spec.rest)}"
    if isinstance(spec, Par):
        return " | ".join(f"{k}: {render(s)}" for k, s in spec.systems)
    if isinstance(spec, (EvtSeq, EvtSet)):
        return flat(esys_str(spec))
    return flat(repr(spec))


def mini(body="SKIP", decls="VAR x : int[0..3]\nVAR y : int[0..3]", params="", guard="true", extra=""):
    """Single-core model whose only event runs ``body``."""
    p = f" ({params})" if params else ""
    return parse_model(f"""MODEL mini
{decls}
CORES k0
EVENT e{p} @ k WHERE {guard} THEN {body} END
{extra}
PAR k0: (e)
POLICY
DOMAINS D
INTERF D -> D
DOME (k, ev) = D
""")


def st(model, **vals):
    """State tuple with unspecified variables taken from the initial state."""
    base = model.state_dict(model.s0)
    unknown = set(vals) - set(base)
    assert not unknown, unknown
    base.update(vals)
    return tuple(base[v] for v, _ in model.vars)


def body_of(model, name="e"):
    return model.event_map[name].body


@pytest.fixture(scope="session")
def locked():
    return parse_model((MODELS / "locked.pic").read_text())


@pytest.fixture(scope="session")
def bad_model():
    return parse_model((MODELS / "bad.pic").read_text())
