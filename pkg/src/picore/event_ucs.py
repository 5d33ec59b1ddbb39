"""Event-level unwinding conditions and compositional certification.

The event conditions quantify over admissible states: the whole universe, or
the states satisfying the model's INVARIANT when one is declared. In that case
certification adds a premise that every reachable configuration satisfies the
invariant, which keeps the argument from event conditions to machine
conditions intact.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import ifs
from .ifs import Verdict
from .machine import build_machine
from .model import AnonyEvent, BasicEvent, evts
from .rg import OutlineError, RGCond, Space, check_outline, declared_event_outline, gamma_cond, par_outline
from .semantics import _program_succ

SCE_MODES = ("literal", "action")


def state_classes(space, d):
    """View-class code of every universe state for domain ``d``."""
    model = space.model
    rel = model.equiv_map.get(d)
    if rel is None:
        table = {}
        return np.array([table.setdefault(model.ob(s, d), len(table)) for s in space.states], dtype=np.int64)
    m = space.rel(rel)
    return np.argmax(m, axis=1).astype(np.int64)


def admissible(space):
    model = space.model
    if model.invariant is None:
        return space.univ()
    return space.set(model.invariant)


def _dom_codes(space, core, ev):
    model = space.model
    return np.array([model.domains.index(model.dom_e(s, core, ev)) for s in space.states], dtype=np.int64)


def _occurring(model):
    """(event, core) pairs for every basic event of every core's system."""
    out = []
    for core, sys in model.par.systems:
        for e in evts(sys):
            if isinstance(e, BasicEvent):
                out.append((e, core))
    return out


class _Ctx:
    def __init__(self, model, space=None):
        self.model = model
        self.space = space or Space(model)
        self.adm = admissible(self.space)
        self.cls = {d: state_classes(self.space, d) for d in model.domains}
        self.inter = np.array([[model.interferes(a, b) for b in model.domains] for a in model.domains], dtype=bool)


def check_lre(model, space=None, ctx=None):
    """Guarantee pairs of an event change only views its domain may reach."""
    t0 = time.perf_counter()
    c = ctx or _Ctx(model, space)
    sp = c.space
    for ev, core in _occurring(model):
        try:
            g = gamma_cond(sp, ev.name, core).guar
        except OutlineError as e:
            return Verdict("LRE", False, {"event": ev.name, "core": core, "reason": str(e)})
        dom = _dom_codes(sp, core, ev.name)
        for di, d in enumerate(model.domains):
            rows = c.adm & ~c.inter[dom, di]
            cls = c.cls[d]
            bad = np.argwhere(g & rows[:, None] & (cls[:, None] != cls[None, :]))
            if len(bad):
                i, j = bad[0]
                return Verdict("LRE", False, {"event": ev.name, "core": core, "domain": d,
                                              "event_domain": model.domains[dom[i]],
                                              "s": sp.show(i), "s_next": sp.show(j)},
                               meta={"seconds": round(time.perf_counter() - t0, 4)})
    return Verdict("LRE", True, meta={"seconds": round(time.perf_counter() - t0, 4)})


def action_effects(space, ev, core, adm):
    """State pairs realised by program steps of ``ev`` on ``core`` from admissible states.

    Only instances whose guard holds in some admissible state contribute.
    """
    model = space.model
    eff = np.zeros((space.n, space.n), dtype=bool)
    srcs = np.flatnonzero(adm)
    for vals in model.param_valuations(ev):
        guard, body = model.instantiate(ev, vals, core)
        if not any(guard(space.states[i]) for i in srcs):
            continue
        seen = {body}
        todo = [body]
        while todo:
            p = todo.pop()
            for i in srcs:
                for q, t in _program_succ(model, p, space.states[i]):
                    eff[i, space.index[t]] = True
                    if q is not None and q not in seen:
                        seen.add(q)
                        todo.append(q)
    return eff


def check_sce(model, space=None, mode="literal", ctx=None):
    """Equally viewed states reach equally viewed states under an event's guarantee.

    ``mode="literal"`` compares every pair of guarantee steps. ``mode="action"``
    compares only guarantee steps that a program step of the event realises;
    occurrence steps leave the state unchanged and are always consistent.
    """
    if mode not in SCE_MODES:
        raise ValueError(f"unknown SCE mode {mode!r}")
    t0 = time.perf_counter()
    c = ctx or _Ctx(model, space)
    sp = c.space
    name = "SCE" if mode == "literal" else "SCE[action]"
    for ev, core in _occurring(model):
        try:
            g = gamma_cond(sp, ev.name, core).guar
        except OutlineError as e:
            return Verdict(name, False, {"event": ev.name, "core": core, "reason": str(e)})
        if mode == "action":
            g = g & action_effects(sp, ev, core, c.adm)
        dom = _dom_codes(sp, core, ev.name)
        for di, d in enumerate(model.domains):
            cd = c.cls[d]
            for i in np.flatnonzero(c.adm):
                out1 = np.flatnonzero(g[i])
                if not len(out1):
                    continue
                peers = c.adm & (cd == cd[i])
                if c.inter[dom[i], di]:
                    ca = c.cls[model.domains[dom[i]]]
                    peers &= ca == ca[i]
                img = g[peers].any(axis=0)
                k1 = cd[out1[0]]
                if (cd[out1] != k1).any() or (cd[np.flatnonzero(img)] != k1).any():
                    t1, j, t2 = _sce_witness(g, peers, cd, out1)
                    return Verdict(name, False, {
                        "event": ev.name, "core": core, "domain": d,
                        "event_domain": model.domains[dom[i]],
                        "s1": sp.show(i), "s2": sp.show(j),
                        "s1_next": sp.show(t1), "s2_next": sp.show(t2)},
                        meta={"seconds": round(time.perf_counter() - t0, 4), "mode": mode})
    return Verdict(name, True, meta={"seconds": round(time.perf_counter() - t0, 4), "mode": mode})


def _sce_witness(g, peers, cd, out1):
    for j in np.flatnonzero(peers):
        for t2 in np.flatnonzero(g[j]):
            for t1 in out1:
                if cd[t1] != cd[t2]:
                    return int(t1), int(j), int(t2)
    raise AssertionError("no witness although a mismatch was detected")


# ---------------------------------------------------------------- certification


@dataclass
class CertificationReport:
    model: str
    premises: list = field(default_factory=list)  # [(label, Verdict)]
    oracles: list = field(default_factory=list)
    sce_mode: str = "literal"

    @property
    def certified(self):
        return all(v.holds for _, v in self.premises)

    def premise(self, label):
        for lab, v in self.premises:
            if lab == label or lab.startswith(label):
                return v
        raise KeyError(label)

    def first_failure(self):
        for lab, v in self.premises:
            if not v.holds:
                return lab, v
        return None

    def to_dict(self):
        return {"model": self.model, "certified": self.certified, "sce_mode": self.sce_mode,
                "premises": [{"premise": lab, **v.to_dict()} for lab, v in self.premises],
                "oracles": [v.to_dict() for v in self.oracles]}

    def lines(self):
        out = [f"certification of {self.model} (SCE mode: {self.sce_mode})"]
        for lab, v in self.premises:
            out.append(f"  [{'ok' if v.holds else 'FAIL'}] {lab}")
            if not v.holds and v.witness:
                out.append(f"         witness: {v.witness}")
        verdict = "certified: noninfluence and nonleakage follow by composition" if self.certified \
            else "not certified"
        out.append(f"  => {verdict}")
        for v in self.oracles:
            out.append(f"  cross-check {v.summary()}")
        return out


def certify(model, k=None, sce_mode="literal", space=None, mach=None):
    """Check each premise of the compositional certification separately."""
    space = space or Space(model)
    rep = CertificationReport(model.name, sce_mode=sce_mode)
    events = evts(model.par)
    raw = [e for e in events if isinstance(e, AnonyEvent)]
    rep.premises.append(("(1) all events are basic", Verdict(
        "basic-events", not raw, {"anonymous_events": len(raw)} if raw else None)))

    bad = None
    checked = 0
    for ev, core in _occurring(model):
        try:
            v = check_outline(space, declared_event_outline(space, ev, core))
        except OutlineError as e:
            v = Verdict("outline", False, {"premise": "Gamma", "path": f"/{ev.name}@{core}", "detail": str(e)})
        checked += 1
        if not v.holds:
            bad = v
            v.witness = {"event": ev.name, "core": core, **v.witness}
            break
    rep.premises.append(("(2) every event satisfies its declared specification",
                         bad if bad is not None else Verdict("event-outlines", True, meta={"outlines": checked})))

    try:
        top = RGCond(space.point(model.s0), np.zeros((space.n, space.n), dtype=bool), space.full(), space.univ())
        v3 = check_outline(space, par_outline(space, model.par, top))
    except OutlineError as e:
        v3 = Verdict("outline", False, {"premise": "Gamma", "detail": str(e)})
    rep.premises.append(("(3) system satisfies <{s0}, {}, UNIV, UNIV>", v3))

    if mach is None:
        mach = build_machine(model)
    if model.invariant is not None:
        adm = admissible(space)
        outside = [c for c in mach.configs if not adm[space.index[c.state]]]
        rep.premises.append(("(3b) reachable states satisfy the invariant", Verdict(
            "invariant", not outside,
            {"state": model.state_dict(outside[0].state)} if outside else None)))
    views = ifs.Views(mach)
    rep.premises.append(("(4) observation consistency", ifs.check_oc(mach, views)))
    ctx = _Ctx(model, space)
    rep.premises.append(("(5) locally respects on events", check_lre(model, ctx=ctx)))
    rep.premises.append(("(6) step consistent on events", check_sce(model, mode=sce_mode, ctx=ctx)))
    if k is not None:
        rep.oracles.append(ifs.oracle_noninfluence(mach, k, views))
        rep.oracles.append(ifs.oracle_nonleakage(mach, k, views))
    return rep
