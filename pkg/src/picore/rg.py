"""Rely-guarantee conditions, proof outlines and a bounded validity oracle.

State sets are boolean vectors over ``model.universe()`` and relations are
boolean matrices indexed the same way, so every premise is decided by
enumeration.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .ifs import Verdict
from .model import (
    AnonyEvent, Await, Basic, BasicEvent, Cond, EvtSeq, EvtSet, Nondt, Par,
    PROGRAM_TYPES, ResourceCap, Seq, While, evts,
)
from .semantics import AwaitDivergence, Config, Label, _await_finals, _program_succ, step

ENV = Label("env")


class ValidityCap(ResourceCap):
    pass


class OutlineError(Exception):
    pass


class Space:
    """State universe of a model with set and relation constructors."""

    def __init__(self, model):
        self.model = model
        self.states = model.universe()
        self.n = len(self.states)
        self.index = {s: i for i, s in enumerate(self.states)}
        self._sets = {}
        self._rels = {}
        self._assign = {}

    def set(self, expr, env=None):
        key = (expr, tuple(sorted((env or {}).items())))
        hit = self._sets.get(key)
        if hit is None:
            env = env or {}
            pred = self.model.predicate(expr, self.model._env_types(env))
            hit = np.fromiter((pred(s, env) for s in self.states), dtype=bool, count=self.n)
            self._sets[key] = hit
        return hit

    def rel(self, expr, env=None):
        key = (expr, tuple(sorted((env or {}).items())))
        hit = self._rels.get(key)
        if hit is None:
            env = env or {}
            rel = self.model.relation(expr, self.model._env_types(env))
            hit = np.array([[rel(s, t, env) for t in self.states] for s in self.states], dtype=bool)
            hit = hit.reshape(self.n, self.n)
            self._rels[key] = hit
        return hit

    def univ(self):
        return np.ones(self.n, dtype=bool)

    def empty(self):
        return np.zeros(self.n, dtype=bool)

    def ident(self):
        return np.eye(self.n, dtype=bool)

    def full(self):
        return np.ones((self.n, self.n), dtype=bool)

    def point(self, s):
        v = self.empty()
        v[self.index[s]] = True
        return v

    def basic_image(self, assigns):
        """Index array ``f[i]`` of the state reached from state ``i``."""
        hit = self._assign.get(assigns)
        if hit is None:
            hit = np.array([self.index[self.model.assign(s, assigns)] for s in self.states], dtype=np.int64)
            self._assign[assigns] = hit
        return hit

    def closure(self, p, r):
        """Smallest superset of ``p`` closed under ``r``."""
        cur = p.copy()
        frontier = p.copy()
        while frontier.any():
            img = r[frontier].any(axis=0)
            frontier = img & ~cur
            cur |= img
        return cur

    def show(self, i):
        return self.model.state_dict(self.states[i])


@dataclass(eq=False)
class RGCond:
    pre: np.ndarray
    rely: np.ndarray
    guar: np.ndarray
    post: np.ndarray

    @classmethod
    def from_exprs(cls, space, pre, rely, guar, post, env=None):
        return cls(space.set(pre, env), space.rel(rely, env), space.rel(guar, env), space.set(post, env))

    def same(self, other):
        return (np.array_equal(self.pre, other.pre) and np.array_equal(self.rely, other.rely)
                and np.array_equal(self.guar, other.guar) and np.array_equal(self.post, other.post))

    def with_(self, **kw):
        return replace(self, **kw)


def stable(p, r):
    """``(holds, witness)``: no ``r`` step leaves ``p``."""
    bad = np.argwhere(p[:, None] & r & ~p[None, :])
    if len(bad):
        return False, (int(bad[0][0]), int(bad[0][1]))
    return True, None


def _subset(a, b):
    bad = np.flatnonzero(a & ~b) if a.ndim == 1 else np.argwhere(a & ~b)
    if len(bad):
        return False, tuple(int(x) for x in np.atleast_1d(bad[0]))
    return True, None


def _refl(g):
    bad = np.flatnonzero(~np.diag(g))
    if len(bad):
        return False, (int(bad[0]),)
    return True, None


# ---------------------------------------------------------------- outlines


@dataclass(eq=False)
class Outline:
    """One rule application: the node's specification, claimed condition and sub-derivations."""

    rule: str
    spec: object
    cond: RGCond
    children: tuple = ()
    core: str | None = None
    extra: dict = field(default_factory=dict)
    label: str = ""

    def walk(self, path=""):
        here = f"{path}/{self.label or self.rule}"
        yield here, self
        for c in self.children:
            yield from c.walk(here)


def _fits(space, spec, cond, build):
    """Outline for ``spec`` under ``cond``, strengthening an unstable pre via Conseq."""
    ok, _ = stable(cond.pre, cond.rely)
    if ok:
        return build(cond)
    inner = cond.with_(pre=space.closure(cond.pre, cond.rely))
    return Outline("Conseq", spec, cond, (build(inner),), label="conseq")


def strongest_post(space, prog, pre, rely):
    """R-closed set of states in which ``prog`` may terminate from ``pre``."""
    return _explore(space, prog, pre, rely)[0]


def loop_heads(space, loop, pre, rely):
    """R-closed set of states observed at the head of ``loop`` when started in ``pre``."""
    return _explore(space, loop, pre, rely)[1]


def _explore(space, prog, pre, rely):
    model = space.model
    start = [(prog, i) for i in np.flatnonzero(pre)]
    seen = set(start)
    queue = deque(start)
    finals = space.empty()
    heads = space.empty()
    while queue:
        p, i = queue.popleft()
        if p is None:
            finals[i] = True
        elif p == prog:
            heads[i] = True
        nxt = [(p, int(j)) for j in np.flatnonzero(rely[i])]
        if p is not None:
            nxt += [(q, space.index[t]) for q, t in _program_succ(model, p, space.states[i])]
        for node in nxt:
            if node not in seen:
                seen.add(node)
                queue.append(node)
    return space.closure(finals, rely), space.closure(heads, rely)


def program_outline(space, prog, cond):
    """Canonical outline of a program, filling missing mids and invariants."""
    model = space.model

    def build(c):
        if isinstance(prog, Basic):
            return Outline("Basic", prog, c, label="basic")
        if isinstance(prog, Nondt):
            return Outline("Nondt", prog, c, label="nondt")
        if isinstance(prog, Await):
            return Outline("Await", prog, c, label="await")
        if isinstance(prog, Seq):
            if prog.mid is not None:
                m = space.closure(space.set(prog.mid), c.rely)
            else:
                m = strongest_post(space, prog.first, c.pre, c.rely)
            first = program_outline(space, prog.first, c.with_(post=m))
            second = program_outline(space, prog.second, c.with_(pre=m))
            return Outline("Seq", prog, c, (first, second), extra={"mid": m}, label="seq")
        if isinstance(prog, Cond):
            b = space.set(prog.cond)
            t = program_outline(space, prog.then, c.with_(pre=c.pre & b))
            e = program_outline(space, prog.els, c.with_(pre=c.pre & ~b))
            return Outline("Cond", prog, c, (t, e), label="cond")
        if isinstance(prog, While):
            if prog.inv is not None:
                inv = space.set(prog.inv)
            else:
                inv = loop_heads(space, prog, c.pre, c.rely)
            b = space.set(prog.cond)
            body = program_outline(space, prog.body, c.with_(pre=inv & b, post=inv))
            return Outline("While", prog, c, (body,), extra={"inv": inv}, label="while")
        raise OutlineError(f"not a program: {prog!r}")

    del model
    return _fits(space, prog, cond, build)


def event_outline(space, ev, cond, core):
    if isinstance(ev, AnonyEvent):
        if ev.prog is None:
            raise OutlineError("terminated anonymous event has no outline")
        return Outline("AnonyEvt", ev, cond, (program_outline(space, ev.prog, cond),), core=core, label="anon")
    model = space.model
    children = []
    for vals in model.param_valuations(ev):
        guard, body = model.instantiate(ev, vals, core)
        g = np.fromiter((guard(s) for s in space.states), dtype=bool, count=space.n)
        child = program_outline(space, body, cond.with_(pre=cond.pre & g))
        child.label = f"body{tuple(vals)}"
        child.extra = {**child.extra, "valuation": tuple(vals)}
        children.append(child)
    return Outline("BasicEvt", ev, cond, tuple(children), core=core, label=f"{ev.name}@{core}")


def gamma_cond(space, name, core):
    g = space.model.gamma_map.get(name)
    if g is None:
        raise OutlineError(f"no rely-guarantee specification declared for event {name}")
    return RGCond.from_exprs(space, g.pre, g.rely, g.guar, g.post, {g.ctx: core})


def declared_event_outline(space, ev, core):
    """Outline of ``ev`` on ``core`` against its declared specification."""
    return event_outline(space, ev, gamma_cond(space, ev.name, core), core)


def _event_cond(space, ev, core, outer):
    if isinstance(ev, BasicEvent):
        return gamma_cond(space, ev.name, core)
    return outer


def _event_node(space, ev, core, want):
    """Outline of an event under ``want``: Conseq over its declared specification."""
    if isinstance(ev, AnonyEvent):
        return event_outline(space, ev, want, core)
    inner = declared_event_outline(space, ev, core)
    return Outline("Conseq", ev, want, (inner,), core=core, label=f"conseq:{ev.name}")


def system_outline(space, sys, cond, core):
    """Outline of an event system built from the declared event specifications."""
    if isinstance(sys, EvtSeq):
        ev = sys.event
        if isinstance(ev, BasicEvent):
            g = gamma_cond(space, ev.name, core)
            m = space.closure(g.post, cond.rely)
        else:
            m = strongest_post(space, ev.prog, cond.pre, cond.rely)
        first = _event_node(space, ev, core, cond.with_(post=m))
        rest = system_outline(space, sys.rest, cond.with_(pre=m), core)
        return Outline("EvtSeq", sys, cond, (first, rest), core=core, extra={"mid": m}, label="evtseq")
    if isinstance(sys, EvtSet):
        kids = []
        for e in sys.events:
            if isinstance(e, BasicEvent):
                kids.append(declared_event_outline(space, e, core))
            else:
                kids.append(event_outline(space, e, cond, core))
        return Outline("EvtSet", sys, cond, tuple(kids), core=core, label="evtset")
    raise OutlineError(f"not an event system: {sys!r}")


def par_outline(space, par, cond):
    """Par outline where each core guarantees the union of its events' guarantees."""
    ident = space.ident()
    gs = {}
    for core, sys in par.systems:
        g = ident.copy()
        for e in evts(sys):
            if isinstance(e, BasicEvent):
                g |= gamma_cond(space, e.name, core).guar
        gs[core] = g
    kids = []
    for core, sys in par.systems:
        rs = cond.rely.copy()
        for other, g in gs.items():
            if other != core:
                rs |= g
        pres = space.closure(cond.pre, rs)
        c = RGCond(pres, rs, gs[core], space.univ())
        node = system_outline(space, sys, c, core)
        node.label = f"{core}:{node.label}"
        kids.append(node)
    return Outline("Par", par, cond, tuple(kids), label="par")


# ---------------------------------------------------------------- checking


class _Failure(Exception):
    def __init__(self, premise, path, detail):
        super().__init__(premise)
        self.premise, self.path, self.detail = premise, path, detail


def check_outline(space, outline):
    """Check every rule premise in pre-order; the verdict names the first failure."""
    t0 = time.perf_counter()
    log = []
    count = [0]
    try:
        _check(space, outline, "", log, count)
    except _Failure as f:
        return Verdict("outline", False, {"premise": f.premise, "path": f.path, "detail": f.detail},
                       meta={"premises": count[0], "notes": log, "seconds": round(time.perf_counter() - t0, 4)})
    return Verdict("outline", True, meta={"premises": count[0], "notes": log,
                                          "seconds": round(time.perf_counter() - t0, 4)})


def _check(space, node, path, log, count):
    here = f"{path}/{node.label or node.rule}"
    c = node.cond

    def need(name, result, describe=None):
        count[0] += 1
        ok, w = result
        if not ok:
            detail = describe(w) if describe else _show(space, w)
            raise _Failure(name, here, detail)

    def shape(name, cond):
        count[0] += 1
        if not cond:
            raise _Failure(name, here, "sub-derivation does not match the rule's shape")

    rule = node.rule
    spec = node.spec
    if rule == "Basic":
        shape("Basic.form", isinstance(spec, Basic))
        f = space.basic_image(spec.assigns)
        need("Basic.post", _subset(c.pre, c.post[f]))
        need("Basic.stable-pre", stable(c.pre, c.rely))
        need("Basic.stable-post", stable(c.post, c.rely))
        eff = np.zeros_like(c.guar)
        rows = np.flatnonzero(c.pre)
        eff[rows, f[rows]] = True
        eff[rows, rows] = True
        need("Basic.guar", _subset(eff, c.guar))
    elif rule == "Nondt":
        shape("Nondt.form", isinstance(spec, Nondt))
        r = space.rel(spec.rel)
        total = r.any(axis=1)
        into = ~(r & ~c.post[None, :]).any(axis=1)
        need("Nondt.post", _subset(c.pre, into & total))
        need("Nondt.guar", _subset(c.pre[:, None] & r, c.guar))
        need("Nondt.stable-pre", stable(c.pre, c.rely))
        need("Nondt.stable-post", stable(c.post, c.rely))
    elif rule == "Await":
        shape("Await.form", isinstance(spec, Await))
        b = space.set(spec.cond)
        for i in np.flatnonzero(c.pre & b):
            try:
                finals = _await_finals(space.model, spec, space.states[i])
            except AwaitDivergence as e:
                raise _Failure("Await.terminates", here, str(e))
            for t in finals:
                j = space.index[t]
                need("Await.post", (bool(c.post[j]), (int(i), j)))
                need("Await.guar", (bool(c.guar[i, j]), (int(i), j)))
        need("Await.stable-pre", stable(c.pre, c.rely))
        need("Await.stable-post", stable(c.post, c.rely))
    elif rule == "Seq":
        shape("Seq.form", isinstance(spec, Seq) and len(node.children) == 2)
        p, q = node.children
        shape("Seq.first", p.spec == spec.first and _same(p.cond, c, post=p.cond.post))
        shape("Seq.second", q.spec == spec.second and _same(q.cond, c, pre=p.cond.post))
    elif rule == "Cond":
        shape("Cond.form", isinstance(spec, Cond) and len(node.children) == 2)
        b = space.set(spec.cond)
        t, e = node.children
        need("Cond.stable-pre", stable(c.pre, c.rely))
        shape("Cond.then", t.spec == spec.then and _same(t.cond, c, pre=c.pre & b))
        shape("Cond.else", e.spec == spec.els and _same(e.cond, c, pre=c.pre & ~b))
        need("Cond.guar-refl", _refl(c.guar))
    elif rule == "While":
        shape("While.form", isinstance(spec, While) and len(node.children) == 1)
        if not any("While" in n for n in log):
            log.append("While nodes are checked under the loop-invariant reading")
        inv = node.extra.get("inv")
        if inv is None:
            raise _Failure("While.invariant", here, "missing loop invariant annotation")
        b = space.set(spec.cond)
        (body,) = node.children
        need("While.pre-inv", _subset(c.pre, inv))
        need("While.stable-inv", stable(inv, c.rely))
        need("While.exit", _subset(inv & ~b, c.post))
        need("While.stable-post", stable(c.post, c.rely))
        shape("While.body", body.spec == spec.body and _same(body.cond, c, pre=inv & b, post=inv))
        need("While.guar-refl", _refl(c.guar))
    elif rule == "AnonyEvt":
        shape("AnonyEvt.form", isinstance(spec, AnonyEvent) and len(node.children) == 1)
        (p,) = node.children
        shape("AnonyEvt.body", p.spec == spec.prog and _same(p.cond, c))
    elif rule == "BasicEvt":
        shape("BasicEvt.form", isinstance(spec, BasicEvent) and node.core is not None)
        model = space.model
        vals = list(model.param_valuations(spec))
        shape("BasicEvt.cover", len(vals) == len(node.children))
        for v, child in zip(vals, node.children):
            guard, body = model.instantiate(spec, v, node.core)
            g = np.fromiter((guard(s) for s in space.states), dtype=bool, count=space.n)
            shape(f"BasicEvt.body{tuple(v)}", child.spec == body and _same(child.cond, c, pre=c.pre & g))
        need("BasicEvt.stable-pre", stable(c.pre, c.rely))
        need("BasicEvt.guar-refl", _refl(c.guar))
    elif rule == "EvtSeq":
        shape("EvtSeq.form", isinstance(spec, EvtSeq) and len(node.children) == 2)
        e, s = node.children
        shape("EvtSeq.first", e.spec == spec.event and _same(e.cond, c, post=e.cond.post))
        shape("EvtSeq.second", s.spec == spec.rest and _same(s.cond, c, pre=e.cond.post))
    elif rule == "EvtSet":
        shape("EvtSet.form", isinstance(spec, EvtSet) and len(node.children) == len(spec.events))
        kids = node.children
        for i, k in enumerate(kids):
            shape(f"EvtSet.1({i})", k.spec == spec.events[i])
        for i, k in enumerate(kids):
            need(f"EvtSet.2({i})", _subset(c.pre, k.cond.pre))
        for i, k in enumerate(kids):
            need(f"EvtSet.3({i})", _subset(c.rely, k.cond.rely))
        for i, k in enumerate(kids):
            need(f"EvtSet.4({i})", _subset(k.cond.guar, c.guar))
        for i, k in enumerate(kids):
            need(f"EvtSet.5({i})", _subset(k.cond.post, c.post))
        for i, ki in enumerate(kids):
            for j, kj in enumerate(kids):
                need(f"EvtSet.6({i},{j})", _subset(ki.cond.post, kj.cond.pre))
        need("EvtSet.7", stable(c.pre, c.rely))
        need("EvtSet.8", _refl(c.guar))
    elif rule == "Conseq":
        shape("Conseq.form", len(node.children) == 1 and node.children[0].spec == spec)
        (k,) = node.children
        need("Conseq.pre", _subset(c.pre, k.cond.pre))
        need("Conseq.rely", _subset(c.rely, k.cond.rely))
        need("Conseq.guar", _subset(k.cond.guar, c.guar))
        need("Conseq.post", _subset(k.cond.post, c.post))
    elif rule == "Par":
        shape("Par.form", isinstance(spec, Par) and len(node.children) == len(spec.systems))
        cores = [k for k, _ in spec.systems]
        for (core, sys), k in zip(spec.systems, node.children):
            shape(f"Par.system({core})", k.spec == sys)
            need(f"Par.pre({core})", _subset(c.pre, k.cond.pre))
            need(f"Par.rely({core})", _subset(c.rely, k.cond.rely))
            need(f"Par.guar({core})", _subset(k.cond.guar, c.guar))
            need(f"Par.post({core})", _subset(k.cond.post, c.post))
        for a, ka in zip(cores, node.children):
            for b, kb in zip(cores, node.children):
                if a != b:
                    need(f"Par.cross({a},{b})", _subset(ka.cond.guar, kb.cond.rely))
    else:
        raise OutlineError(f"unknown rule {rule!r}")
    for child in node.children:
        _check(space, child, here, log, count)


def _same(cond, ref, **over):
    want = ref.with_(**over) if over else ref
    return cond.same(want)


def _show(space, w):
    if w is None:
        return ""
    if len(w) == 1:
        return f"state {space.show(w[0])}"
    return f"states {space.show(w[0])} -> {space.show(w[1])}"


# ---------------------------------------------------------------- semantic validity


def _final(spec):
    if spec is None:
        return True
    return isinstance(spec, AnonyEvent) and spec.prog is None


def _level_has_post(spec):
    return spec is None or isinstance(spec, PROGRAM_TYPES) or isinstance(spec, (AnonyEvent, BasicEvent))


def in_assumption(space, comp, pre, rely):
    if not pre[space.index[comp.configs[0].state]]:
        return False
    for a, b, lab in zip(comp.configs, comp.configs[1:], comp.steps):
        if lab.kind == "env" and not rely[space.index[a.state], space.index[b.state]]:
            return False
    return True


def in_commitment(space, comp, guar, post, level=None):
    """Action steps in ``guar``; the final state in ``post`` only for terminated programs and events."""
    for a, b, lab in zip(comp.configs, comp.configs[1:], comp.steps):
        if lab.kind != "env" and not guar[space.index[a.state], space.index[b.state]]:
            return False
    last = comp.configs[-1]
    level = level or ("program" if _level_has_post(comp.configs[0].spec) else "system")
    if level in ("program", "event") and _final(last.spec):
        return bool(post[space.index[last.state]])
    return True


def semantic_validity(space, spec, cond, max_len=4, core=None, ctx=None, cap=500_000):
    """Bounded check that computations in A(pre, R) lie in C(G, pst).

    Environment steps follow the rely relation and keep the event context.
    Since both conditions are local to steps and final configurations, a
    breadth-first search over configurations reached within ``max_len - 1``
    steps decides the bounded property exactly.
    """
    t0 = time.perf_counter()
    model = space.model
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    ctx = model.x0 if ctx is None else ctx
    has_post = _level_has_post(spec)
    depth = {}
    parent = {}
    queue = deque()
    for i in np.flatnonzero(cond.pre):
        c = Config(spec, space.states[i], ctx)
        if c not in depth:
            depth[c] = 0
            queue.append(c)
    witness = None
    while queue and witness is None:
        c = queue.popleft()
        dc = depth[c]
        i = space.index[c.state]
        if has_post and _final(c.spec) and not cond.post[i]:
            witness = ("post", c, None)
            break
        if dc + 1 >= max_len:
            continue
        succ = [] if _final(c.spec) else list(step(model, c, core))
        succ += [(ENV, Config(c.spec, space.states[j], c.ctx)) for j in np.flatnonzero(cond.rely[i])]
        for lab, n in succ:
            if lab.kind != "env" and not cond.guar[i, space.index[n.state]]:
                parent.setdefault(n, (c, lab))
                witness = ("guar", n, (c, lab))
                break
            if n not in depth:
                if len(depth) >= cap:
                    raise ValidityCap(f"validity search exceeded {cap} configurations")
                depth[n] = dc + 1
                parent[n] = (c, lab)
                queue.append(n)
    meta = {"configs": len(depth), "seconds": round(time.perf_counter() - t0, 4)}
    if witness is None:
        return Verdict("validity", True, bound=max_len, meta=meta)
    kind, end, via = witness
    trail = [end]
    labels = []
    cur = end
    if via is not None:
        labels.append(via[1])
        cur = via[0]
        trail.append(cur)
    while cur in parent and depth.get(cur, 0) > 0:
        prev, lab = parent[cur]
        labels.append(lab)
        trail.append(prev)
        cur = prev
    trail.reverse()
    labels.reverse()
    steps = [{"label": str(l), "state": model.state_dict(t.state)} for l, t in zip(labels, trail[1:])]
    return Verdict("validity", False, {
        "violation": "action step outside the guarantee" if kind == "guar" else "terminated outside the postcondition",
        "start": model.state_dict(trail[0].state), "steps": steps,
    }, bound=max_len, meta=meta)
