"""Small-step transitions at program, event, event-system and parallel level.

A configuration is ``Config(spec, state, ctx)`` where ``ctx`` is a tuple of
event names indexed like ``model.cores``. Successor lists are sorted by label
kind (occurrence, program action, environment), then core, then event name,
then target state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .model import (
    AnonyEvent, Await, Basic, BasicEvent, Cond, EvtSeq, EvtSet, Model, Nondt,
    Par, ResourceCap, Seq, While, evts,
)


class SemanticsError(Exception):
    pass


class ComputationCap(SemanticsError, ResourceCap):
    pass


class AwaitDivergence(SemanticsError):
    def __init__(self, site, detail):
        super().__init__(f"await divergence at {site}: {detail}")
        self.site = site


class Label(NamedTuple):
    kind: str  # "occ", "c" or "env"
    event: str | None = None
    core: str | None = None

    def __str__(self):
        if self.kind == "env":
            return "env"
        head = self.event if self.kind == "occ" else "c"
        return head if self.core is None else f"{head}@{self.core}"


ENV = Label("env")
_KIND_RANK = {"occ": 0, "c": 1, "env": 2}


class Config(NamedTuple):
    spec: object
    state: tuple
    ctx: tuple


@dataclass(frozen=True)
class Computation:
    configs: tuple
    steps: tuple

    def __post_init__(self):
        if not self.configs or len(self.steps) != len(self.configs) - 1:
            raise ValueError("a computation needs n configurations and n-1 labels")

    def __len__(self):
        return len(self.configs)

    def extend(self, label, cfg):
        return Computation(self.configs + (cfg,), self.steps + (label,))


def _order(model, label, cfg):
    core = -1 if label.core is None else model.cores.index(label.core)
    return (_KIND_RANK[label.kind], core, label.event or "", cfg.state)


def _sorted(model, succ):
    seen = set()
    out = []
    for item in succ:
        if item not in seen:
            seen.add(item)
            out.append(item)
    out.sort(key=lambda it: _order(model, *it))
    return out


# ---------------------------------------------------------------- programs


def _program_succ(model, p, s):
    """(residual program or None, new state) pairs; pure of the event context."""
    if isinstance(p, Basic):
        return [(None, model.assign(s, p.assigns))]
    if isinstance(p, Seq):
        out = []
        for q, t in _program_succ(model, p.first, s):
            out.append((p.second if q is None else Seq(q, p.second, p.mid), t))
        return out
    if isinstance(p, Cond):
        return [(p.then if model.eval_bexp(s, {}, p.cond) else p.els, s)]
    if isinstance(p, While):
        if model.eval_bexp(s, {}, p.cond):
            return [(Seq(p.body, p), s)]
        return [(None, s)]
    if isinstance(p, Await):
        if not model.eval_bexp(s, {}, p.cond):
            return []
        return [(None, t) for t in _await_finals(model, p, s)]
    if isinstance(p, Nondt):
        return [(None, t) for t in model.eval_rel(s, p.rel)]
    raise SemanticsError(f"not a program: {p!r}")


def _await_finals(model, aw, s):
    # all terminating runs of the body, explored exhaustively; any cycle means a
    # non-terminating run exists, which the atomic rule cannot represent
    fuel = 10 * model.universe_size()
    start = (aw.body, s)
    succ = {}
    stack = [start]
    while stack:
        node = stack.pop()
        if node in succ or node[0] is None:
            continue
        if len(succ) >= fuel:
            raise AwaitDivergence(_site(aw), f"inner execution exceeded fuel {fuel}")
        nxt = _program_succ(model, *node)
        succ[node] = nxt
        stack.extend(nxt)
    color = {}
    finals = set()
    for root in [start]:
        work = [(root, iter(succ.get(root, ())))]
        color[root] = 1
        while work:
            node, it = work[-1]
            child = next(it, None)
            if child is None:
                color[node] = 2
                work.pop()
                continue
            if child[0] is None:
                finals.add(child[1])
                continue
            c = color.get(child, 0)
            if c == 1:
                raise AwaitDivergence(_site(aw), "the body admits a non-terminating run")
            if c == 0:
                color[child] = 1
                work.append((child, iter(succ.get(child, ()))))
    return sorted(finals)


def _site(aw):
    pos = getattr(aw.cond, "pos", None)
    return f"AWAIT at {pos[0]}:{pos[1]}" if pos else "AWAIT"


def step_program(model, cfg, core=None):
    """Program successors of ``cfg``; program actions never touch the context."""
    lab = Label("c", None, core)
    succ = [(lab, Config(q, t, cfg.ctx)) for q, t in _program_succ(model, cfg.spec, cfg.state)]
    return _sorted(model, succ)


# ---------------------------------------------------------------- events


def _instances(model, ev, core):
    cache = model.__dict__.setdefault("_inst_cache", {})
    key = (ev, core)
    hit = cache.get(key)
    if hit is None:
        hit = [model.instantiate(ev, vals, core) for vals in model.param_valuations(ev)]
        cache[key] = hit
    return hit


def _set_ctx(model, ctx, core, name):
    i = model.cores.index(core)
    return ctx[:i] + (name,) + ctx[i + 1:]


def step_event(model, cfg, core):
    ev = cfg.spec
    if isinstance(ev, BasicEvent):
        lab = Label("occ", ev.name, core)
        ctx = _set_ctx(model, cfg.ctx, core, ev.name)
        succ = [(lab, Config(AnonyEvent(body), cfg.state, ctx))
                for guard, body in _instances(model, ev, core) if guard(cfg.state)]
        return _sorted(model, succ)
    if isinstance(ev, AnonyEvent):
        if ev.prog is None:
            return []
        return [(lab, Config(AnonyEvent(c.spec), c.state, c.ctx))
                for lab, c in step_program(model, Config(ev.prog, cfg.state, cfg.ctx), core)]
    raise SemanticsError(f"not an event: {ev!r}")


_DONE = AnonyEvent(None)


def step_evtsys(model, cfg, core):
    es = cfg.spec
    out = []
    if isinstance(es, EvtSet):
        for e in es.events:
            for lab, c in step_event(model, Config(e, cfg.state, cfg.ctx), core):
                out.append((lab, Config(EvtSeq(c.spec, es), c.state, c.ctx)))
    elif isinstance(es, EvtSeq):
        for lab, c in step_event(model, Config(es.event, cfg.state, cfg.ctx), core):
            nxt = es.rest if c.spec == _DONE else EvtSeq(c.spec, es.rest)
            out.append((lab, Config(nxt, c.state, c.ctx)))
    else:
        raise SemanticsError(f"not an event system: {es!r}")
    return _sorted(model, out)


def step_par(model, cfg):
    out = []
    for core, sys in cfg.spec.systems:
        for lab, c in step_evtsys(model, Config(sys, cfg.state, cfg.ctx), core):
            out.append((lab, Config(cfg.spec.replace(core, c.spec), c.state, c.ctx)))
    return _sorted(model, out)


def step(model, cfg, core=None):
    """Dispatch on the kind of specification."""
    spec = cfg.spec
    if isinstance(spec, Par):
        return step_par(model, cfg)
    if isinstance(spec, (EvtSet, EvtSeq)):
        return step_evtsys(model, cfg, core)
    if isinstance(spec, (BasicEvent, AnonyEvent)):
        return step_event(model, cfg, core)
    return step_program(model, cfg, core)


def initial_config(model):
    return Config(model.par, model.s0, model.x0)


# ---------------------------------------------------------------- computations


def enumerate_computations(model, spec=None, s0=None, x0=None, max_len=3, cap=10**6, core=None):
    """All closed computations with at most ``max_len`` configurations, in DFS order."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    spec = model.par if spec is None else spec
    s0 = model.s0 if s0 is None else s0
    x0 = model.x0 if x0 is None else x0
    out = []
    start = Computation((Config(spec, s0, x0),), ())
    stack = [start]
    memo = {}
    while stack:
        comp = stack.pop()
        out.append(comp)
        if len(out) > cap:
            raise ComputationCap(f"computation cap exceeded: more than {cap} computations")
        if len(comp) >= max_len:
            continue
        last = comp.configs[-1]
        succ = memo.get(last)
        if succ is None:
            succ = memo[last] = step(model, last, core)
        for lab, c in reversed(succ):
            stack.append(comp.extend(lab, c))
    return out


def is_computation(model, comp, core=None):
    """Every action step is licensed by the step relation; env steps keep the spec."""
    for (a, b), lab in zip(zip(comp.configs, comp.configs[1:]), comp.steps):
        if lab.kind == "env":
            if a.spec != b.spec:
                return False
        elif (lab, b) not in step(model, a, lab.core if core is None else core):
            return False
    return True


def sim_equal(c1, c2):
    """Same length, and pointwise equal states, contexts and transition labels."""
    if len(c1) != len(c2):
        return False
    for a, b in zip(c1.configs, c2.configs):
        if a.state != b.state or a.ctx != b.ctx:
            return False
    return c1.steps == c2.steps


def _replay_event(model, ev, comp, start):
    """Indices ``j`` such that ``comp[start..j]`` simulates a computation of ``ev``.

    Yields ``(j, finished)``; ``finished`` tells whether the event residual
    reached its terminated form at ``j``.
    """
    first = comp.configs[start]
    frontier = {ev}
    for j in range(start, len(comp)):
        if not frontier:
            return
        yield j, _DONE in frontier
        if j == len(comp) - 1:
            return
        lab, nxt = comp.steps[j], comp.configs[j + 1]
        cur = comp.configs[j]
        new = set()
        for spec in frontier:
            if lab.kind == "env":
                new.add(spec)
                continue
            for l2, c in step_event(model, Config(spec, cur.state, cur.ctx), lab.core):
                if l2 == lab and c.state == nxt.state and c.ctx == nxt.ctx:
                    new.add(c.spec)
        frontier = new
    del first


def check_serialization(model, comp, events):
    """Whether ``comp`` splits into consecutive event computations of ``events``.

    Adjacent segments share their boundary configuration: the terminated
    residual of one event and the start of the next carry the same state and
    context.
    """
    events = tuple(events)
    if not events:
        return False
    last = len(comp) - 1
    memo = {}

    def ok(i):
        if i in memo:
            return memo[i]
        memo[i] = False
        for ev in events:
            for j, finished in _replay_event(model, ev, comp, i):
                if j == last or (finished and j > i and ok(j)):
                    memo[i] = True
                    return True
        return False

    return ok(0)


def decompose(model, comp):
    """Per-core event-system computations obtained by projecting ``comp``."""
    parts = {}
    for core in model.cores:
        configs = tuple(Config(c.spec[core], c.state, c.ctx) for c in comp.configs)
        steps = tuple(lab if lab.kind != "env" and lab.core == core else ENV for lab in comp.steps)
        parts[core] = Computation(configs, steps)
    return parts


def recompose(model, parts):
    cores = model.cores
    n = len(parts[cores[0]])
    configs = []
    for j in range(n):
        ref = parts[cores[0]].configs[j]
        spec = Par(tuple((k, parts[k].configs[j].spec) for k in cores))
        configs.append(Config(spec, ref.state, ref.ctx))
    steps = []
    for j in range(n - 1):
        acting = [parts[k].steps[j] for k in cores if parts[k].steps[j].kind != "env"]
        steps.append(acting[0] if acting else ENV)
    return Computation(tuple(configs), tuple(steps))


def check_conjoin(model, comp, parts):
    """The four conjoin clauses, plus validity of every part computation."""
    cores = model.cores
    if set(parts) != set(cores):
        return False
    if any(len(parts[k]) != len(comp) for k in cores):
        return False
    for j, c in enumerate(comp.configs):
        for k in cores:
            p = parts[k].configs[j]
            if p.state != c.state or p.ctx != c.ctx or p.spec != c.spec[k]:
                return False
    for j, lab in enumerate(comp.steps):
        if lab.kind == "env":
            if any(parts[k].steps[j].kind != "env" for k in cores):
                return False
        else:
            for k in cores:
                want = lab if k == lab.core else ENV
                if parts[k].steps[j] != want:
                    return False
    return all(is_computation(model, parts[k], k) for k in cores)


def event_set_of(spec):
    return evts(spec)


# ---------------------------------------------------------------- trace dump


def state_diff(model, before, after):
    parts = []
    for (name, _), a, b in zip(model.vars, before, after):
        if a != b:
            parts.append(f"{name}: {_fmt(a)} -> {_fmt(b)}")
    return ", ".join(parts) or "-"


def _fmt(v):
    if isinstance(v, tuple):
        return "[" + ", ".join(map(_fmt, v)) + "]"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def dump_trace(model, comp):
    """One line per step: ``<idx> | <label> | <state-diff>``."""
    lines = []
    for i, lab in enumerate(comp.steps):
        a, b = comp.configs[i], comp.configs[i + 1]
        lines.append(f"{i} | {lab} | {state_diff(model, a.state, b.state)}")
    return "\n".join(lines)
