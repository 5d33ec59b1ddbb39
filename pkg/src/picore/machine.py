"""State machine over the reachable configurations of a closed parallel system."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import ModelTooLarge, ResourceCap
from .semantics import Config, SemanticsError, initial_config, step_par


class MachineTooLarge(SemanticsError, ResourceCap):
    def __init__(self, cap):
        super().__init__(f"configuration space exceeds cap {cap}")
        self.cap = cap


class Action(NamedTuple):
    label: object  # semantics.Label, never env
    event: str
    domain: str

    def __str__(self):
        return f"{self.label}/{self.event}/{self.domain}"


@dataclass
class Machine:
    model: object
    configs: tuple  # reachable configurations; index 0 is the initial one
    actions: tuple  # interned actions in first-discovery order
    edges: dict  # Action -> {source index: (target indices)}
    index: dict = field(repr=False)
    _mats: dict = field(default_factory=dict, repr=False)

    @property
    def initial(self):
        return self.configs[0]

    def __len__(self):
        return len(self.configs)

    def matrix(self, a):
        """Boolean step matrix of action ``a`` over configuration indices."""
        m = self._mats.get(a)
        if m is None:
            n = len(self.configs)
            m = np.zeros((n, n), dtype=np.uint8)
            for i, js in self.edges.get(a, {}).items():
                m[i, list(js)] = 1
            self._mats[a] = m
        return m

    def pairs(self, a):
        return {(i, j) for i, js in self.edges.get(a, {}).items() for j in js}


def action_of(model, cfg, label):
    """Action triple for a transition leaving ``cfg`` with ``label``."""
    core = label.core
    ev = label.event if label.kind == "occ" else cfg.ctx[model.cores.index(core)]
    d = model.dom_e(cfg.state, core, ev)
    if d not in model.domains:
        raise SemanticsError(f"dom_e yields {d!r}, which is not a declared domain")
    return Action(label, ev, d)


def build_machine(model, cap=200_000):
    """Reachable configurations from the initial one, with interned actions."""
    size = model.universe_size()
    if size > model.universe_cap:
        raise ModelTooLarge(size, model.universe_cap)
    c0 = initial_config(model)
    index = {c0: 0}
    configs = [c0]
    actions = {}
    edges = {}
    i = 0
    while i < len(configs):
        c = configs[i]
        for lab, nxt in step_par(model, c):
            a = action_of(model, c, lab)
            actions.setdefault(a, None)
            j = index.get(nxt)
            if j is None:
                if len(configs) >= cap:
                    raise MachineTooLarge(cap)
                j = index[nxt] = len(configs)
                configs.append(nxt)
            row = edges.setdefault(a, {}).setdefault(i, [])
            if j not in row:
                row.append(j)
        i += 1
    edges = {a: {k: tuple(v) for k, v in rows.items()} for a, rows in edges.items()}
    return Machine(model, tuple(configs), tuple(actions), edges, index)


def run(mach, acts):
    """Relation of ``run(as)`` as a set of index pairs; ``run([])`` is the identity."""
    rel = {(i, i) for i in range(len(mach.configs))}
    for a in acts:
        step = mach.edges.get(a, {})
        rel = {(i, k) for i, j in rel for k in step.get(j, ())}
    return rel


def execution_idx(mach, i, acts):
    cur = {i}
    for a in acts:
        step = mach.edges.get(a, {})
        cur = {k for j in cur for k in step.get(j, ())}
        if not cur:
            break
    return cur


def execution(mach, cfg, acts):
    """Configurations reached from ``cfg`` by running ``acts``."""
    i = mach.index.get(cfg)
    if i is None:
        i = _adopt(mach, cfg)
        if i is None:
            return set()
    return {mach.configs[j] for j in execution_idx(mach, i, acts)}


def _adopt(mach, cfg):
    # configurations outside the reachable set have no outgoing machine steps
    return None


def reachable(mach, cfg):
    return cfg in mach.index


def digest(cfg):
    return hashlib.sha256(repr((cfg.state, cfg.ctx, cfg.spec)).encode()).hexdigest()[:12]


def dump_graph(mach):
    """Line-oriented export: ``node <i> <digest> <state>`` then ``edge <i> <j> <δ/ev/d>``."""
    out = [f"# machine {mach.model.name}: {len(mach.configs)} nodes, {len(mach.actions)} actions"]
    for i, c in enumerate(mach.configs):
        out.append(f"node {i} {digest(c)} {c.state!r} {c.ctx!r}")
    for a in mach.actions:
        for i, js in sorted(mach.edges[a].items()):
            for j in js:
                out.append(f"edge {i} {j} {a}")
    return "\n".join(out) + "\n"
