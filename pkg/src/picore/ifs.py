"""Intransitive purging, unwinding conditions and bounded security oracles.

Oracles enumerate action sequences by increasing length, lexicographically in
``mach.actions`` order, and domains in declaration order; the first witness in
that order is reported.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .machine import execution_idx


class PolicyError(Exception):
    pass


@dataclass
class Verdict:
    name: str
    holds: bool
    witness: dict | None = None
    bound: int | None = None
    meta: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {"property": self.name, "bound": self.bound, "holds": self.holds,
                "witness": self.witness, **self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=str)

    def summary(self):
        tag = "holds" if self.holds else "FAILS"
        k = f" (k={self.bound})" if self.bound is not None else ""
        extra = ""
        if self.meta.get("vacuous"):
            extra = f"; {self.meta['vacuous']} inexecutable item(s) passed vacuously"
        return f"{self.name}{k}: {tag}{extra}"


# ---------------------------------------------------------------- purging


def sources(acts, d, policy):
    """Domains allowed to pass information to ``d`` while ``acts`` run."""
    if not acts:
        return frozenset({d})
    rest = sources(acts[1:], d, policy)
    da = acts[0].domain
    if any(policy.interferes(da, v) for v in rest):
        return rest | {da}
    return rest


def ipurge(acts, d, policy):
    """Subsequence of ``acts`` whose domains may reach ``d``."""
    if not acts:
        return ()
    tail = ipurge(acts[1:], d, policy)
    if acts[0].domain in sources(acts, d, policy):
        return (acts[0],) + tail
    return tail


# ---------------------------------------------------------------- views


def _codes(values):
    table = {}
    return np.array([table.setdefault(v, len(table)) for v in values], dtype=np.int64)


class Views:
    """Per-domain observation codes and view-class codes over machine configurations."""

    def __init__(self, mach):
        self.mach = mach
        model = mach.model
        states = [c.state for c in mach.configs]
        self.ob = {d: _codes([model.ob(s, d) for s in states]) for d in model.domains}
        self.cls = {}
        self.equivalence_errors = {}
        for d in model.domains:
            if d not in model.equiv_map:
                self.cls[d] = self.ob[d]
                continue
            uniq = sorted(set(states))
            pos = {s: i for i, s in enumerate(uniq)}
            rel = model.relation(model.equiv_map[d])
            m = np.array([[rel(a, b) for b in uniq] for a in uniq], dtype=bool)
            err = _equivalence_defect(m)
            if err is not None:
                i, j, what = err
                self.equivalence_errors[d] = (uniq[i], uniq[j], what)
            first = np.argmax(m, axis=1) if len(uniq) else np.zeros(0, dtype=np.int64)
            self.cls[d] = np.array([first[pos[s]] for s in states], dtype=np.int64)

    def require_equivalences(self):
        if self.equivalence_errors:
            d, (a, b, what) = next(iter(self.equivalence_errors.items()))
            raise PolicyError(f"view relation of {d} is not {what} (states {a} and {b})")


def _equivalence_defect(m):
    n = m.shape[0]
    for i in range(n):
        if not m[i, i]:
            return (i, i, "reflexive")
    bad = np.argwhere(m != m.T)
    if len(bad):
        return (int(bad[0][0]), int(bad[0][1]), "symmetric")
    sq = (m.astype(np.int32) @ m.astype(np.int32)) > 0
    bad = np.argwhere(sq & ~m)
    if len(bad):
        return (int(bad[0][0]), int(bad[0][1]), "transitive")
    return None


def describe(mach, i):
    c = mach.configs[i]
    return {"index": int(i), "state": mach.model.state_dict(c.state), "ctx": dict(zip(mach.model.cores, c.ctx))}


# ---------------------------------------------------------------- unwinding conditions


def check_oc(mach, views=None):
    """Related configurations have equal observations, for every domain."""
    t0 = time.perf_counter()
    views = views or Views(mach)
    n = len(mach)
    eye = np.eye(n, dtype=np.uint8)
    for d in mach.model.domains:
        err = views.equivalence_errors.get(d)
        if err is not None:
            return Verdict("OC", False, {"domain": d, "reason": f"view relation not {err[2]}",
                                         "states": [err[0], err[1]]}, meta=_meta(t0))
        w = kernels.grouped_mismatch(eye, eye, views.ob[d], views.cls[d])
        if w is not None:
            r1, _, r2, _ = w
            return Verdict("OC", False, {"domain": d, "c1": describe(mach, r1), "c2": describe(mach, r2),
                                         "ob1": repr(mach.model.ob(mach.configs[r1].state, d)),
                                         "ob2": repr(mach.model.ob(mach.configs[r2].state, d))},
                           meta=_meta(t0))
    return Verdict("OC", True, meta=_meta(t0))


def check_lr(mach, views=None):
    """No step of an action changes the view of a domain its domain may not reach."""
    t0 = time.perf_counter()
    views = views or Views(mach)
    model = mach.model
    for a in mach.actions:
        rows, cols = np.nonzero(mach.matrix(a))
        for d in model.domains:
            if model.interferes(a.domain, d):
                continue
            cls = views.cls[d]
            bad = np.flatnonzero(cls[rows] != cls[cols])
            if len(bad):
                i, j = int(rows[bad[0]]), int(cols[bad[0]])
                return Verdict("LR", False, {"action": str(a), "domain": d,
                                             "c": describe(mach, i), "c_next": describe(mach, j)},
                               meta=_meta(t0))
    return Verdict("LR", True, meta=_meta(t0))


def check_sc(mach, views=None):
    """Equally viewed sources yield equally viewed results, action by action."""
    t0 = time.perf_counter()
    views = views or Views(mach)
    model = mach.model
    for a in mach.actions:
        s = mach.matrix(a)
        for d in model.domains:
            cd = views.cls[d]
            if model.interferes(a.domain, d):
                group = _codes(zip(cd.tolist(), views.cls[a.domain].tolist()))
            else:
                group = cd
            w = kernels.grouped_mismatch(s, s, cd, group)
            if w is not None:
                r1, c1, r2, c2 = w
                return Verdict("SC", False, {"action": str(a), "domain": d,
                                             "c1": describe(mach, r1), "c2": describe(mach, r2),
                                             "c1_next": describe(mach, c1), "c2_next": describe(mach, c2)},
                               meta=_meta(t0))
    return Verdict("SC", True, meta=_meta(t0))


def _meta(t0, **extra):
    return {"seconds": round(time.perf_counter() - t0, 4), "backend": kernels.BACKEND, **extra}


# ---------------------------------------------------------------- bounded oracles


def cost_estimate(mach, k):
    """Upper bound on (sequence, domain) items an oracle examines at bound ``k``."""
    a = len(mach.actions)
    return sum(a ** i for i in range(k + 1)) * len(mach.model.domains)


def _oracle(mach, k, mode, views=None):
    t0 = time.perf_counter()
    if k < 0:
        raise ValueError("bound must be non-negative")
    views = views or Views(mach)
    views.require_equivalences()
    model = mach.model
    n = len(mach)
    acts = mach.actions
    eye = np.eye(n, dtype=np.uint8)
    mats = [mach.matrix(a) for a in acts]
    own = np.arange(n, dtype=np.int64)

    @lru_cache(maxsize=4096)
    def exec_matrix(seq):
        if not seq:
            return eye
        return kernels.compose(exec_matrix(seq[:-1]), mats[seq[-1]])

    group_cache = {}

    def groups(src):
        hit = group_cache.get(src)
        if hit is None:
            doms = sorted(src, key=model.domains.index)
            hit = _codes(zip(*(views.cls[x].tolist() for x in doms)))
            group_cache[src] = hit
        return hit

    stats = {"items": 0, "vacuous": 0}

    def visit(seq, e1):
        acts_seq = tuple(acts[i] for i in seq)
        for d in model.domains:
            stats["items"] += 1
            if mode == "nonleakage":
                e2, purged = e1, acts_seq
            else:
                purged = ipurge(acts_seq, d, model)
                e2 = exec_matrix(tuple(acts.index(a) for a in purged))
            if not e2.any():
                stats["vacuous"] += 1
                continue
            group = own if mode == "noninterference_r" else groups(sources(acts_seq, d, model))
            w = kernels.grouped_mismatch(e1, e2, views.ob[d], group)
            if w is not None:
                r1, c1, r2, c2 = w
                return {"domain": d, "actions": [str(a) for a in acts_seq],
                        "purged": [str(a) for a in purged],
                        "action_ids": list(seq), "purged_ids": [acts.index(a) for a in purged],
                        "c1": describe(mach, r1), "c1_final": describe(mach, c1),
                        "c2": describe(mach, r2), "c2_final": describe(mach, c2),
                        "ob1": repr(model.ob(mach.configs[c1].state, d)),
                        "ob2": repr(model.ob(mach.configs[c2].state, d))}
        return None

    def dfs(seq, e1, length):
        if len(seq) == length:
            return visit(seq, e1)
        for i, m in enumerate(mats):
            e = kernels.compose(e1, m)
            if not e.any():
                continue
            w = dfs(seq + (i,), e, length)
            if w is not None:
                return w
        return None

    for length in range(k + 1):
        w = dfs((), eye, length)
        if w is not None:
            return Verdict(mode, False, w, bound=k, meta=_meta(t0, **stats))
    return Verdict(mode, True, None, bound=k, meta=_meta(t0, **stats))


def oracle_noninfluence(mach, k=3, views=None):
    return _oracle(mach, k, "noninfluence", views)


def oracle_nonleakage(mach, k=3, views=None):
    return _oracle(mach, k, "nonleakage", views)


def oracle_noninterference_r(mach, k=3, views=None):
    return _oracle(mach, k, "noninterference_r", views)


def recheck_witness(mach, verdict):
    """Re-establish an oracle counterexample from the machine alone."""
    w = verdict.witness
    model = mach.model
    acts = [mach.actions[i] for i in w["action_ids"]]
    purged = [mach.actions[i] for i in w["purged_ids"]]
    d = w["domain"]
    r1, c1 = w["c1"]["index"], w["c1_final"]["index"]
    r2, c2 = w["c2"]["index"], w["c2_final"]["index"]
    if c1 not in execution_idx(mach, r1, acts):
        return False
    second = acts if verdict.name == "nonleakage" else purged
    if c2 not in execution_idx(mach, r2, second):
        return False
    if verdict.name == "noninterference_r" and r1 != r2:
        return False
    if verdict.name != "noninterference_r":
        views = Views(mach)
        if any(views.cls[x][r1] != views.cls[x][r2] for x in sources(tuple(acts), d, model)):
            return False
    s1, s2 = mach.configs[c1].state, mach.configs[c2].state
    return model.ob(s1, d) != model.ob(s2, d)
