"""Command-line entry point.

Exit codes: 0 every check holds, 1 some check fails, 2 input error, 3 a size
cap was exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import pickle
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, arinc, event_ucs, ifs, rg
from .ifs import Verdict
from .machine import Machine, build_machine, dump_graph
from .model import ModelError, ResourceCap
from .semantics import SemanticsError, dump_trace, enumerate_computations
from .syntax import ParseError, SourceFile, parse_model, pretty_print

OK, FAIL, INPUT, CAP = 0, 1, 2, 3
PROPS = {"noninfluence": ifs.oracle_noninfluence, "nonleakage": ifs.oracle_nonleakage,
         "noninterference-r": ifs.oracle_noninterference_r}


class InputError(Exception):
    pass


class Run:
    """Collects verdicts and free-form output for one invocation."""

    def __init__(self, command, params):
        self.command = command
        self.params = params
        self.model = None
        self.checks = []
        self.text = []
        self.extra = {}
        self.t0 = time.perf_counter()

    def digest(self):
        if self.model is None:
            return None
        return hashlib.sha256(pretty_print(self.model).encode()).hexdigest()

    def add(self, verdict):
        self.checks.append(verdict)
        self.text.append(verdict.summary())
        if not verdict.holds and verdict.witness:
            self.text.append("  witness: " + json.dumps(verdict.witness, sort_keys=True, default=str))

    @property
    def ok(self):
        return all(v.holds for v in self.checks)

    def report(self):
        return {"tool": "picore", "version": __version__, "model_digest": self.digest(),
                "subcommand": self.command, "parameters": self.params,
                "checks": [_stable(v.to_dict()) for v in self.checks], **self.extra,
                "ok": self.ok, "seconds": round(time.perf_counter() - self.t0, 4)}


def _stable(d):
    # timings live only in the top-level ``seconds`` field
    return {k: v for k, v in d.items() if k not in ("seconds", "backend")}


# ---------------------------------------------------------------- loading


def load(path, universe_cap=None):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    return parse_model(SourceFile(text, str(path)), universe_cap)


def machine_for(model, cap):
    """Build the machine, reusing a pickled copy under PICORE_CACHE_DIR when present."""
    root = os.environ.get("PICORE_CACHE_DIR")
    if not root:
        return build_machine(model, cap)
    key = hashlib.sha256((pretty_print(model) + f"|{cap}|{__version__}").encode()).hexdigest()
    path = Path(root) / f"machine-{key}.pickle"
    if path.exists():
        try:
            configs, actions, edges = pickle.loads(path.read_bytes())
            return Machine(model, configs, actions, edges, {c: i for i, c in enumerate(configs)})
        except Exception:  # stale or corrupt entry: rebuild
            pass
    mach = build_machine(model, cap)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(pickle.dumps((mach.configs, mach.actions, mach.edges)))
        tmp.replace(path)
    except OSError:
        pass
    return mach


def _parallel(jobs, fns):
    """Run thunks, keeping result order independent of ``jobs``."""
    if jobs <= 1 or len(fns) <= 1:
        return [f() for f in fns]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda f: f(), fns))


# ---------------------------------------------------------------- subcommands


def cmd_parse(args, run):
    m = run.model = load(args.file, args.universe_cap)
    if args.print:
        run.text.append(pretty_print(m).rstrip("\n"))
        return
    info = {"name": m.name, "variables": [v for v, _ in m.vars], "cores": list(m.cores),
            "events": [e.name for e in m.events], "domains": list(m.domains),
            "universe_size": m.universe_size()}
    run.extra["model"] = info
    run.text.append(f"model {m.name}: {len(m.vars)} variable(s), {len(m.cores)} core(s), "
                    f"{len(m.events)} event(s), {len(m.domains)} domain(s), "
                    f"{info['universe_size']} state(s)")


def cmd_simulate(args, run):
    m = run.model = load(args.file, args.universe_cap)
    comps = enumerate_computations(m, max_len=args.max_len, cap=args.max_computations)
    run.extra["computations"] = len(comps)
    run.text.append(f"{len(comps)} computation(s) with at most {args.max_len} configuration(s)")
    shown = [c for c in comps if len(c) == max(len(x) for x in comps)][: args.show]
    traces = []
    for i, c in enumerate(shown):
        t = dump_trace(m, c)
        traces.append(t.splitlines())
        run.text.append(f"-- trace {i}")
        run.text.append(t)
    run.extra["traces"] = traces


def cmd_machine(args, run):
    m = run.model = load(args.file, args.universe_cap)
    mach = machine_for(m, args.machine_cap)
    run.extra["machine"] = {"configurations": len(mach), "actions": [str(a) for a in mach.actions]}
    if args.emit_graph:
        run.text.append(dump_graph(mach).rstrip("\n"))
    else:
        run.text.append(f"{len(mach)} reachable configuration(s), {len(mach.actions)} action(s)")


def cmd_check_ucs(args, run):
    m = run.model = load(args.file, args.universe_cap)
    mach = machine_for(m, args.machine_cap)
    views = ifs.Views(mach)
    for v in _parallel(args.jobs, [lambda: ifs.check_oc(mach, views), lambda: ifs.check_lr(mach, views),
                                   lambda: ifs.check_sc(mach, views)]):
        run.add(v)


def cmd_check_event_ucs(args, run):
    m = run.model = load(args.file, args.universe_cap)
    run.add(event_ucs.check_lre(m))
    run.add(event_ucs.check_sce(m, mode=args.sce_mode))


def cmd_check_rg(args, run):
    m = run.model = load(args.file, args.universe_cap)
    sp = rg.Space(m)
    for ev, core in event_ucs._occurring(m):
        try:
            v = rg.check_outline(sp, rg.declared_event_outline(sp, ev, core))
        except rg.OutlineError as e:
            v = Verdict("outline", False, {"detail": str(e)})
        v.name = f"outline {ev.name}@{core}"
        run.add(v)
        if args.semantic and v.holds:
            w = rg.semantic_validity(sp, ev, rg.gamma_cond(sp, ev.name, core), args.max_len, core=core)
            w.name = f"validity {ev.name}@{core}"
            run.add(w)
    top = rg.RGCond(sp.point(m.s0), np.zeros((sp.n, sp.n), dtype=bool), sp.full(), sp.univ())
    try:
        v = rg.check_outline(sp, rg.par_outline(sp, m.par, top))
    except rg.OutlineError as e:
        v = Verdict("outline", False, {"detail": str(e)})
    v.name = "outline system"
    run.add(v)
    if args.semantic and v.holds:
        w = rg.semantic_validity(sp, m.par, top, args.max_len)
        w.name = "validity system"
        run.add(w)


def cmd_check_ifs(args, run):
    m = run.model = load(args.file, args.universe_cap)
    mach = machine_for(m, args.machine_cap)
    run.add(PROPS[args.prop](mach, args.k))


def _certify(args, run, m):
    run.model = m
    mach = machine_for(m, args.machine_cap)
    rep = event_ucs.certify(m, k=args.k, sce_mode=args.sce_mode, mach=mach)
    for lab, v in rep.premises:
        v.name = lab
        run.add(v)
    for v in rep.oracles:
        v.name = f"cross-check {v.name}"
        run.add(v)
    run.extra["certified"] = rep.certified
    run.text.append("certified" if rep.certified else "not certified")


def cmd_certify(args, run):
    _certify(args, run, load(args.file, args.universe_cap))


def cmd_arinc(args, run):
    try:
        conf = arinc.KernelConfig(
            args.cores,
            arinc.parse_deployment(args.partitions) if args.partitions else {"P1": (0,), "P2": (1,)},
            arinc.parse_channels(args.channels) if args.channels is not None else (arinc.Channel("P1", ("P2",)),),
            args.messages)
        text = arinc.model_text(conf, args.mutation, args.schedule)
    except ModelError as e:
        raise InputError(str(e)) from None
    if args.emit_model:
        if args.emit_model == "-":
            run.text.append(text.rstrip("\n"))
        else:
            Path(args.emit_model).write_text(text)
            run.text.append(f"wrote {args.emit_model}")
        run.model = parse_model(text)
        return
    _certify(args, run, parse_model(SourceFile(text, "<arinc>"), args.universe_cap))


# ---------------------------------------------------------------- argument parsing


def build_parser():
    p = argparse.ArgumentParser(prog="picore", description="Check event-based concurrent models.")
    p.add_argument("--version", action="version", version=f"picore {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the structured report")
    common.add_argument("--jobs", type=int, default=1, help="worker threads (output is order-stable)")
    common.add_argument("--universe-cap", type=int, default=None, help="largest declared state universe (default 10^6)")
    common.add_argument("--machine-cap", type=int, default=200_000, help="largest reachable configuration set")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, file=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if file:
            sp.add_argument("file")
        sp.set_defaults(fn=fn)
        return sp

    s = add("parse", cmd_parse, "parse and validate a model")
    s.add_argument("--print", action="store_true", help="pretty-print the canonical form")
    s = add("simulate", cmd_simulate, "enumerate bounded computations")
    s.add_argument("--max-len", type=int, default=4)
    s.add_argument("--max-computations", type=int, default=10**6)
    s.add_argument("--show", type=int, default=3, help="number of traces to print")
    s = add("machine", cmd_machine, "build the state machine")
    s.add_argument("--emit-graph", action="store_true")
    add("check-ucs", cmd_check_ucs, "observation consistency, local respect, step consistency")
    s = add("check-event-ucs", cmd_check_event_ucs, "event-level unwinding conditions")
    s.add_argument("--sce-mode", choices=event_ucs.SCE_MODES, default="literal")
    s = add("check-rg", cmd_check_rg, "check rely-guarantee outlines of declared specifications")
    s.add_argument("--semantic", action="store_true", help="also run the bounded validity oracle")
    s.add_argument("--max-len", type=int, default=4)
    s = add("check-ifs", cmd_check_ifs, "bounded security oracle")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--prop", choices=sorted(PROPS), default="noninfluence")
    s = add("certify", cmd_certify, "compositional certification")
    s.add_argument("--k", type=int, default=None, help="also cross-check oracles at this bound")
    s.add_argument("--sce-mode", choices=event_ucs.SCE_MODES, default="literal")
    s = add("arinc", cmd_arinc, "separation kernel case study", file=False)
    s.add_argument("--cores", type=int, default=2)
    s.add_argument("--partitions", help='deployment, e.g. "P1:0;P2:1"')
    s.add_argument("--channels", help='channels, e.g. "P1>P2;P2>P1+P3"')
    s.add_argument("--messages", type=int, default=1)
    s.add_argument("--mutation", choices=arinc.MUTATIONS)
    s.add_argument("--schedule", choices=arinc.SCHEDULES, default="choose",
                   help="any deployed partition, or a fixed first choice")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--sce-mode", choices=event_ucs.SCE_MODES, default="literal")
    s.add_argument("--emit-model", metavar="PATH", help="write the generated model ('-' for stdout) and stop")
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("fn", "json", "command", "jobs")}
    run = Run(args.command, params)
    code = OK
    try:
        args.fn(args, run)
        code = OK if run.ok else FAIL
    except ParseError as e:
        run.extra["diagnostics"] = [d.__dict__ for d in e.diagnostics]
        run.text += [str(d) for d in e.diagnostics]
        code = INPUT
    except ResourceCap as e:
        run.extra["error"] = str(e)
        run.text.append(f"resource cap: {e}")
        code = CAP
    except (InputError, ModelError, ifs.PolicyError) as e:
        run.extra["error"] = str(e)
        run.text.append(f"error: {e}")
        code = INPUT
    except SemanticsError as e:
        run.extra["error"] = str(e)
        run.text.append(f"error: {e}")
        code = INPUT
    run.extra["exit_code"] = code
    if args.json:
        out.write(json.dumps(run.report(), indent=2, sort_keys=True, default=str) + "\n")
    else:
        out.write("\n".join(run.text) + "\n")
    return code
