"""Concrete model format: parser with positioned diagnostics and a canonical printer.

The grammar is documented in ``docs/format.md``. ``pretty_print`` emits a
canonical form such that ``parse_model(pretty_print(m)) == m``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    BOOL, NOEVT, SKIP, AnonyEvent, Await, Basic, BasicEvent, Bin, BoolType, Cond,
    EnumType, EvtSeq, EvtSet, GammaSpec, In, Index, IntType, Ite, Lit, MapLit,
    MapType, Model, ModelError, Name, Nondt, Par, Quant, Seq, TupleE, Un,
    Unchanged, Upd, Val, While, compatible, const_value,
)

KEYWORDS = frozenset("""
MODEL TYPE CONST VAR CORES INIT INVARIANT EVENT WHERE THEN ELSE END SKIP IF WHILE
INV DO AWAIT CHOOSE BEGIN ANON SYSTEM PAR POLICY DOMAINS INTERF DOME OBSERVE EQUIV
GAMMA PRE RELY GUAR POST OR
""".split())
RESERVED = frozenset("forall exists if then else true false in upd unchanged int bool".split())
BUILTIN_TYPES = ("Core", "Event", "Domain")

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><->|:=|;;|->|=>|!=|<=|>=|\.\.|[=<>&|!()\[\]{},:;.+\-*@'])
""", re.VERBOSE)


@dataclass(frozen=True)
class SourceFile:
    text: str
    origin: str = "<inline>"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    line: int
    column: int
    snippet: str

    def __str__(self):
        return f"{self.severity}: {self.line}:{self.column}: {self.message}\n  {self.snippet}"


class ParseError(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Tok:
    kind: str  # id, kw, int, op, eof
    value: str
    line: int
    col: int


def tokenize(text):
    toks = []
    line, start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise _Fail(f"unexpected character {text[i]!r}", line, i - start + 1)
        kind = m.lastgroup
        val = m.group()
        col = i - start + 1
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind == "id":
            toks.append(Tok("kw" if val in KEYWORDS else "id", val, line, col))
        elif kind in ("int", "op"):
            toks.append(Tok(kind, val, line, col))
        i = m.end()
    toks.append(Tok("eof", "", line, i - start + 1))
    return toks


class _Fail(Exception):
    def __init__(self, message, line, col):
        super().__init__(message)
        self.message, self.line, self.col = message, line, col


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers

    @property
    def tok(self):
        return self.toks[self.i]

    def at(self, value, kind=None):
        t = self.tok
        return t.value == value and t.kind != "id" if kind is None else (t.kind == kind and t.value == value)

    def at_kw(self, *kws):
        return self.tok.kind == "kw" and self.tok.value in kws

    def fail(self, msg, tok=None):
        t = tok or self.tok
        raise _Fail(msg, t.line, t.col)

    def take(self, value=None):
        t = self.tok
        if value is not None and (t.value != value or t.kind == "id"):
            shown = t.value or "end of input"
            self.fail(f"expected '{value}', found '{shown}'")
        self.i += 1
        return t

    def ident(self, what="identifier"):
        t = self.tok
        if t.kind != "id" or t.value in RESERVED:
            self.fail(f"expected {what}, found '{t.value or 'end of input'}'")
        self.i += 1
        return t.value

    def pos(self):
        return (self.tok.line, self.tok.col)

    def int_lit(self):
        neg = False
        if self.at("-"):
            self.take()
            neg = True
        t = self.tok
        if t.kind != "int":
            self.fail("expected an integer")
        self.i += 1
        return -int(t.value) if neg else int(t.value)

    def ident_list(self, what):
        out = [self.ident(what)]
        while self.at(","):
            self.take()
            out.append(self.ident(what))
        return out

    # -- expressions

    def expr(self):
        if self.at("forall", "id") or self.at("exists", "id"):
            return self.quant()
        return self.iff()

    def quant(self):
        p = self.pos()
        q = self.take().value
        var = self.ident("bound variable")
        self.take(":")
        tn = self.type_name()
        self.take(".")
        return Quant(q, var, tn, self.expr(), pos=p)

    def type_name(self):
        t = self.tok
        if t.kind == "id" and t.value == "bool":
            self.i += 1
            return "bool"
        return self.ident("type name")

    def iff(self):
        e = self.imp()
        while self.at("<->"):
            p = self.pos()
            self.take()
            e = Bin("<->", e, self.imp(), pos=p)
        return e

    def imp(self):
        e = self.disj()
        if self.at("->"):
            p = self.pos()
            self.take()
            return Bin("->", e, self.imp_rhs(), pos=p)
        return e

    def imp_rhs(self):
        if self.at("forall", "id") or self.at("exists", "id"):
            return self.quant()
        return self.imp()

    def disj(self):
        e = self.conj()
        while self.at("|"):
            p = self.pos()
            self.take()
            e = Bin("|", e, self.conj(), pos=p)
        return e

    def conj(self):
        e = self.neg()
        while self.at("&"):
            p = self.pos()
            self.take()
            e = Bin("&", e, self.neg(), pos=p)
        return e

    def neg(self):
        if self.at("!"):
            p = self.pos()
            self.take()
            return Un("!", self.neg(), pos=p)
        return self.cmp()

    def cmp(self):
        e = self.add()
        t = self.tok
        if t.kind == "op" and t.value in ("=", "!=", "<", "<=", ">", ">="):
            p = self.pos()
            self.take()
            return Bin(t.value, e, self.add(), pos=p)
        if self.at("in", "id"):
            p = self.pos()
            self.take()
            self.take("{")
            items = [self.expr()]
            while self.at(","):
                self.take()
                items.append(self.expr())
            self.take("}")
            return In(e, tuple(items), pos=p)
        return e

    def add(self):
        e = self.mul()
        while self.at("+") or self.at("-"):
            p = self.pos()
            op = self.take().value
            e = Bin(op, e, self.mul(), pos=p)
        return e

    def mul(self):
        e = self.unary()
        while self.at("*"):
            p = self.pos()
            self.take()
            e = Bin("*", e, self.unary(), pos=p)
        return e

    def unary(self):
        if self.at("-"):
            p = self.pos()
            self.take()
            return Un("-", self.unary(), pos=p)
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while self.at("["):
            p = self.pos()
            self.take()
            k = self.expr()
            self.take("]")
            e = Index(e, k, pos=p)
        return e

    def primary(self):
        t = self.tok
        p = self.pos()
        if t.kind == "int":
            self.i += 1
            return Lit(int(t.value), pos=p)
        if t.kind == "id":
            if t.value in ("true", "false"):
                self.i += 1
                return Lit(t.value == "true", pos=p)
            if t.value in ("forall", "exists"):
                return self.quant()
            if t.value == "if":
                self.i += 1
                c = self.expr()
                self.take_id("then")
                a = self.expr()
                self.take_id("else")
                return Ite(c, a, self.expr(), pos=p)
            if t.value == "upd":
                self.i += 1
                self.take("(")
                b = self.expr()
                self.take(",")
                k = self.expr()
                self.take(",")
                v = self.expr()
                self.take(")")
                return Upd(b, k, v, pos=p)
            if t.value == "unchanged":
                self.i += 1
                self.take("(")
                names = self.ident_list("variable name")
                self.take(")")
                return Unchanged(tuple(names), pos=p)
            name = self.ident()
            if self.at("'"):
                self.take()
                return Name(name, True, pos=p)
            return Name(name, pos=p)
        if self.at("("):
            self.take()
            e = self.expr()
            if self.at(","):
                items = [e]
                while self.at(","):
                    self.take()
                    items.append(self.expr())
                self.take(")")
                return TupleE(tuple(items), pos=p)
            self.take(")")
            return e
        if self.at("{"):
            self.take()
            entries = []
            while True:
                kp = self.pos()
                k = Name(self.ident("map key"), pos=kp)
                self.take(":")
                entries.append((k, self.expr()))
                if not self.at(","):
                    break
                self.take()
            self.take("}")
            return MapLit(tuple(entries), pos=p)
        self.fail(f"expected an expression, found '{t.value or 'end of input'}'")

    def take_id(self, word):
        if not self.at(word, "id"):
            self.fail(f"expected '{word}', found '{self.tok.value or 'end of input'}'")
        self.i += 1

    # -- types

    def type_expr(self, types):
        p = self.pos()
        if self.at("int", "id"):
            self.take_id("int")
            self.take("[")
            lo = self.int_lit()
            self.take("..")
            hi = self.int_lit()
            self.take("]")
            if lo > hi:
                raise _Fail("empty integer range", *p)
            t = IntType(lo, hi)
        elif self.at("bool", "id"):
            self.take_id("bool")
            t = BOOL
        else:
            name = self.ident("type name")
            if name not in types:
                raise _Fail(f"unknown type '{name}'", *p)
            t = types[name]
        if self.at("=>"):
            if not isinstance(t, EnumType):
                raise _Fail("map keys must be an enumeration type", *p)
            self.take()
            t = MapType(t, self.type_expr(types))
        return t

    # -- programs

    def prog(self):
        first = self.stmt()
        if not self.at(";;"):
            return first
        self.take()
        mid = None
        if self.at("{"):
            self.take()
            mid = self.expr()
            self.take("}")
        return Seq(first, self.prog(), mid)

    def stmt(self):
        t = self.tok
        if self.at_kw("SKIP"):
            self.take()
            return SKIP
        if self.at_kw("BEGIN"):
            self.take()
            p = self.prog()
            self.block_end(t)
            return p
        if self.at_kw("IF"):
            self.take()
            c = self.expr()
            self.take("THEN")
            a = self.prog()
            b = SKIP
            if self.at_kw("ELSE"):
                self.take()
                b = self.prog()
            self.block_end(t)
            return Cond(c, a, b)
        if self.at_kw("WHILE"):
            self.take()
            c = self.expr()
            inv = None
            if self.at_kw("INV"):
                self.take()
                inv = self.expr()
            self.take("DO")
            body = self.prog()
            self.block_end(t)
            return While(c, body, inv)
        if self.at_kw("AWAIT"):
            self.take()
            c = self.expr()
            self.take("THEN")
            body = self.prog()
            self.block_end(t)
            return Await(c, body)
        if self.at_kw("CHOOSE"):
            self.take()
            return Nondt(self.expr())
        if t.kind == "id":
            assigns = [self.assignment()]
            while self.at(","):
                self.take()
                assigns.append(self.assignment())
            names = [n for n, _ in assigns]
            if len(set(names)) != len(names):
                self.fail("variable assigned twice in one parallel assignment", t)
            return Basic(tuple(assigns))
        self.fail(f"expected a statement, found '{t.value or 'end of input'}'")

    def block_end(self, opener):
        if not self.at_kw("END"):
            self.fail(f"unclosed {opener.value} block opened at {opener.line}:{opener.col}: "
                      f"expected END, found '{self.tok.value or 'end of input'}'")
        self.take()

    def assignment(self):
        p = self.pos()
        var = self.ident("variable")
        keys = []
        while self.at("["):
            self.take()
            keys.append(self.expr())
            self.take("]")
        self.take(":=")
        rhs = self.expr()
        return var, _nest_update(Name(var, pos=p), keys, rhs, p)


def _nest_update(base, keys, rhs, p):
    if not keys:
        return rhs
    inner = _nest_update(Index(base, keys[0], pos=p), keys[1:], rhs, p)
    return Upd(base, keys[0], inner, pos=p)


# ---------------------------------------------------------------- model parsing


def parse_model(src, universe_cap=None):
    """Parse and validate a model; raises ``ParseError`` carrying diagnostics."""
    if isinstance(src, str):
        src = SourceFile(src)
    try:
        return _ModelReader(src.text).read(universe_cap)
    except _Fail as f:
        raise ParseError([_diag(src.text, f.message, f.line, f.col)]) from None


def _diag(text, msg, line, col):
    lines = text.split("\n")
    line = max(1, min(line, len(lines)))
    snippet = lines[line - 1] if lines else ""
    col = max(1, min(col, len(snippet) + 1))
    return Diagnostic("error", msg, line, col, snippet)


class _ModelReader(_Parser):
    def read(self, universe_cap):
        self.types = {"bool": BOOL}
        self.type_decls, self.consts, self.vars = [], [], []
        self.cores, self.events, self.systems, self.par = None, {}, {}, None
        self.init, self.invariant = {}, None
        self.domains, self.interf, self.dome = None, [], None
        self.obs, self.equiv, self.gamma = {}, {}, []
        self.decl_pos = {}
        self.take("MODEL")
        name = self.ident("model name")
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "kw":
                self.fail(f"expected a declaration keyword, found '{t.value}'")
            handler = getattr(self, "decl_" + t.value, None)
            if handler is None:
                self.fail(f"unexpected '{t.value}' at top level")
            self.take()
            handler(t)
        return self.build(name, universe_cap)

    def declare(self, name, tok, kind):
        if name in self.decl_pos or name in RESERVED or name in BUILTIN_TYPES:
            raise _Fail(f"duplicate or reserved name '{name}' ({kind})", tok.line, tok.col)
        self.decl_pos[name] = (tok.line, tok.col)

    def decl_TYPE(self, kw):
        t = self.tok
        name = self.ident("type name")
        self.declare(name, t, "type")
        self.take("=")
        if self.at("{"):
            self.take()
            mt = self.tok
            members = self.ident_list("enumeration member")
            self.take("}")
            for m in members:
                self.declare(m, mt, "member")
            typ = EnumType(name, tuple(members))
        else:
            typ = self.type_expr(self.types)
        self.types[name] = typ
        self.type_decls.append((name, typ))

    def decl_CONST(self, kw):
        t = self.tok
        name = self.ident("constant name")
        self.declare(name, t, "constant")
        self.take(":")
        typ = self.type_expr(self.types)
        self.take("=")
        self.consts.append((name, typ, self.expr(), t))

    def decl_VAR(self, kw):
        t = self.tok
        name = self.ident("variable name")
        self.declare(name, t, "variable")
        self.take(":")
        self.vars.append((name, self.type_expr(self.types)))

    def decl_CORES(self, kw):
        if self.cores is not None:
            self.fail("CORES declared twice", kw)
        t = self.tok
        self.cores = self.ident_list("core name")
        for c in self.cores:
            self.declare(c, t, "core")
        self.types["Core"] = EnumType("Core", tuple(self.cores))

    def decl_INIT(self, kw):
        t = self.tok
        var = self.ident("variable")
        self.take(":=")
        if var in self.init:
            self.fail(f"variable '{var}' initialised twice", t)
        self.init[var] = (self.expr(), t)

    def decl_INVARIANT(self, kw):
        self.invariant = (self.expr(), kw)

    def decl_EVENT(self, kw):
        t = self.tok
        name = self.ident("event name")
        self.declare(name, t, "event")
        params = []
        if self.at("("):
            self.take()
            while True:
                pn = self.ident("parameter name")
                self.take(":")
                params.append((pn, self.type_name()))
                if not self.at(","):
                    break
                self.take()
            self.take(")")
        self.take("@")
        ctx = self.ident("core variable")
        self.take("WHERE")
        guard = self.expr()
        self.take("THEN")
        body = self.prog()
        self.block_end(kw)
        self.events[name] = (BasicEvent(name, tuple(params), ctx, guard, body), t)

    def decl_SYSTEM(self, kw):
        t = self.tok
        name = self.ident("system name")
        self.declare(name, t, "system")
        self.take("=")
        self.systems[name] = self.esys()

    def esys(self):
        t = self.tok
        if self.at("("):
            self.take()
            evs = [self.evref()]
            while self.at_kw("OR"):
                self.take()
                evs.append(self.evref())
            self.take(")")
            return EvtSet(tuple(evs))
        if t.kind == "id" and t.value in self.systems:
            self.i += 1
            return self.systems[t.value]
        ev = self.evref()
        if not self.at(";"):
            self.fail("an event must be followed by ';' and an event system "
                      "(write '(E)' for a one-event set)")
        self.take()
        return EvtSeq(ev, self.esys())

    def evref(self):
        t = self.tok
        if self.at_kw("ANON"):
            self.take()
            p = self.prog()
            self.block_end(t)
            return AnonyEvent(p)
        name = self.ident("event name")
        if name not in self.events:
            raise _Fail(f"undeclared event '{name}'", t.line, t.col)
        return self.events[name][0]

    def decl_PAR(self, kw):
        if self.par is not None:
            self.fail("PAR declared twice", kw)
        par = []
        while True:
            t = self.tok
            core = self.ident("core name")
            if self.cores is None or core not in self.cores:
                raise _Fail(f"'{core}' is not a declared core", t.line, t.col)
            self.take(":")
            par.append((core, self.esys(), t))
            if not self.at(","):
                break
            self.take()
        self.par = (par, kw)

    def decl_POLICY(self, kw):
        pass  # section marker; DOMAINS, INTERF, DOME, OBSERVE and EQUIV follow

    def decl_DOMAINS(self, kw):
        t = self.tok
        self.domains = self.ident_list("domain name")
        for d in self.domains:
            self.declare(d, t, "domain")
        self.types["Domain"] = EnumType("Domain", tuple(self.domains))

    def decl_INTERF(self, kw):
        while True:
            t = self.tok
            a = self.ident("domain")
            self.take("->")
            b = self.ident("domain")
            for d in (a, b):
                if self.domains is None or d not in self.domains:
                    raise _Fail(f"'{d}' is not a declared domain", t.line, t.col)
            self.interf.append((a, b))
            if not self.at(","):
                break
            self.take()

    def decl_DOME(self, kw):
        self.take("(")
        k = self.ident("core variable")
        self.take(",")
        ev = self.ident("event variable")
        self.take(")")
        self.take("=")
        self.dome = (k, ev, self.expr(), kw)

    def decl_OBSERVE(self, kw):
        t = self.tok
        d = self.ident("domain")
        self.take(":")
        if d in self.obs:
            self.fail(f"observation of '{d}' declared twice", t)
        self.obs[d] = (self.expr(), t)

    def decl_EQUIV(self, kw):
        t = self.tok
        d = self.ident("domain")
        self.take(":")
        self.equiv[d] = (self.expr(), t)

    def decl_GAMMA(self, kw):
        t = self.tok
        ev = self.ident("event name")
        self.take("@")
        k = self.ident("core variable")
        self.take(":")
        parts = {}
        for key in ("PRE", "RELY", "GUAR", "POST"):
            self.take(key)
            parts[key] = self.expr()
        self.gamma.append((GammaSpec(ev, k, parts["PRE"], parts["RELY"], parts["GUAR"], parts["POST"]), t))

    # -- validation and assembly

    def build(self, name, universe_cap):
        end = self.tok
        if self.cores is None:
            raise _Fail("missing CORES declaration", end.line, end.col)
        if self.par is None:
            raise _Fail("missing PAR declaration", end.line, end.col)
        if self.domains is None or self.dome is None:
            raise _Fail("missing POLICY (DOMAINS and DOME are required)", end.line, end.col)
        par_list, par_tok = self.par
        mapped = [c for c, _, _ in par_list]
        for c, _, t in par_list:
            if mapped.count(c) > 1:
                raise _Fail(f"core '{c}' mapped twice", t.line, t.col)
        missing = [c for c in self.cores if c not in mapped]
        if missing:
            raise _Fail(f"PAR does not map cores {missing}", par_tok.line, par_tok.col)
        order = {c: i for i, c in enumerate(self.cores)}
        par = Par(tuple((c, s) for c, s, _ in sorted(par_list, key=lambda x: order[x[0]])))
        for d in self.domains:
            if (d, d) not in self.interf:
                raise _Fail(f"interference relation is not reflexive: missing {d} -> {d}",
                            par_tok.line, par_tok.col)
        interf = tuple(sorted(set(self.interf), key=lambda p: (self.domains.index(p[0]), self.domains.index(p[1]))))
        # canonical literals for constants and initial values
        scope_types = {**self.types}
        probe = Model.__new__(Model)
        consts = []
        from .model import Scope
        cvals = {}
        for cname, typ, lit, t in self.consts:
            sc = Scope(scope_types, cvals, ())
            try:
                v = const_value(lit, typ, sc)
            except ModelError as e:
                raise _as_fail(e, t)
            cvals[cname] = (v, typ)
            consts.append((cname, typ, literal_expr(v, typ)))
        init = []
        sc = Scope(scope_types, cvals, tuple(self.vars))
        for var, typ in self.vars:
            if var in self.init:
                lit, t = self.init[var]
                try:
                    v = const_value(lit, typ, sc)
                except ModelError as e:
                    raise _as_fail(e, t)
            else:
                v = _first_value(typ)
            init.append((var, literal_expr(v, typ)))
        for var, (_, t) in self.init.items():
            if var not in dict(self.vars):
                raise _Fail(f"INIT of undeclared variable '{var}'", t.line, t.col)
        obs = []
        for d in self.domains:
            obs.append((d, self.obs[d][0] if d in self.obs else Lit(True)))
        for d, (_, t) in self.obs.items():
            if d not in self.domains:
                raise _Fail(f"observation for undeclared domain '{d}'", t.line, t.col)
        equiv = tuple((d, self.equiv[d][0]) for d in self.domains if d in self.equiv)
        for d, (_, t) in self.equiv.items():
            if d not in self.domains:
                raise _Fail(f"EQUIV for undeclared domain '{d}'", t.line, t.col)
        gamma = []
        seen = set()
        for g, t in self.gamma:
            if g.event not in self.events:
                raise _Fail(f"GAMMA for undeclared event '{g.event}'", t.line, t.col)
            if g.event in seen:
                raise _Fail(f"GAMMA for '{g.event}' given twice", t.line, t.col)
            seen.add(g.event)
            gamma.append(g)
        kname, evname, dexpr, dtok = self.dome
        model = Model(
            name=name,
            type_decls=tuple(self.type_decls),
            consts=tuple(consts),
            vars=tuple(self.vars),
            cores=tuple(self.cores),
            events=tuple(e for e, _ in self.events.values()),
            par=par,
            init=tuple(init),
            domains=tuple(self.domains),
            interf=interf,
            dome=(kname, evname, dexpr),
            obs=tuple(obs),
            equiv=equiv,
            invariant=self.invariant[0] if self.invariant else None,
            gamma=tuple(gamma),
        )
        if universe_cap is not None:
            model.universe_cap = universe_cap
        validate(model, self)
        return model


def _as_fail(e, tok):
    if e.pos:
        return _Fail(e.message, *e.pos)
    return _Fail(e.message, tok.line, tok.col)


def _first_value(typ):
    return typ.values()[0]


def literal_expr(v, typ):
    """Canonical literal expression denoting value ``v`` of type ``typ``."""
    if isinstance(typ, BoolType):
        return Lit(bool(v))
    if isinstance(typ, IntType):
        return Un("-", Lit(-v)) if v < 0 else Lit(v)
    if isinstance(typ, EnumType):
        return Name(v)
    if isinstance(typ, MapType):
        return MapLit(tuple((Name(k), literal_expr(x, typ.val)) for k, x in zip(typ.key.members, v)))
    raise ModelError(f"no literal syntax for {typ}")


def validate(model, reader=None):
    """Type-check every expression of ``model``; raises ``_Fail`` with a position."""

    def where(name):
        if reader is not None and name in reader.decl_pos:
            return reader.decl_pos[name]
        return (1, 1)

    def check(fn, anchor):
        try:
            return fn()
        except ModelError as e:
            pos = e.pos or anchor
            raise _Fail(e.message, *pos)

    if model.interf and any(d not in model.domains for p in model.interf for d in p):
        raise _Fail("interference mentions undeclared domain", 1, 1)
    for ev in model.events:
        anchor = where(ev.name)
        for pn, tn in ev.params:
            if tn not in model.types:
                raise _Fail(f"unknown parameter type '{tn}' in event {ev.name}", *anchor)
        locs = model.event_locals(ev)
        check(lambda: model.predicate(ev.guard, locs), anchor)
        check(lambda: _check_prog(model, ev.body, locs), anchor)
    for _, sys in model.par.systems:
        _check_system(model, sys, check)
    anchor = reader.dome[3] if reader is not None else None
    anchor = (anchor.line, anchor.col) if anchor is not None else (1, 1)
    kname, evname, dexpr = model.dome

    def dome_ok():
        f, t = model.compiled(dexpr, {kname: model.types["Core"], evname: model.types["Event"]})
        if not compatible(t, model.types["Domain"]):
            raise ModelError(f"DOME must yield a Domain, got {t}", getattr(dexpr, "pos", None))

    check(dome_ok, anchor)
    for d, e in model.obs:
        check(lambda: model.compiled(e), where(d))
    for d, e in model.equiv:
        check(lambda: model.relation(e), where(d))
    if model.invariant is not None:
        check(lambda: model.predicate(model.invariant), (1, 1))
    for g in model.gamma:
        locs = model.gamma_locals(g)
        anchor = where(g.event)
        check(lambda: model.predicate(g.pre, locs), anchor)
        check(lambda: model.predicate(g.post, locs), anchor)
        check(lambda: model.relation(g.rely, locs), anchor)
        check(lambda: model.relation(g.guar, locs), anchor)


def _check_system(model, sys, check):
    if isinstance(sys, EvtSeq):
        if isinstance(sys.event, AnonyEvent):
            check(lambda: _check_prog(model, sys.event.prog, {}), (1, 1))
        _check_system(model, sys.rest, check)
    else:
        for e in sys.events:
            if isinstance(e, AnonyEvent):
                check(lambda: _check_prog(model, e.prog, {}), (1, 1))


def _check_prog(model, p, locs):
    if isinstance(p, Basic):
        idx = dict(model.vars)
        for var, e in p.assigns:
            if var not in idx:
                raise ModelError(f"assignment to undeclared variable '{var}'", getattr(e, "pos", None))
            _, t = model.compiled(e, locs)
            if not compatible(t, idx[var]):
                raise ModelError(f"assigning {t} to '{var}' of type {idx[var]}", getattr(e, "pos", None))
    elif isinstance(p, Seq):
        _check_prog(model, p.first, locs)
        _check_prog(model, p.second, locs)
        if p.mid is not None:
            model.predicate(p.mid, locs)
    elif isinstance(p, Cond):
        model.predicate(p.cond, locs)
        _check_prog(model, p.then, locs)
        _check_prog(model, p.els, locs)
    elif isinstance(p, While):
        model.predicate(p.cond, locs)
        if p.inv is not None:
            model.predicate(p.inv, locs)
        _check_prog(model, p.body, locs)
    elif isinstance(p, Await):
        model.predicate(p.cond, locs)
        _check_prog(model, p.body, locs)
    elif isinstance(p, Nondt):
        model.relation(p.rel, locs)
    else:
        raise ModelError(f"not a program: {p!r}")


# ---------------------------------------------------------------- printing


def _type_str(t, aliases):
    for n, a in aliases:
        if a == t and not isinstance(a, EnumType):
            return n
    if isinstance(t, EnumType):
        return t.name
    if isinstance(t, MapType):
        return f"{t.key.name} => {_type_str(t.val, aliases)}"
    return str(t)


def expr_str(e):
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Name):
        return e.id + ("'" if e.primed else "")
    if isinstance(e, Val):
        # residual programs only; prints the value it stands for
        return expr_str(literal_expr(e.value, e.type))
    if isinstance(e, Index):
        return f"{_atom(e.base)}[{expr_str(e.key)}]"
    if isinstance(e, Upd):
        return f"upd({expr_str(e.base)}, {expr_str(e.key)}, {expr_str(e.val)})"
    if isinstance(e, Unchanged):
        return f"unchanged({', '.join(e.names)})"
    if isinstance(e, Un):
        return e.op + _atom(e.arg)
    if isinstance(e, Bin):
        return f"({expr_str(e.lhs)} {e.op} {expr_str(e.rhs)})"
    if isinstance(e, In):
        return f"({expr_str(e.elem)} in {{{', '.join(map(expr_str, e.items))}}})"
    if isinstance(e, Ite):
        return f"(if {expr_str(e.cond)} then {expr_str(e.then)} else {expr_str(e.els)})"
    if isinstance(e, Quant):
        return f"({e.q} {e.var}:{e.typename}. {expr_str(e.body)})"
    if isinstance(e, TupleE):
        return "(" + ", ".join(map(expr_str, e.items)) + ")"
    if isinstance(e, MapLit):
        return "{" + ", ".join(f"{k.id}: {expr_str(v)}" for k, v in e.entries) + "}"
    raise TypeError(f"not an expression: {e!r}")


def _atom(e):
    s = expr_str(e)
    if isinstance(e, (Lit, Name, Index, Upd, Unchanged, TupleE, MapLit)) or s.startswith("("):
        if isinstance(e, Lit) and not isinstance(e.value, bool) and e.value < 0:
            return f"({s})"
        return s
    return f"({s})"


def prog_str(p, indent="  "):
    nl = "\n" + indent
    if isinstance(p, Basic):
        if not p.assigns:
            return "SKIP"
        return ", ".join(f"{v} := {expr_str(e)}" for v, e in p.assigns)
    if isinstance(p, Seq):
        first = prog_str(p.first, indent)
        if isinstance(p.first, Seq):
            first = f"BEGIN{nl}  {prog_str(p.first, indent + '  ')}{nl}END"
        mid = f"{{{expr_str(p.mid)}}} " if p.mid is not None else ""
        return f"{first} ;;{nl}{mid}{prog_str(p.second, indent)}"
    inner = indent + "  "
    if isinstance(p, Cond):
        return (f"IF {expr_str(p.cond)} THEN{nl}  {prog_str(p.then, inner)}{nl}"
                f"ELSE{nl}  {prog_str(p.els, inner)}{nl}END")
    if isinstance(p, While):
        inv = f" INV {expr_str(p.inv)}" if p.inv is not None else ""
        return f"WHILE {expr_str(p.cond)}{inv} DO{nl}  {prog_str(p.body, inner)}{nl}END"
    if isinstance(p, Await):
        return f"AWAIT {expr_str(p.cond)} THEN{nl}  {prog_str(p.body, inner)}{nl}END"
    if isinstance(p, Nondt):
        return f"CHOOSE {expr_str(p.rel)}"
    raise TypeError(f"not a program: {p!r}")


def esys_str(s):
    if isinstance(s, EvtSet):
        return "(" + " OR ".join(map(_ev_ref, s.events)) + ")"
    return f"{_ev_ref(s.event)} ; {esys_str(s.rest)}"


def _ev_ref(e):
    if isinstance(e, BasicEvent):
        return e.name
    return f"ANON {prog_str(e.prog, '    ')} END"


def pretty_print(m):
    """Canonical text of a model; deterministic."""
    aliases = m.type_decls
    out = [f"MODEL {m.name}", "", f"CORES {', '.join(m.cores)}"]
    for n, t in m.type_decls:
        if isinstance(t, EnumType):
            out.append(f"TYPE {n} = {{{', '.join(t.members)}}}")
        else:
            rest = [a for a in aliases if a[0] != n]
            out.append(f"TYPE {n} = {_type_str(t, rest)}")
    decls = [f"CONST {n} : {_type_str(t, aliases)} = {expr_str(lit)}" for n, t, lit in m.consts]
    decls += [f"VAR {n} : {_type_str(t, aliases)}" for n, t in m.vars]
    # declarations over the Domain carrier need the domain list first
    early = any(re.search(r"\bDomain\b", d.split(" = ")[0]) for d in decls)
    if early:
        out += ["POLICY", f"DOMAINS {', '.join(m.domains)}"]
    out += decls
    for n, lit in m.init:
        out.append(f"INIT {n} := {expr_str(lit)}")
    if m.invariant is not None:
        out.append(f"INVARIANT {expr_str(m.invariant)}")
    out.append("")
    for ev in m.events:
        params = ""
        if ev.params:
            params = " (" + ", ".join(f"{p}: {t}" for p, t in ev.params) + ")"
        out.append(f"EVENT {ev.name}{params} @ {ev.ctx} WHERE")
        out.append(f"  {expr_str(ev.guard)}")
        out.append("THEN")
        out.append(f"  {prog_str(ev.body)}")
        out.append("END")
        out.append("")
    par = ",\n    ".join(f"{k}: {esys_str(s)}" for k, s in m.par.systems)
    out.append(f"PAR {par}")
    out.append("")
    out.append("POLICY")
    if not early:
        out.append(f"DOMAINS {', '.join(m.domains)}")
    out.append("INTERF " + ", ".join(f"{a} -> {b}" for a, b in m.interf))
    k, ev, e = m.dome
    out.append(f"DOME ({k}, {ev}) = {expr_str(e)}")
    for d, e in m.obs:
        out.append(f"OBSERVE {d} : {expr_str(e)}")
    for d, e in m.equiv:
        out.append(f"EQUIV {d} : {expr_str(e)}")
    if m.gamma:
        out.append("")
    for g in m.gamma:
        out.append(f"GAMMA {g.event} @ {g.ctx} :")
        out.append(f"  PRE {expr_str(g.pre)}")
        out.append(f"  RELY {expr_str(g.rely)}")
        out.append(f"  GUAR {expr_str(g.guar)}")
        out.append(f"  POST {expr_str(g.post)}")
    return "\n".join(out) + "\n"
