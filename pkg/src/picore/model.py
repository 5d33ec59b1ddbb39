"""Abstract syntax, finite types and expression evaluation.

States are tuples of values laid out in variable-declaration order. Every
type is a finite carrier, so any set or relation over states can be decided
by enumerating the state universe.
"""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

NOEVT = "NOEVT"  # event-context entry before any event occurred on a core
DEFAULT_UNIVERSE_CAP = 10**6


class ModelError(Exception):
    """Static error in a model: bad name, ill-typed expression, bad declaration."""

    def __init__(self, message, pos=None):
        super().__init__(message)
        self.message = message
        self.pos = pos


class ResourceCap(Exception):
    """Mixin for errors raised when a configured size cap is exceeded."""


class ModelTooLarge(ModelError, ResourceCap):
    def __init__(self, size, cap):
        super().__init__(f"model too large: state universe has {size} states (cap {cap})")
        self.size = size
        self.cap = cap


def _strict(v):
    # keeps True apart from 1 in structural comparisons
    if isinstance(v, bool):
        return (bool, v)
    if isinstance(v, tuple):
        return tuple(_strict(x) for x in v)
    return v


def node(cls=None, *, strict=False):
    """Frozen dataclass whose structural hash is computed once.

    With ``strict``, booleans and integers in fields never compare equal.
    """
    if cls is None:
        return lambda c: node(c, strict=strict)
    cls = dataclass(frozen=True)(cls)
    names = tuple(f.name for f in dataclasses.fields(cls) if f.compare)
    tag = cls.__name__
    key = _strict if strict else (lambda v: v)

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((tag,) + tuple(key(getattr(self, n)) for n in names))
            object.__setattr__(self, "_h", h)
        return h

    cls.__hash__ = __hash__
    if strict:
        def __eq__(self, other):
            if other.__class__ is not self.__class__:
                return NotImplemented
            return all(key(getattr(self, n)) == key(getattr(other, n)) for n in names)

        cls.__eq__ = __eq__
    return cls


def _pos():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- types


@node
class BoolType:
    def values(self):
        return (False, True)

    def __str__(self):
        return "bool"


@node
class IntType:
    lo: int | None = None
    hi: int | None = None

    def values(self):
        return tuple(range(self.lo, self.hi + 1))

    def fit(self, v):
        # arithmetic wraps around the declared range so evaluation stays total
        if self.lo is None:
            return v
        return self.lo + (v - self.lo) % (self.hi - self.lo + 1)

    def __str__(self):
        return f"int[{self.lo}..{self.hi}]"


@node
class EnumType:
    name: str
    members: tuple

    def values(self):
        return self.members

    def __str__(self):
        return self.name


@node
class MapType:
    key: EnumType
    val: Any

    def values(self):
        return tuple(itertools.product(self.val.values(), repeat=len(self.key.members)))

    def __str__(self):
        return f"{self.key.name} => {self.val}"


@node
class TupleType:
    items: tuple

    def __str__(self):
        return "(" + ", ".join(map(str, self.items)) + ")"


ANYINT = IntType()


def compatible(a, b):
    if isinstance(a, IntType) and isinstance(b, IntType):
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, EnumType):
        return a.name == b.name
    if isinstance(a, MapType):
        return a.key.name == b.key.name and compatible(a.val, b.val)
    if isinstance(a, TupleType):
        return len(a.items) == len(b.items) and all(map(compatible, a.items, b.items))
    return True


def coerce(value, typ):
    """Bring a computed value into the finite domain of ``typ``."""
    if isinstance(typ, IntType):
        return typ.fit(value)
    if isinstance(typ, MapType) and isinstance(typ.val, (IntType, MapType)):
        return tuple(coerce(v, typ.val) for v in value)
    return value


def domain_size(typ):
    if isinstance(typ, BoolType):
        return 2
    if isinstance(typ, IntType):
        return typ.hi - typ.lo + 1
    if isinstance(typ, EnumType):
        return len(typ.members)
    if isinstance(typ, MapType):
        return domain_size(typ.val) ** len(typ.key.members)
    raise ModelError(f"type {typ} has no finite carrier")


# ---------------------------------------------------------------- expressions


@node(strict=True)
class Lit:
    value: Any
    pos: Any = _pos()


@node
class Name:
    id: str
    primed: bool = False
    pos: Any = _pos()


@node(strict=True)
class Val:
    """Substituted parameter value; appears only in residual programs."""

    value: Any
    type: Any


@node
class Index:
    base: Any
    key: Any
    pos: Any = _pos()


@node
class Upd:
    base: Any
    key: Any
    val: Any
    pos: Any = _pos()


@node
class Unchanged:
    names: tuple
    pos: Any = _pos()


@node
class Un:
    op: str
    arg: Any
    pos: Any = _pos()


@node
class Bin:
    op: str
    lhs: Any
    rhs: Any
    pos: Any = _pos()


@node
class In:
    elem: Any
    items: tuple
    pos: Any = _pos()


@node
class Ite:
    cond: Any
    then: Any
    els: Any
    pos: Any = _pos()


@node
class Quant:
    q: str  # "forall" | "exists"
    var: str
    typename: str
    body: Any
    pos: Any = _pos()


@node
class TupleE:
    items: tuple
    pos: Any = _pos()


@node
class MapLit:
    entries: tuple  # ((Name-of-member, Expr), ...)
    pos: Any = _pos()


TRUE = Lit(True)
FALSE = Lit(False)

BOOL = BoolType()

_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_ARITH = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b}


class Scope:
    """Name environment used to type-check and compile expressions."""

    def __init__(self, types, consts, varlist, locals_=None, primed=False):
        self.types = types  # name -> type (enum carriers and aliases)
        self.consts = consts  # name -> (value, type)
        self.varlist = varlist  # ((name, type), ...)
        self.varindex = {n: i for i, (n, _) in enumerate(varlist)}
        self.members = {}
        for t in types.values():
            if isinstance(t, EnumType):
                for m in t.members:
                    self.members[m] = t
        self.locals = dict(locals_ or {})
        self.primed = primed

    def child(self, **extra):
        s = Scope.__new__(Scope)
        s.__dict__.update(self.__dict__)
        s.locals = {**self.locals, **extra}
        return s

    def lookup_type(self, name, pos=None):
        t = self.types.get(name)
        if t is None:
            raise ModelError(f"unknown type '{name}'", pos)
        return t


def compile_expr(e, scope):
    """Type-check ``e`` and return ``(fn, type)`` with ``fn(s, t, env)``.

    ``s`` is the current state, ``t`` the primed state (relations only) and
    ``env`` binds locals (parameters, the core variable, quantified names).
    """
    if isinstance(e, Lit):
        v = e.value
        return (lambda s, t, env: v), (BOOL if isinstance(v, bool) else ANYINT)
    if isinstance(e, Val):
        v = e.value
        return (lambda s, t, env: v), e.type
    if isinstance(e, Name):
        return _compile_name(e, scope)
    if isinstance(e, Index):
        fb, tb = compile_expr(e.base, scope)
        if not isinstance(tb, MapType):
            raise ModelError(f"indexing a non-map value of type {tb}", e.pos)
        fk, tk = compile_expr(e.key, scope)
        if not compatible(tk, tb.key):
            raise ModelError(f"map key has type {tk}, expected {tb.key}", e.pos)
        pos_of = {m: i for i, m in enumerate(tb.key.members)}
        return (lambda s, t, env: fb(s, t, env)[pos_of[fk(s, t, env)]]), tb.val
    if isinstance(e, Upd):
        fb, tb = compile_expr(e.base, scope)
        if not isinstance(tb, MapType):
            raise ModelError(f"updating a non-map value of type {tb}", e.pos)
        fk, tk = compile_expr(e.key, scope)
        fv, tv = compile_expr(e.val, scope)
        if not compatible(tk, tb.key) or not compatible(tv, tb.val):
            raise ModelError("ill-typed map update", e.pos)
        pos_of = {m: i for i, m in enumerate(tb.key.members)}
        vt = tb.val

        def upd(s, t, env):
            m = list(fb(s, t, env))
            m[pos_of[fk(s, t, env)]] = coerce(fv(s, t, env), vt)
            return tuple(m)

        return upd, tb
    if isinstance(e, Unchanged):
        if not scope.primed:
            raise ModelError("unchanged(...) is only allowed in relations", e.pos)
        idx = []
        for n in e.names:
            if n not in scope.varindex:
                raise ModelError(f"unchanged: '{n}' is not a state variable", e.pos)
            idx.append(scope.varindex[n])
        idx = tuple(idx)
        return (lambda s, t, env: all(s[i] == t[i] for i in idx)), BOOL
    if isinstance(e, Un):
        f, ty = compile_expr(e.arg, scope)
        if e.op == "!":
            _expect(ty, BOOL, e)
            return (lambda s, t, env: not f(s, t, env)), BOOL
        if not isinstance(ty, IntType):
            raise ModelError("negation of a non-integer", e.pos)
        return (lambda s, t, env: -f(s, t, env)), ANYINT
    if isinstance(e, Bin):
        return _compile_bin(e, scope)
    if isinstance(e, In):
        fe, te = compile_expr(e.elem, scope)
        fs = []
        for it in e.items:
            fi, ti = compile_expr(it, scope)
            if not compatible(te, ti):
                raise ModelError("set member type mismatch", e.pos)
            fs.append(fi)
        fs = tuple(fs)
        return (lambda s, t, env: fe(s, t, env) in [g(s, t, env) for g in fs]), BOOL
    if isinstance(e, Ite):
        fc, tc = compile_expr(e.cond, scope)
        _expect(tc, BOOL, e)
        fa, ta = compile_expr(e.then, scope)
        fb, tb = compile_expr(e.els, scope)
        if not compatible(ta, tb):
            raise ModelError("branches of if-then-else differ in type", e.pos)
        return (lambda s, t, env: fa(s, t, env) if fc(s, t, env) else fb(s, t, env)), ta
    if isinstance(e, Quant):
        qt = scope.lookup_type(e.typename, e.pos)
        dom = qt.values() if not isinstance(qt, MapType) else qt.values()
        fb, tb = compile_expr(e.body, scope.child(**{e.var: qt}))
        _expect(tb, BOOL, e)
        var = e.var
        if e.q == "forall":
            def quant(s, t, env):
                env = dict(env)
                for v in dom:
                    env[var] = v
                    if not fb(s, t, env):
                        return False
                return True
        else:
            def quant(s, t, env):
                env = dict(env)
                for v in dom:
                    env[var] = v
                    if fb(s, t, env):
                        return True
                return False
        return quant, BOOL
    if isinstance(e, TupleE):
        parts = [compile_expr(i, scope) for i in e.items]
        fs = tuple(p[0] for p in parts)
        return (lambda s, t, env: tuple(g(s, t, env) for g in fs)), TupleType(tuple(p[1] for p in parts))
    if isinstance(e, MapLit):
        raise ModelError("map literals are only allowed in CONST and INIT", e.pos)
    raise ModelError(f"cannot compile {e!r}")


def _expect(got, want, e):
    if not compatible(got, want):
        raise ModelError(f"expected {want}, got {got}", getattr(e, "pos", None))


def _compile_name(e, scope):
    n = e.id
    if n in scope.locals:
        if e.primed:
            raise ModelError(f"'{n}' is not a state variable and cannot be primed", e.pos)
        return (lambda s, t, env: env[n]), scope.locals[n]
    if n in scope.varindex:
        i = scope.varindex[n]
        ty = scope.varlist[i][1]
        if e.primed:
            if not scope.primed:
                raise ModelError(f"primed variable {n}' outside a relation", e.pos)
            return (lambda s, t, env: t[i]), ty
        return (lambda s, t, env: s[i]), ty
    if e.primed:
        raise ModelError(f"'{n}' is not a state variable and cannot be primed", e.pos)
    if n in scope.consts:
        v, ty = scope.consts[n]
        return (lambda s, t, env: v), ty
    if n in scope.members:
        return (lambda s, t, env: n), scope.members[n]
    raise ModelError(f"unbound name '{n}'", e.pos)


def _compile_bin(e, scope):
    fa, ta = compile_expr(e.lhs, scope)
    fb, tb = compile_expr(e.rhs, scope)
    op = e.op
    if op in ("&", "|", "->", "<->"):
        _expect(ta, BOOL, e)
        _expect(tb, BOOL, e)
        if op == "&":
            return (lambda s, t, env: fa(s, t, env) and fb(s, t, env)), BOOL
        if op == "|":
            return (lambda s, t, env: fa(s, t, env) or fb(s, t, env)), BOOL
        if op == "->":
            return (lambda s, t, env: (not fa(s, t, env)) or fb(s, t, env)), BOOL
        return (lambda s, t, env: fa(s, t, env) == fb(s, t, env)), BOOL
    if op in ("=", "!="):
        if not compatible(ta, tb):
            raise ModelError(f"cannot compare {ta} with {tb}", e.pos)
        f = _CMP[op]
        return (lambda s, t, env: f(fa(s, t, env), fb(s, t, env))), BOOL
    if not (isinstance(ta, IntType) and isinstance(tb, IntType)):
        raise ModelError(f"operator '{op}' needs integers", e.pos)
    if op in _CMP:
        f = _CMP[op]
        return (lambda s, t, env: f(fa(s, t, env), fb(s, t, env))), BOOL
    f = _ARITH[op]
    return (lambda s, t, env: f(fa(s, t, env), fb(s, t, env))), ANYINT


def const_value(e, typ, scope):
    """Evaluate a closed literal (including map literals) of the given type."""
    if isinstance(e, MapLit):
        if not isinstance(typ, MapType):
            raise ModelError(f"map literal given for type {typ}", e.pos)
        got = {}
        for k, v in e.entries:
            if not isinstance(k, Name) or k.id not in typ.key.members:
                raise ModelError(f"map key is not a member of {typ.key.name}", e.pos)
            if k.id in got:
                raise ModelError(f"duplicate map key '{k.id}'", e.pos)
            got[k.id] = const_value(v, typ.val, scope)
        missing = [m for m in typ.key.members if m not in got]
        if missing:
            raise ModelError(f"map literal misses keys {missing}", e.pos)
        return tuple(got[m] for m in typ.key.members)
    f, t = compile_expr(e, scope)
    if not compatible(t, typ):
        raise ModelError(f"value of type {t} given for {typ}", getattr(e, "pos", None))
    v = f((), None, {})
    if isinstance(typ, IntType) and not typ.lo <= v <= typ.hi:
        raise ModelError(f"value {v} outside {typ}", getattr(e, "pos", None))
    return v


def free_names(e, bound=frozenset()):
    """Names referenced but not bound inside ``e``."""
    if isinstance(e, Name):
        return set() if e.id in bound else {e.id}
    if isinstance(e, Quant):
        return free_names(e.body, bound | {e.var})
    out = set()
    for f in dataclasses.fields(e) if dataclasses.is_dataclass(e) else ():
        if not f.compare:
            continue
        v = getattr(e, f.name)
        for x in v if isinstance(v, tuple) else (v,):
            if isinstance(x, tuple):
                for y in x:
                    if dataclasses.is_dataclass(y):
                        out |= free_names(y, bound)
            elif dataclasses.is_dataclass(x) and not isinstance(x, type):
                out |= free_names(x, bound)
    return out


def subst(e, values):
    """Replace free occurrences of names by ``Val`` nodes (``values``: name -> (v, type))."""
    if e is None:
        return None
    if isinstance(e, Name):
        if e.id in values and not e.primed:
            v, t = values[e.id]
            return Val(v, t)
        return e
    if isinstance(e, Quant):
        inner = {k: v for k, v in values.items() if k != e.var}
        return Quant(e.q, e.var, e.typename, subst(e.body, inner), pos=e.pos)
    if isinstance(e, (Lit, Val, Unchanged)):
        return e
    if isinstance(e, Basic):
        return Basic(tuple((n, subst(x, values)) for n, x in e.assigns))
    if isinstance(e, MapLit):
        return MapLit(tuple((k, subst(v, values)) for k, v in e.entries), pos=e.pos)
    kw = {}
    for f in dataclasses.fields(e):
        v = getattr(e, f.name)
        if not f.compare:
            kw[f.name] = v
        elif isinstance(v, tuple):
            kw[f.name] = tuple(subst(x, values) if dataclasses.is_dataclass(x) else x for x in v)
        elif dataclasses.is_dataclass(v) and not isinstance(v, type):
            kw[f.name] = subst(v, values)
        else:
            kw[f.name] = v
    return type(e)(**kw)


# ---------------------------------------------------------------- programs and events


@node
class Basic:
    """Parallel assignment; ``Basic(())`` is SKIP."""

    assigns: tuple  # ((var, Expr), ...)


SKIP = Basic(())


@node
class Seq:
    first: Any
    second: Any
    mid: Any = None  # optional proof-outline mid condition


@node
class Cond:
    cond: Any
    then: Any
    els: Any


@node
class While:
    cond: Any
    body: Any
    inv: Any = None  # optional loop invariant annotation


@node
class Await:
    cond: Any
    body: Any


@node
class Nondt:
    rel: Any


@node
class BasicEvent:
    name: str
    params: tuple  # ((pname, typename), ...)
    ctx: str  # name bound to the executing core
    guard: Any
    body: Any


@node
class AnonyEvent:
    prog: Any  # None once the wrapped program has terminated


@node
class EvtSeq:
    event: Any
    rest: Any


@node
class EvtSet:
    events: tuple


@node
class Par:
    systems: tuple  # ((core, EventSystem), ...) in core order

    def __getitem__(self, core):
        for k, s in self.systems:
            if k == core:
                return s
        raise KeyError(core)

    def replace(self, core, system):
        return Par(tuple((k, system if k == core else s) for k, s in self.systems))


PROGRAM_TYPES = (Basic, Seq, Cond, While, Await, Nondt)


def evts(es):
    """Events of an event system or parallel event system, in first-occurrence order."""
    out = []

    def add(e):
        if e not in out:
            out.append(e)

    def walk(s):
        if isinstance(s, Par):
            for _, sub in s.systems:
                walk(sub)
        elif isinstance(s, EvtSet):
            for e in s.events:
                add(e)
        elif isinstance(s, EvtSeq):
            add(s.event)
            walk(s.rest)
        else:
            raise TypeError(f"not an event system: {s!r}")

    walk(es)
    return tuple(out)


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class GammaSpec:
    """Declared rely-guarantee quadruple of one event; ``ctx`` names the core."""

    event: str
    ctx: str
    pre: Any
    rely: Any
    guar: Any
    post: Any


def _local_type(v, scope):
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return ANYINT
    if isinstance(v, str) and v in scope.members:
        return scope.members[v]
    raise ModelError(f"cannot infer the type of local value {v!r}")


@dataclass(eq=True)
class Model:
    name: str
    type_decls: tuple  # ((name, type), ...) user-declared carriers and aliases
    consts: tuple  # ((name, type, literal Expr), ...)
    vars: tuple  # ((name, type), ...)
    cores: tuple
    events: tuple  # BasicEvent declarations
    par: Any  # Par
    init: tuple  # ((var, literal Expr), ...) for every variable
    domains: tuple
    interf: tuple  # ((d1, d2), ...) meaning d1 ~> d2
    dome: tuple  # (core-name, event-name, Expr)
    obs: tuple  # ((domain, Expr), ...) for every domain
    equiv: tuple = ()  # ((domain, relation Expr), ...) declared view partitions
    invariant: Any = None
    gamma: tuple = ()  # GammaSpec per event
    universe_cap: int = field(default=DEFAULT_UNIVERSE_CAP, compare=False)

    def __post_init__(self):
        types = dict(self.type_decls)
        types["Core"] = EnumType("Core", tuple(self.cores))
        types["Event"] = EnumType("Event", tuple(e.name for e in self.events) + (NOEVT,))
        types["Domain"] = EnumType("Domain", tuple(self.domains))
        types.setdefault("bool", BOOL)
        self._types = types
        base = Scope(types, {}, self.vars)
        consts = {}
        for n, t, lit in self.consts:
            consts[n] = (const_value(lit, t, base.child()), t)
            base.consts = consts
        self._base = Scope(types, consts, self.vars)
        self._cache = {}
        self._universe = None
        self._index = None
        self._rel_cache = {}
        init = dict(self.init)
        self.s0 = tuple(const_value(init[n], t, self._base) for n, t in self.vars)
        self.x0 = tuple(NOEVT for _ in self.cores)
        self.event_map = {e.name: e for e in self.events}
        self.interf_set = frozenset(self.interf)
        self.gamma_map = {g.event: g for g in self.gamma}
        self.obs_map = dict(self.obs)
        self.equiv_map = dict(self.equiv)

    # -- scopes and compilation

    @property
    def types(self):
        return self._types

    def scope(self, locals_=None, primed=False):
        s = self._base.child(**(locals_ or {}))
        s.primed = primed
        return s

    def compiled(self, expr, locals_=None, primed=False):
        key = (expr, tuple(sorted((locals_ or {}).items())), primed)
        hit = self._cache.get(key)
        if hit is None:
            hit = compile_expr(expr, self.scope(locals_, primed))
            self._cache[key] = hit
        return hit

    def predicate(self, expr, locals_=None):
        """``fn(s, env) -> bool`` for a state predicate."""
        f, t = self.compiled(expr, locals_)
        if not compatible(t, BOOL):
            raise ModelError(f"expected a boolean expression, got {t}", getattr(expr, "pos", None))
        return lambda s, env=None: bool(f(s, None, env or {}))

    def relation(self, expr, locals_=None):
        """``fn(s, t, env) -> bool`` for a relation over current/primed state."""
        f, t = self.compiled(expr, locals_, primed=True)
        if not compatible(t, BOOL):
            raise ModelError(f"expected a boolean relation, got {t}", getattr(expr, "pos", None))
        return lambda s, t2, env=None: bool(f(s, t2, env or {}))

    def _env_types(self, env):
        return {k: _local_type(v, self._base) for k, v in (env or {}).items()}

    def eval_bexp(self, s, env, b):
        return self.predicate(b, self._env_types(env))(s, env)

    def eval_expr(self, s, env, e):
        f, _ = self.compiled(e, self._env_types(env))
        return f(s, None, env or {})

    def eval_rel(self, s, r, env=None):
        """All successor states ``t`` with ``(s, t)`` in the relation, in universe order."""
        key = (r, s, tuple(sorted((env or {}).items())))
        hit = self._rel_cache.get(key)
        if hit is None:
            f = self.relation(r, self._env_types(env))
            hit = tuple(t for t in self.universe() if f(s, t, env))
            self._rel_cache[key] = hit
        return hit

    def assign(self, s, assigns, env=None):
        """Apply a parallel assignment to state ``s``."""
        if not assigns:
            return s
        new = list(s)
        lt = self._env_types(env)
        for var, e in assigns:
            i = self._base.varindex[var]
            f, _ = self.compiled(e, lt)
            new[i] = coerce(f(s, None, env or {}), self.vars[i][1])
        return tuple(new)

    # -- universe

    def universe_size(self):
        n = 1
        for _, t in self.vars:
            n *= domain_size(t)
        return n

    def universe(self):
        if self._universe is None:
            size = self.universe_size()
            if size > self.universe_cap:
                raise ModelTooLarge(size, self.universe_cap)
            self._universe = tuple(itertools.product(*(t.values() for _, t in self.vars)))
            self._index = {s: i for i, s in enumerate(self._universe)}
        return self._universe

    def state_index(self, s):
        self.universe()
        return self._index[s]

    def admissible(self, s):
        if self.invariant is None:
            return True
        return self.predicate(self.invariant)(s)

    def state_dict(self, s):
        return {n: v for (n, _), v in zip(self.vars, s)}

    # -- policy

    def dom_e(self, s, core, ev):
        kname, evname, e = self.dome
        f, _ = self.compiled(e, {kname: self._types["Core"], evname: self._types["Event"]})
        return f(s, None, {kname: core, evname: ev})

    def interferes(self, d1, d2):
        return (d1, d2) in self.interf_set

    def ob(self, s, d):
        f, _ = self.compiled(self.obs_map[d])
        return f(s, None, {})

    def vpeq(self, s, t, d):
        """``s ~d t``: declared equivalence if given, else equal observations."""
        rel = self.equiv_map.get(d)
        if rel is None:
            return self.ob(s, d) == self.ob(t, d)
        return self.relation(rel)(s, t)

    # -- events

    def core_type(self):
        return self._types["Core"]

    def param_valuations(self, ev):
        carriers = [self._types[tn].values() for _, tn in ev.params]
        return itertools.product(*carriers)

    def event_locals(self, ev):
        out = {ev.ctx: self._types["Core"]}
        for pn, tn in ev.params:
            out[pn] = self._types[tn]
        return out

    def instantiate(self, ev, values, core):
        """Guard predicate and substituted body of ``ev`` for parameter values and a core."""
        binding = {ev.ctx: (core, self._types["Core"])}
        for (pn, tn), v in zip(ev.params, values):
            binding[pn] = (v, self._types[tn])
        env = {k: v for k, (v, _) in binding.items()}
        guard = self.predicate(ev.guard, self.event_locals(ev))
        return (lambda s: guard(s, env)), subst(ev.body, binding)

    def gamma_locals(self, g):
        return {g.ctx: self._types["Core"]}
