"""Multicore separation kernel with partition scheduling and sampling ports.

The model is generated as source text and parsed, so the emitted file and the
in-memory model are the same artifact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .event_ucs import certify
from .model import ModelError
from .syntax import parse_model

EVENTS = ("Core_Init", "Schedule", "Write_Sampling_Message", "Read_Sampling_Message")
MUTATIONS = ("drop-edge", "weak-write-guar", "cross-core-schedule")
SCHEDULES = ("choose", "fixed")


class ConfigError(ModelError):
    pass


@dataclass(frozen=True)
class Channel:
    source: str
    dests: tuple


@dataclass(frozen=True)
class KernelConfig:
    cores: int = 2
    deployment: dict = field(default_factory=lambda: {"P1": (0,), "P2": (1,)})
    channels: tuple = (Channel("P1", ("P2",)),)
    messages: int = 1

    def __post_init__(self):
        if self.cores < 1:
            raise ConfigError("at least one core is required")
        if self.messages < 1:
            raise ConfigError("at least one message value is required")
        if not self.deployment:
            raise ConfigError("at least one partition is required")
        for p, cs in self.deployment.items():
            if not cs:
                raise ConfigError(f"partition {p} is deployed on no core")
            bad = [c for c in cs if not 0 <= c < self.cores]
            if bad:
                raise ConfigError(f"partition {p} deployed on unknown core(s) {bad}")
        for c in range(self.cores):
            if not any(c in cs for cs in self.deployment.values()):
                raise ConfigError(f"core {c} hosts no partition")
        for i, ch in enumerate(self.channels):
            if ch.source not in self.deployment:
                raise ConfigError(f"channel {i}: unknown source partition {ch.source}")
            if not ch.dests:
                raise ConfigError(f"channel {i}: no destination")
            for d in ch.dests:
                if d not in self.deployment:
                    raise ConfigError(f"channel {i}: unknown destination partition {d}")
                if d == ch.source:
                    raise ConfigError(f"channel {i}: source and destination are both {d}")

    @property
    def partitions(self):
        return tuple(self.deployment)

    def ports(self):
        """(port, owner, channel, is_source) with one port per channel endpoint."""
        out = []
        for i, ch in enumerate(self.channels):
            out.append((f"Q{i}s", ch.source, i, True))
            for j, d in enumerate(ch.dests):
                out.append((f"Q{i}d{j}", d, i, False))
        return out

    def interferes(self, d1, d2):
        """Reference policy over domain names ``S<i>`` and partition names."""
        if d1 == d2:
            return True
        if d1.startswith("S") and d1[1:].isdigit() and d2 in self.deployment:
            return int(d1[1:]) in self.deployment[d2]
        return any(ch.source == d1 and d2 in ch.dests for ch in self.channels)


def parse_channels(text):
    """``"P1>P2;P1>P2+P3"`` to channel tuples."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        if ">" not in part:
            raise ConfigError(f"bad channel {part!r}: expected SRC>DST[+DST...]")
        src, dsts = part.split(">", 1)
        out.append(Channel(src.strip(), tuple(d.strip() for d in dsts.split("+") if d.strip())))
    return tuple(out)


def parse_deployment(text):
    """``"P1:0;P2:1,0"`` to a deployment map."""
    dep = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, _, cores = part.partition(":")
        try:
            dep[name.strip()] = tuple(int(c) for c in cores.split(",") if c.strip())
        except ValueError as e:
            raise ConfigError(f"bad deployment {part!r}") from e
    return dep


def _map(pairs):
    return "{" + ", ".join(f"{k}: {v}" for k, v in pairs) + "}"


def _domain(x):
    return f"D_{x}"


def model_text(conf=None, mutation=None, schedule="choose"):
    """Source text of the kernel model, optionally with one documented mutation.

    ``schedule="choose"`` lets Schedule pick any partition deployed on its core;
    ``"fixed"`` always picks the first one, a deterministic choice function.
    """
    conf = conf or KernelConfig()
    if mutation is not None and mutation not in MUTATIONS:
        raise ConfigError(f"unknown mutation {mutation!r}; choose from {', '.join(MUTATIONS)}")
    if schedule not in SCHEDULES:
        raise ConfigError(f"unknown schedule {schedule!r}; choose from {', '.join(SCHEDULES)}")
    cores = [f"k{i}" for i in range(conf.cores)]
    scheds = [f"S{i}" for i in range(conf.cores)]
    parts = list(conf.partitions)
    ports = conf.ports()
    chans = [f"CH{i}" for i in range(len(conf.channels))] or ["CH_NONE"]
    msgs = ["NOMSG"] + [f"M{i + 1}" for i in range(conf.messages)]
    domains = [_domain(s) for s in scheds] + [_domain(p) for p in parts]
    port_names = [p[0] for p in ports] or ["Q_NONE"]

    L = [f"# Separation kernel: {conf.cores} core(s), {len(parts)} partition(s), "
         f"{len(conf.channels)} channel(s), {conf.messages} message value(s)."]
    if mutation:
        L.append(f"# mutation: {mutation}")
    L += ["MODEL arinc", "",
          "CORES " + ", ".join(cores),
          "TYPE Sched = {" + ", ".join(scheds) + "}",
          "TYPE Part = {" + ", ".join(parts) + "}",
          "TYPE Port = {" + ", ".join(port_names) + "}",
          "TYPE Chan = {" + ", ".join(chans) + "}",
          "TYPE Msg = {" + ", ".join(msgs) + "}",
          "POLICY",
          "DOMAINS " + ", ".join(domains), ""]

    def owner(p):
        return next((o for n, o, _, _ in ports if n == p), parts[0])

    def chan_of(p):
        return next((f"CH{c}" for n, _, c, _ in ports if n == p), chans[0])

    L += [
        "CONST c2s : Core => Sched = " + _map(zip(cores, scheds)),
        "CONST p2s : Part => Sched => bool = " + _map(
            (p, _map((s, "true" if i in conf.deployment[p] else "false") for i, s in enumerate(scheds)))
            for p in parts),
        "CONST p2p : Port => Part = " + _map((p, owner(p)) for p in port_names),
        # is_src, src_ch, chsrc and chdest are reconstructed from the configuration:
        # with the obvious meaning; nothing else pins them down
        "CONST is_src : Port => bool = " + _map(
            (p, "true" if any(n == p and src for n, _, _, src in ports) else "false") for p in port_names),
        "CONST is_dest : Port => bool = " + _map(
            (p, "true" if any(n == p and not src for n, _, _, src in ports) else "false") for p in port_names),
        "CONST src_ch : Port => Chan = " + _map((p, chan_of(p)) for p in port_names),
        "CONST chsrc : Chan => Part = " + _map(
            (c, conf.channels[i].source if conf.channels else parts[0]) for i, c in enumerate(chans)),
        "CONST chdest : Chan => Part => bool = " + _map(
            (c, _map((p, "true" if conf.channels and p in conf.channels[i].dests else "false") for p in parts))
            for i, c in enumerate(chans)),
        "CONST pdom : Part => Domain = " + _map((p, _domain(p)) for p in parts),
        "CONST sdom : Sched => Domain = " + _map((s, _domain(s)) for s in scheds),
    ]
    if schedule == "fixed":
        L.append("CONST pick : Sched => Part = " + _map(
            (s, next(p for p in parts if i in conf.deployment[p])) for i, s in enumerate(scheds)))
    L += [
        "",
        "VAR cur : Sched => Part",
        "VAR schan : Chan => Msg",
        "INIT cur := " + _map((s, next(p for p in parts if i in conf.deployment[p])) for i, s in enumerate(scheds)),
        "INVARIANT forall c: Sched. p2s[cur[c]][c]",
        "",
        "EVENT Core_Init @ k WHERE true THEN SKIP END",
        "",
    ]
    if schedule == "fixed":
        own = "cur[c2s[k]] := pick[c2s[k]]"
        cross = "cur := pick"
    else:
        own = ("CHOOSE p2s[cur'[c2s[k]]][c2s[k]]"
               " & (forall c: Sched. c != c2s[k] -> cur'[c] = cur[c]) & unchanged(schan)")
        cross = "CHOOSE p2s[cur'[c2s[k]]][c2s[k]] & unchanged(schan)"
    sched = cross if mutation == "cross-core-schedule" else own
    L += [
        "EVENT Schedule @ k WHERE true THEN",
        "  " + sched,
        "END",
        "",
        "EVENT Write_Sampling_Message (p: Port, m: Msg) @ k WHERE",
        "  is_src[p] & p2p[p] = cur[c2s[k]] & m != NOMSG",
        "THEN",
        "  schan[src_ch[p]] := m",
        "END",
        "",
        "EVENT Read_Sampling_Message (p: Port) @ k WHERE",
        "  is_dest[p] & p2p[p] = cur[c2s[k]]",
        "THEN",
        "  SKIP",
        "END",
        "",
        "SYSTEM XKernel = Core_Init ; (Schedule OR Write_Sampling_Message OR Read_Sampling_Message)",
        "PAR " + ", ".join(f"{k}: XKernel" for k in cores),
        "",
    ]
    edges = [(d, d) for d in domains]
    for i, s in enumerate(scheds):
        edges += [(_domain(s), _domain(p)) for p in parts if i in conf.deployment[p]]
    for ch in conf.channels:
        if mutation == "drop-edge" and ch is conf.channels[0]:
            continue
        edges += [(_domain(ch.source), _domain(d)) for d in ch.dests]
    seen = []
    for e in edges:
        if e not in seen:
            seen.append(e)
    L += ["INTERF " + ", ".join(f"{a} -> {b}" for a, b in seen),
          "DOME (k, e) = if e = Write_Sampling_Message | e = Read_Sampling_Message"
          " then pdom[cur[c2s[k]]] else sdom[c2s[k]]"]
    for s in scheds:
        L.append(f"OBSERVE {_domain(s)} : cur[{s}]")
    for p in parts:
        seen_ch = [f"CH{i}" for i, ch in enumerate(conf.channels) if p in ch.dests]
        obs = [f"schan[{c}]" for c in seen_ch]
        if len(obs) > 1:
            obs = ["(" + ", ".join(obs) + ")"]
        L.append(f"OBSERVE {_domain(p)} : " + (obs[0] if obs else "true"))
    rely = "cur'[c2s[k]] = cur[c2s[k]]"
    write_guar = ("cur' = cur & (forall c: Chan. schan'[c] = schan[c] | chsrc[c] = cur[c2s[k]])"
                  if mutation != "weak-write-guar" else "cur' = cur & schan' = schan")
    L += [
        "",
        f"GAMMA Core_Init @ k : PRE true RELY {rely} GUAR cur' = cur & schan' = schan POST true",
        f"GAMMA Schedule @ k : PRE true RELY {rely}",
        "  GUAR (forall c: Sched. c != c2s[k] -> cur'[c] = cur[c]) & schan' = schan POST true",
        f"GAMMA Write_Sampling_Message @ k : PRE true RELY {rely}",
        f"  GUAR {write_guar} POST true",
        f"GAMMA Read_Sampling_Message @ k : PRE true RELY {rely}",
        "  GUAR cur' = cur & schan' = schan POST true",
    ]
    return "\n".join(L) + "\n"


def build_arinc_model(cores=2, deployment=None, channels=None, messages=1, mutation=None, schedule="choose"):
    conf = KernelConfig(cores, deployment if deployment is not None else {"P1": (0,), "P2": (1,)},
                        tuple(channels) if channels is not None else (Channel("P1", ("P2",)),), messages)
    return parse_model(model_text(conf, mutation, schedule))


def observation(model, s, d):
    """What domain ``d`` sees of state ``s``."""
    return model.ob(s, d)


def run_case_study(k=3, sce_mode="literal", **params):
    return certify(build_arinc_model(**params), k=k, sce_mode=sce_mode)
