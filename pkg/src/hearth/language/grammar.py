"""Concrete grammar, regenerated from the registry every time it changes.

The token language is English-like; its terminals name whatever is in the
home right now: available devices, the kinds/locations/actions/events they
bring, plus stored program names.  Productions are specialized per kind and
per value domain so that the grammar itself guarantees kind-consistent
continuations (after "each time the DomiCube" only DomiCube events parse).

The grammar must be LL(1) over whole tokens; `Grammar.tables()` builds the
parse table and rejects any derivation that is not deterministically
parseable.  Table construction is pure: deriving twice from one registry
snapshot yields equal grammars.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ..catalog import (
    BoolDomain,
    Domain,
    EnumDomain,
    IntRangeDomain,
    TimeOfDayDomain,
)
from ..errors import GrammarConflictError
from ..registry import AVAILABLE, RegistrySnapshot

CATEGORIES = (
    "keyword",
    "device",
    "kind",
    "location",
    "action",
    "event",
    "variable",
    "value",
    "number",
    "program",
)

START = "PROGRAM"
END = "$end"

COMPARATOR_TEXT = {
    "=": "is",
    "!=": "is not",
    "<": "is below",
    "<=": "is at most",
    ">": "is above",
    ">=": "is at least",
}
TEXT_COMPARATOR = {v: k for k, v in COMPARATOR_TEXT.items()}

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_NUMBER_RE = re.compile(r"\d+")
_SIGNED_RE = re.compile(r"-?\d+")
_TIME_RE = re.compile(r"\d{1,2}:\d{2}")

# Program names are single identifiers so the pseudo-natural text stays
# unambiguous; the store enforces this plus uniqueness.
NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_\-]*$")
RESERVED_NAMES = frozenset(
    {
        "program", "each", "time", "if", "do", "all", "any", "located", "in",
        "to", "start", "stop", "wait", "not", "and", "or", "is", "the",
        "ms", "seconds", "minutes", "true", "false",
    }
)


@dataclass(frozen=True)
class Token:
    """One unit of a token sentence."""

    text: str
    category: str
    terminal_key: str
    value: object = None
    path: str = field(default="", compare=False)


@dataclass(frozen=True)
class Terminal:
    key: str
    category: str
    text: Optional[str] = None  # None: open class, scanned by pattern
    domain: Optional[Domain] = None
    info: tuple = ()  # ((k, v), ...) semantic payload

    def get(self, name: str):
        return dict(self.info).get(name)

    def describe(self) -> str:
        if self.text is not None:
            return self.text
        return {
            "class:number": "<number>",
            "class:time": "<time HH:MM>",
            "class:name": "<name>",
        }.get(self.key, f"<{self.category}>")

    def representative_text(self) -> str:
        """A concrete instance usable to probe open-class slots."""
        if self.text is not None:
            return self.text
        if self.key == "class:number":
            return "5"
        if self.key == "class:name":
            return "sample-name"
        if self.domain is not None:
            return self.domain.display(self.domain.representative())
        return "0"

    def match(self, text: str, pos: int) -> Optional[tuple[str, object, int]]:
        """Try to match at pos; returns (matched text, value, new pos)."""
        if self.text is not None:
            end = pos + len(self.text)
            if text.startswith(self.text, pos) and (end == len(text) or text[end].isspace()):
                value = self.get("value")
                if value is None:
                    value = self.text
                return self.text, value, end
            return None
        if self.key == "class:number":
            m = _NUMBER_RE.match(text, pos)
        elif self.key == "class:time":
            m = _TIME_RE.match(text, pos)
        elif self.key == "class:name":
            m = _WORD_RE.match(text, pos)
        elif isinstance(self.domain, IntRangeDomain):
            m = _SIGNED_RE.match(text, pos)
        elif isinstance(self.domain, TimeOfDayDomain):
            m = _TIME_RE.match(text, pos)
        else:
            m = _WORD_RE.match(text, pos)
        if m is None or (m.end() < len(text) and not text[m.end()].isspace()):
            return None
        chunk = m.group(0)
        if self.key == "class:number":
            return chunk, int(chunk), m.end()
        if self.key == "class:name":
            return chunk, chunk, m.end()
        assert self.domain is not None
        value = self.domain.parse_text(chunk)
        if value is None:
            return None
        return chunk, value, m.end()

    def instantiate(self, text: Optional[str] = None, path: str = "") -> Token:
        """Build a token for this terminal (text only needed for classes)."""
        if self.text is not None:
            value = self.get("value")
            return Token(
                text=self.text,
                category=self.category,
                terminal_key=self.key,
                value=self.text if value is None else value,
                path=path,
            )
        assert text is not None, f"open class {self.key} needs text"
        m = self.match(text, 0)
        if m is None or m[2] != len(text):
            raise ValueError(f"{text!r} is not a valid {self.describe()}")
        return Token(text=m[0], category=self.category, terminal_key=self.key, value=m[1], path=path)


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[tuple[str, str], ...]  # ("t", terminal key) | ("n", nonterminal)
    tag: str
    info: tuple = ()

    def get(self, name: str):
        return dict(self.info).get(name)


@dataclass
class LLTables:
    first: dict[str, frozenset]
    nullable: frozenset
    rows: dict[str, dict[str, Production]]  # nonterminal -> terminal key -> production


@dataclass(frozen=True)
class Grammar:
    generation: int
    terminals: Mapping[str, Terminal]
    productions: tuple[Production, ...]
    start: str = START
    # Catalog-wide display fallbacks so programs whose devices vanished can
    # still be rendered (as Unknown references).
    action_display: Mapping[str, str] = field(default_factory=dict)
    event_display: Mapping[str, str] = field(default_factory=dict)
    program_names: Mapping[str, str] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return (
            self.generation == other.generation
            and dict(self.terminals) == dict(other.terminals)
            and self.productions == other.productions
            and self.start == other.start
            and dict(self.action_display) == dict(other.action_display)
            and dict(self.event_display) == dict(other.event_display)
            and dict(self.program_names) == dict(other.program_names)
        )

    def terminal(self, key: str) -> Terminal:
        return self.terminals[key]

    def device_terminal(self, device_id: str) -> Optional[Terminal]:
        return self.terminals.get(f"dev:{device_id}")

    def tables(self) -> LLTables:
        cached = getattr(self, "_tables_cache", None)
        if cached is None:
            cached = _build_tables(self)
            object.__setattr__(self, "_tables_cache", cached)
        return cached


def _build_tables(grammar: Grammar) -> LLTables:
    prods_by_lhs: dict[str, list[Production]] = {}
    for p in grammar.productions:
        prods_by_lhs.setdefault(p.lhs, []).append(p)

    nullable: set[str] = set()
    changed = True
    while changed:
        changed = False
        for p in grammar.productions:
            if p.lhs in nullable:
                continue
            if all(kind == "n" and name in nullable for kind, name in p.rhs):
                nullable.add(p.lhs)
                changed = True

    first: dict[str, set[str]] = {nt: set() for nt in prods_by_lhs}
    changed = True
    while changed:
        changed = False
        for p in grammar.productions:
            target = first[p.lhs]
            before = len(target)
            for kind, name in p.rhs:
                if kind == "t":
                    target.add(name)
                    break
                target |= first.get(name, set())
                if name not in nullable:
                    break
            if len(target) != before:
                changed = True

    follow: dict[str, set[str]] = {nt: set() for nt in prods_by_lhs}
    follow[grammar.start].add(END)
    changed = True
    while changed:
        changed = False
        for p in grammar.productions:
            trailer = set(follow[p.lhs])
            for kind, name in reversed(p.rhs):
                if kind == "t":
                    trailer = {name}
                else:
                    before = len(follow[name])
                    follow[name] |= trailer
                    if len(follow[name]) != before:
                        changed = True
                    if name in nullable:
                        trailer = trailer | first[name]
                    else:
                        trailer = set(first[name])

    def seq_first(rhs) -> tuple[set[str], bool]:
        out: set[str] = set()
        for kind, name in rhs:
            if kind == "t":
                out.add(name)
                return out, False
            out |= first[name]
            if name not in nullable:
                return out, False
        return out, True

    rows: dict[str, dict[str, Production]] = {}
    for nt, prods in prods_by_lhs.items():
        row: dict[str, Production] = {}
        for p in prods:
            predict, eps = seq_first(p.rhs)
            if eps:
                predict = predict | follow[nt]
            for key in predict:
                if key in row and row[key] is not p:
                    raise GrammarConflictError(
                        f"grammar not LL(1): {nt} on {key!r} reaches two productions"
                    )
                row[key] = p
        # within a row the scanner discriminates by text: duplicate concrete
        # texts would be unscannable
        texts: dict[str, str] = {}
        for key in row:
            if key == END:
                continue
            term = grammar.terminals[key]
            if term.text is not None:
                if term.text in texts and texts[term.text] != key:
                    raise GrammarConflictError(
                        f"ambiguous token text {term.text!r} in {nt} "
                        f"({texts[term.text]} vs {key})"
                    )
                texts[term.text] = key
        rows[nt] = row
    return LLTables(
        first={nt: frozenset(v) for nt, v in first.items()},
        nullable=frozenset(nullable),
        rows=rows,
    )


# -- derivation ---------------------------------------------------------------


def _domain_key(domain: Domain) -> str:
    if isinstance(domain, BoolDomain):
        return "bool"
    if isinstance(domain, EnumDomain):
        return "enum:" + ",".join(domain.members)
    if isinstance(domain, IntRangeDomain):
        return f"int:{domain.lo}:{domain.hi}"
    if isinstance(domain, TimeOfDayDomain):
        return "time"
    raise TypeError(f"unsupported domain {domain!r}")


KEYWORDS = (
    "program", "each time", "if", "do", "all", "any", "located in", "to",
    "start program", "stop program", "wait", "not", "and", "or", "(", ")",
    "ms", "seconds", "minutes",
)


def derive_grammar(
    snapshot: RegistrySnapshot,
    known_programs: Sequence[tuple[str, str]] = (),
    include_missing: bool = False,
) -> Grammar:
    """Specialize the grammar to one registry snapshot.

    `known_programs` is (program_id, name) pairs for start/stop references.
    `include_missing` also admits Missing devices' vocabulary; the program
    store uses it so saved text stays re-parseable after departures.
    """
    catalog = snapshot.catalog
    devices = [
        d
        for d in snapshot.descriptors
        if d.availability == AVAILABLE or include_missing
    ]
    devices.sort(key=lambda d: d.id)
    kinds_present = sorted({d.kind for d in devices})
    locations = sorted({d.location for d in devices if d.location})

    terminals: dict[str, Terminal] = {}
    prods: list[Production] = []

    def add_terminal(t: Terminal) -> str:
        existing = terminals.get(t.key)
        if existing is not None:
            assert existing == t, f"terminal key {t.key} redefined"
        else:
            terminals[t.key] = t
        return t.key

    def kw(text: str) -> str:
        return add_terminal(Terminal(key=f"kw:{text}", category="keyword", text=text))

    for text in KEYWORDS:
        kw(text)
    for sym, text in COMPARATOR_TEXT.items():
        add_terminal(
            Terminal(key=f"cmp:{text}", category="keyword", text=text, info=(("comparator", sym),))
        )
    add_terminal(Terminal(key="class:name", category="program"))
    add_terminal(Terminal(key="class:number", category="number"))

    # device terminals; duplicate display names get an id suffix so token
    # texts stay distinguishable
    display_counts: dict[str, int] = {}
    for d in devices:
        display_counts[d.display_name] = display_counts.get(d.display_name, 0) + 1
    for d in devices:
        label = d.display_name
        if display_counts[label] > 1:
            label = f"{label} ({d.id})"
        add_terminal(
            Terminal(
                key=f"dev:{d.id}",
                category="device",
                text=f"the {label}",
                info=(("value", d.id), ("kind", d.kind)),
            )
        )
    for k in kinds_present:
        add_terminal(Terminal(key=f"kind:{k}", category="kind", text=k, info=(("value", k),)))
    for loc in locations:
        add_terminal(Terminal(key=f"loc:{loc}", category="location", text=loc, info=(("value", loc),)))

    def value_nt(domain: Domain) -> str:
        """Nonterminal producing one literal of the domain."""
        dk = _domain_key(domain)
        nt = f"VAL:{dk}"
        if any(p.lhs == nt for p in prods):
            return nt
        opts = domain.option_values()
        if opts is None:
            key = add_terminal(
                Terminal(key=f"class:{dk}", category="number" if isinstance(domain, IntRangeDomain) else "value", domain=domain)
            )
            prods.append(Production(lhs=nt, rhs=(("t", key),), tag="value"))
            return nt
        for v in opts:
            text = domain.display(v)
            if isinstance(domain, IntRangeDomain):
                key = add_terminal(
                    Terminal(key=f"num:{text}", category="number", text=text, info=(("value", v),))
                )
            else:
                key = add_terminal(
                    Terminal(key=f"val:{text}", category="value", text=text, info=(("value", v),))
                )
            prods.append(Production(lhs=nt, rhs=(("t", key),), tag="value"))
        return nt

    # location filter suffix, shared
    prods.append(
        Production(lhs="LOCOPT", rhs=(("t", "kw:located in"), ("n", "LOC")), tag="locopt_some")
    )
    prods.append(Production(lhs="LOCOPT", rhs=(), tag="locopt_none"))
    for loc in locations:
        prods.append(Production(lhs="LOC", rhs=(("t", f"loc:{loc}"),), tag="token_value"))

    # program skeleton
    prods.append(
        Production(
            lhs=START,
            rhs=(("t", "kw:program"), ("t", "class:name"), ("n", "STMTS"), ("n", "RULES")),
            tag="program",
        )
    )
    prods.append(Production(lhs="STMTS", rhs=(("n", "STMT"), ("n", "STMTS")), tag="cons"))
    prods.append(Production(lhs="STMTS", rhs=(), tag="nil"))
    prods.append(Production(lhs="RULES", rhs=(("n", "RULE"), ("n", "RULES")), tag="cons"))
    prods.append(Production(lhs="RULES", rhs=(), tag="nil"))

    # statements: one production per action display, selector specialized to
    # the kinds that support it
    all_actions = sorted(
        {a.name for k in kinds_present for a in catalog.kind(k).actions.values()}
    )
    for aname in all_actions:
        owners = [k for k in kinds_present if aname in catalog.kind(k).actions]
        adef = catalog.kind(owners[0]).actions[aname]
        akey = add_terminal(
            Terminal(key=f"act:{aname}", category="action", text=adef.display, info=(("value", aname),))
        )
        sel_nt = f"ACTSEL:{aname}"
        rhs: list = [("t", akey), ("n", sel_nt)]
        info: list = [("action", aname)]
        if adef.param is not None:
            pname, pdom = adef.param
            rhs += [("t", "kw:to"), ("n", value_nt(pdom))]
            info.append(("param", pname))
        prods.append(Production(lhs="STMT", rhs=tuple(rhs), tag="action_stmt", info=tuple(info)))
        for d in devices:
            if d.kind in owners:
                prods.append(
                    Production(lhs=sel_nt, rhs=(("t", f"dev:{d.id}"),), tag="sel_byid")
                )
        if owners:
            prods.append(
                Production(lhs=sel_nt, rhs=(("t", "kw:all"), ("n", f"ACTKIND:{aname}")), tag="passthrough")
            )
            for k in owners:
                prods.append(
                    Production(
                        lhs=f"ACTKIND:{aname}",
                        rhs=(("t", f"kind:{k}"), ("n", "LOCOPT")),
                        tag="sel_kind",
                    )
                )

    if known_programs:
        prods.append(
            Production(lhs="STMT", rhs=(("t", "kw:start program"), ("n", "PROGREF")), tag="start_stmt")
        )
        prods.append(
            Production(lhs="STMT", rhs=(("t", "kw:stop program"), ("n", "PROGREF")), tag="stop_stmt")
        )
        for pid, pname in sorted(known_programs):
            key = add_terminal(
                Terminal(key=f"prog:{pid}", category="program", text=pname, info=(("value", pid),))
            )
            prods.append(Production(lhs="PROGREF", rhs=(("t", key),), tag="token_value"))
    prods.append(
        Production(
            lhs="STMT",
            rhs=(("t", "kw:wait"), ("t", "class:number"), ("n", "UNIT")),
            tag="wait_stmt",
        )
    )
    for unit, mult in (("ms", 1), ("seconds", 1000), ("minutes", 60000)):
        prods.append(
            Production(lhs="UNIT", rhs=(("t", f"kw:{unit}"),), tag="unit", info=(("multiplier", mult),))
        )

    # event rules
    event_kinds = [k for k in kinds_present if catalog.kind(k).events]
    if event_kinds:
        prods.append(
            Production(
                lhs="RULE",
                rhs=(("t", "kw:each time"), ("n", "EVTRIG"), ("t", "kw:do"), ("n", "BODY")),
                tag="rule_event",
            )
        )
        for d in devices:
            if d.kind in event_kinds:
                prods.append(
                    Production(
                        lhs="EVTRIG",
                        rhs=(("t", f"dev:{d.id}"), ("n", f"EVT:{d.kind}")),
                        tag="evtrig_byid",
                    )
                )
        prods.append(
            Production(lhs="EVTRIG", rhs=(("t", "kw:all"), ("n", "EVKIND")), tag="passthrough")
        )
        for k in event_kinds:
            prods.append(
                Production(
                    lhs="EVKIND",
                    rhs=(("t", f"kind:{k}"), ("n", "LOCOPT"), ("n", f"EVT:{k}")),
                    tag="evtrig_kind",
                )
            )
        for k in event_kinds:
            for ename in sorted(catalog.kind(k).events):
                edef = catalog.kind(k).events[ename]
                ekey = add_terminal(
                    Terminal(
                        key=f"ev:{ename}", category="event", text=edef.display, info=(("value", ename),)
                    )
                )
                if edef.trigger_param is not None:
                    pdom = edef.fields[edef.trigger_param]
                    prods.append(
                        Production(
                            lhs=f"EVT:{k}",
                            rhs=(("t", ekey), ("n", value_nt(pdom))),
                            tag="evt_param",
                            info=(("event", ename),),
                        )
                    )
                else:
                    prods.append(
                        Production(
                            lhs=f"EVT:{k}", rhs=(("t", ekey),), tag="evt_plain", info=(("event", ename),)
                        )
                    )

    # state rules
    var_kinds = [k for k in kinds_present if catalog.kind(k).state_vars]
    if var_kinds:
        prods.append(
            Production(
                lhs="RULE",
                rhs=(("t", "kw:if"), ("n", "COND"), ("t", "kw:do"), ("n", "BODY")),
                tag="rule_state",
            )
        )
        prods.append(Production(lhs="COND", rhs=(("n", "CONJ"), ("n", "ORTAIL")), tag="or_build"))
        prods.append(
            Production(lhs="ORTAIL", rhs=(("t", "kw:or"), ("n", "CONJ"), ("n", "ORTAIL")), tag="cons_skip")
        )
        prods.append(Production(lhs="ORTAIL", rhs=(), tag="nil"))
        prods.append(Production(lhs="CONJ", rhs=(("n", "NEG"), ("n", "ANDTAIL")), tag="and_build"))
        prods.append(
            Production(lhs="ANDTAIL", rhs=(("t", "kw:and"), ("n", "NEG"), ("n", "ANDTAIL")), tag="cons_skip")
        )
        prods.append(Production(lhs="ANDTAIL", rhs=(), tag="nil"))
        prods.append(Production(lhs="NEG", rhs=(("t", "kw:not"), ("n", "NEG")), tag="not_build"))
        prods.append(Production(lhs="NEG", rhs=(("n", "PRIMARY"),), tag="passthrough"))
        prods.append(
            Production(lhs="PRIMARY", rhs=(("t", "kw:("), ("n", "COND"), ("t", "kw:)")), tag="parens")
        )
        prods.append(Production(lhs="PRIMARY", rhs=(("n", "ATOM"),), tag="passthrough"))
        for d in devices:
            if d.kind in var_kinds:
                prods.append(
                    Production(
                        lhs="ATOM",
                        rhs=(("t", f"dev:{d.id}"), ("n", f"VARCMP:{d.kind}")),
                        tag="atom_byid",
                    )
                )
        for quant in ("all", "any"):
            prods.append(
                Production(
                    lhs="ATOM",
                    rhs=(("t", f"kw:{quant}"), ("n", "ATOMKIND")),
                    tag="atom_quant",
                    info=(("quantifier", quant),),
                )
            )
        for k in var_kinds:
            prods.append(
                Production(
                    lhs="ATOMKIND",
                    rhs=(("t", f"kind:{k}"), ("n", "LOCOPT"), ("n", f"VARCMP:{k}")),
                    tag="atom_kind",
                )
            )
        for k in var_kinds:
            for var in sorted(catalog.kind(k).state_vars):
                dom = catalog.kind(k).state_vars[var]
                vkey = add_terminal(
                    Terminal(key=f"var:{var}", category="variable", text=var, info=(("value", var),))
                )
                prods.append(
                    Production(
                        lhs=f"VARCMP:{k}",
                        rhs=(("t", vkey), ("n", f"CMPVAL:{_domain_key(dom)}")),
                        tag="varcmp",
                    )
                )
        seen_cmp: set[str] = set()
        for k in var_kinds:
            for var in sorted(catalog.kind(k).state_vars):
                dom = catalog.kind(k).state_vars[var]
                dk = _domain_key(dom)
                if dk in seen_cmp:
                    continue
                seen_cmp.add(dk)
                val_nt = value_nt(dom)
                comps = ["=", "!="] + (["<", "<=", ">", ">="] if dom.ordered() else [])
                for sym in comps:
                    prods.append(
                        Production(
                            lhs=f"CMPVAL:{dk}",
                            rhs=(("t", f"cmp:{COMPARATOR_TEXT[sym]}"), ("n", val_nt)),
                            tag="cmpval",
                            info=(("comparator", sym),),
                        )
                    )

    prods.append(Production(lhs="BODY", rhs=(("n", "STMT"), ("n", "BODYTAIL")), tag="cons"))
    prods.append(Production(lhs="BODYTAIL", rhs=(("n", "STMT"), ("n", "BODYTAIL")), tag="cons"))
    prods.append(Production(lhs="BODYTAIL", rhs=(), tag="nil"))

    prods = _prune(prods, START)
    used = {name for p in prods for kind, name in p.rhs if kind == "t"}
    used |= {"kw:program", "class:name"}
    terminals = {k: t for k, t in terminals.items() if k in used}

    action_display = {}
    event_display = {}
    for k in sorted(catalog.kinds):
        for a in catalog.kind(k).actions.values():
            action_display[a.name] = a.display
        for e in catalog.kind(k).events.values():
            event_display[e.name] = e.display

    grammar = Grammar(
        generation=snapshot.generation,
        terminals=terminals,
        productions=tuple(prods),
        action_display=action_display,
        event_display=event_display,
        program_names=dict(sorted(known_programs)),
    )
    grammar.tables()  # fail fast on conflicts
    return grammar


def _prune(prods: list[Production], start: str) -> list[Production]:
    """Drop productions that reference nonterminals with no productions."""
    while True:
        have = {p.lhs for p in prods}
        keep = [
            p
            for p in prods
            if all(kind == "t" or name in have for kind, name in p.rhs)
        ]
        if len(keep) == len(prods):
            break
        prods = keep
    # drop unreachable nonterminals for cleanliness
    reach = {start}
    changed = True
    while changed:
        changed = False
        for p in prods:
            if p.lhs in reach:
                for kind, name in p.rhs:
                    if kind == "n" and name not in reach:
                        reach.add(name)
                        changed = True
    return [p for p in prods if p.lhs in reach]
