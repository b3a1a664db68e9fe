"""Table-driven LL(1) parser over grammar-directed tokens.

One machine serves three callers: full parsing to an AST, prefix analysis
for the completion engine (what may come next), and precise syntax errors
carrying the token alternatives that were legal at the failure point.

Scanning is grammar-directed: at every step only the terminals the table
allows are tried, longest concrete text first, so multi-word tokens like
"each time" or "the blue-lamp" need no separate lexer.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError
from .grammar import END, Grammar, Production, Terminal, Token
from .nodes import (
    ActionStatement,
    AllOfKind,
    And,
    Atom,
    ById,
    EventTrigger,
    Filtered,
    Not,
    Or,
    Program,
    Rule,
    StartStatement,
    StateTrigger,
    StopStatement,
    WaitStatement,
)


@dataclass
class _Build:
    production: Production
    arity: int


@dataclass
class PrefixAnalysis:
    """Machine state after consuming a whole text as a prefix."""

    tokens: tuple[Token, ...]
    stack: tuple  # outstanding symbols, top last
    expected: tuple[str, ...]  # terminal keys legal as the next token
    complete: bool  # True when the prefix already forms a full program


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _scan(text: str, pos: int, candidates: list[Terminal]):
    """Longest concrete match first, then open classes; None if nothing fits."""
    pos = _skip_ws(text, pos)
    if pos >= len(text):
        return None
    concrete = sorted(
        (t for t in candidates if t.text is not None), key=lambda t: (-len(t.text), t.key)
    )
    for term in concrete:
        m = term.match(text, pos)
        if m is not None:
            return term, m, pos
    for term in sorted((t for t in candidates if t.text is None), key=lambda t: t.key):
        m = term.match(text, pos)
        if m is not None:
            return term, m, pos
    return None


def _expected_from_stack(stack, grammar: Grammar) -> tuple[tuple[str, ...], bool]:
    """Exact next-token set: first-set walk over the outstanding symbols."""
    tables = grammar.tables()
    expected: set[str] = set()
    for sym in reversed(stack):
        if isinstance(sym, _Build):
            continue
        kind, name = sym
        if kind == "t":
            expected.add(name)
            return tuple(sorted(expected)), False
        expected |= set(tables.first.get(name, frozenset()))
        if name not in tables.nullable:
            return tuple(sorted(expected)), False
    return tuple(sorted(expected)), True


def expected_terminals(analysis: PrefixAnalysis, grammar: Grammar) -> tuple[str, ...]:
    return analysis.expected


def _run(text: str, grammar: Grammar, prefix_mode: bool):
    tables = grammar.tables()
    pos = 0
    stack: list = [("n", grammar.start)]
    values: list = []
    tokens: list[Token] = []

    def freeze_state():
        expected, complete = _expected_from_stack(stack, grammar)
        return PrefixAnalysis(
            tokens=tuple(tokens), stack=tuple(stack), expected=expected, complete=complete
        )

    while stack:
        top = stack.pop()
        if isinstance(top, _Build):
            children = values[len(values) - top.arity :] if top.arity else []
            del values[len(values) - top.arity :]
            values.append(_build(top.production, children))
            continue
        kind, name = top
        if kind == "t":
            term = grammar.terminals[name]
            m = _scan(text, pos, [term])
            if m is None:
                if _skip_ws(text, pos) >= len(text):
                    if prefix_mode:
                        stack.append(top)
                        return freeze_state()
                    raise ParseError(
                        f"expected {term.describe()!r}, got end of input",
                        position=_skip_ws(text, pos),
                        expected=(name,),
                    )
                stack.append(top)
                expected, _ = _expected_from_stack(stack, grammar)
                raise ParseError(
                    f"expected {term.describe()!r}",
                    position=_skip_ws(text, pos),
                    expected=expected,
                )
            _, (tok_text, value, newpos), _ = m
            token = Token(text=tok_text, category=term.category, terminal_key=term.key, value=value)
            tokens.append(token)
            values.append(token)
            pos = newpos
            continue
        row = tables.rows[name]
        candidates = [grammar.terminals[k] for k in row if k != END]
        m = _scan(text, pos, candidates)
        if m is None:
            at_end = _skip_ws(text, pos) >= len(text)
            if at_end:
                if prefix_mode:
                    stack.append(top)
                    return freeze_state()
                if END in row:
                    prod = row[END]
                else:
                    stack.append(top)
                    expected, _ = _expected_from_stack(stack, grammar)
                    raise ParseError(
                        "unexpected end of input", position=_skip_ws(text, pos), expected=expected
                    )
            else:
                stack.append(top)
                expected, _ = _expected_from_stack(stack, grammar)
                raise ParseError(
                    f"no alternative of {name} matches",
                    position=_skip_ws(text, pos),
                    expected=expected,
                )
        else:
            prod = row[m[0].key]
        stack.append(_Build(production=prod, arity=len(prod.rhs)))
        for sym in reversed(prod.rhs):
            stack.append(sym)

    rest = _skip_ws(text, pos)
    if rest < len(text):
        if prefix_mode:
            # a complete program with trailing garbage is not a valid prefix
            raise ParseError("trailing input", position=rest, expected=())
        raise ParseError("trailing input", position=rest, expected=())
    if prefix_mode:
        return PrefixAnalysis(tokens=tuple(tokens), stack=(), expected=(), complete=True)
    assert len(values) == 1
    return values[0]


def parse(text: str, grammar: Grammar) -> Program:
    """Parse source text to a Program; raises ParseError with expectations."""
    return _run(text, grammar, prefix_mode=False)


def analyze_prefix(text: str, grammar: Grammar) -> PrefixAnalysis:
    """Consume text as a prefix of a program; state describes what may follow."""
    return _run(text, grammar, prefix_mode=True)


def is_valid_prefix(text: str, grammar: Grammar) -> bool:
    try:
        analyze_prefix(text, grammar)
        return True
    except ParseError:
        return False


# -- builders -----------------------------------------------------------------


def _locopt_selector(kind_tok: Token, locopt) -> object:
    if locopt is None:
        return AllOfKind(kind=kind_tok.value)
    return Filtered(kind=kind_tok.value, property_name="location", property_value=locopt)


def _build(prod: Production, children: list):
    tag = prod.tag
    if tag == "program":
        _, name_tok, stmts, rule_pairs = children
        rules = tuple(
            Rule(index=i, trigger=trig, body=body) for i, (trig, body) in enumerate(rule_pairs)
        )
        return Program(
            program_id=name_tok.value, name=name_tok.value, imperative=stmts, rules=rules
        )
    if tag == "cons":
        head, tail = children
        return (head,) + tail
    if tag == "cons_skip":  # keyword, item, tail
        _, head, tail = children
        return (head,) + tail
    if tag == "nil":
        return ()
    if tag == "passthrough":
        return children[-1]
    if tag == "token_value":
        return children[0].value
    if tag == "value":
        return children[0].value
    if tag == "locopt_some":
        return children[1]
    if tag == "locopt_none":
        return None
    if tag == "sel_byid":
        return ById(device_id=children[0].value)
    if tag == "sel_kind":
        return _locopt_selector(children[0], children[1])
    if tag == "action_stmt":
        action = prod.get("action")
        param = prod.get("param")
        if param is not None:
            _, selector, _, value = children
            return ActionStatement(selector=selector, action_name=action, args=((param, value),))
        _, selector = children
        return ActionStatement(selector=selector, action_name=action)
    if tag == "start_stmt":
        return StartStatement(program_id=children[1])
    if tag == "stop_stmt":
        return StopStatement(program_id=children[1])
    if tag == "wait_stmt":
        return WaitStatement(duration_ms=children[1].value * children[2])
    if tag == "unit":
        return prod.get("multiplier")
    if tag == "rule_event":
        _, trigger, _, body = children
        return (trigger, body)
    if tag == "rule_state":
        _, cond, _, body = children
        return (StateTrigger(condition=cond), body)
    if tag == "evtrig_byid":
        dev_tok, (event, param) = children
        return EventTrigger(selector=ById(device_id=dev_tok.value), event_type=event, param_value=param)
    if tag == "evtrig_kind":
        kind_tok, locopt, (event, param) = children
        return EventTrigger(
            selector=_locopt_selector(kind_tok, locopt), event_type=event, param_value=param
        )
    if tag == "evt_plain":
        return (prod.get("event"), None)
    if tag == "evt_param":
        return (prod.get("event"), children[1])
    if tag == "or_build":
        head, tail = children
        return head if not tail else Or(items=(head,) + tail)
    if tag == "and_build":
        head, tail = children
        return head if not tail else And(items=(head,) + tail)
    if tag == "not_build":
        return Not(item=children[1])
    if tag == "parens":
        return children[1]
    if tag == "atom_byid":
        dev_tok, (var, cmp, value) = children
        return Atom(
            selector=ById(device_id=dev_tok.value), variable=var, comparator=cmp, value=value
        )
    if tag == "atom_quant":
        inner = children[1]
        return Atom(
            selector=inner.selector,
            variable=inner.variable,
            comparator=inner.comparator,
            value=inner.value,
            quantifier=prod.get("quantifier"),
        )
    if tag == "atom_kind":
        kind_tok, locopt, (var, cmp, value) = children
        return Atom(
            selector=_locopt_selector(kind_tok, locopt), variable=var, comparator=cmp, value=value
        )
    if tag == "varcmp":
        var_tok, (cmp, value) = children
        return (var_tok.value, cmp, value)
    if tag == "cmpval":
        return (prod.get("comparator"), children[1])
    raise AssertionError(f"unknown production tag {tag!r}")
