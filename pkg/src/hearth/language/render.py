"""Render an AST back to its token sentence.

This is written as a direct walk of the tree, independent of the parser, so
the parse-render round-trip test checks two separate readings of the
concrete syntax against each other.  Device references render through the
grammar's device terminals; vanished devices come out as Unknown tokens
(category device) that deliberately do not re-parse.
"""

from __future__ import annotations

from .grammar import COMPARATOR_TEXT, Grammar, Token
from .nodes import (
    ActionStatement,
    And,
    Atom,
    ById,
    EventTrigger,
    Filtered,
    Not,
    Or,
    Program,
    StartStatement,
    StateTrigger,
    StopStatement,
    WaitStatement,
)


def _kw(grammar: Grammar, text: str, path: str) -> Token:
    term = grammar.terminals.get(f"kw:{text}")
    if term is not None:
        return term.instantiate(path=path)
    return Token(text=text, category="keyword", terminal_key=f"kw:{text}", value=text, path=path)


def _device_token(grammar: Grammar, device_id: str, path: str) -> Token:
    term = grammar.device_terminal(device_id)
    if term is not None:
        return term.instantiate(path=path)
    return Token(
        text=f"the Unknown({device_id})",
        category="device",
        terminal_key=f"dev:{device_id}",
        value=device_id,
        path=path,
    )


def _value_token(grammar: Grammar, value, path: str) -> Token:
    if isinstance(value, bool):
        text = "true" if value else "false"
        return Token(text=text, category="value", terminal_key=f"val:{text}", value=value, path=path)
    if isinstance(value, int):
        return Token(text=str(value), category="number", terminal_key=f"num:{value}", value=value, path=path)
    return Token(text=str(value), category="value", terminal_key=f"val:{value}", value=value, path=path)


def _selector_tokens(grammar: Grammar, selector, path: str, quantifier: str = "all") -> list[Token]:
    if isinstance(selector, ById):
        return [_device_token(grammar, selector.device_id, path)]
    out = [_kw(grammar, quantifier, path)]
    kind = selector.kind
    term = grammar.terminals.get(f"kind:{kind}")
    if term is not None:
        out.append(term.instantiate(path=path))
    else:
        out.append(Token(text=kind, category="kind", terminal_key=f"kind:{kind}", value=kind, path=path))
    if isinstance(selector, Filtered):
        out.append(_kw(grammar, "located in", path))
        loc = selector.property_value
        lterm = grammar.terminals.get(f"loc:{loc}")
        if lterm is not None:
            out.append(lterm.instantiate(path=path))
        else:
            out.append(Token(text=loc, category="location", terminal_key=f"loc:{loc}", value=loc, path=path))
    return out


def _statement_tokens(grammar: Grammar, stmt, path: str) -> list[Token]:
    if isinstance(stmt, ActionStatement):
        display = grammar.action_display.get(stmt.action_name, stmt.action_name)
        out = [
            Token(
                text=display,
                category="action",
                terminal_key=f"act:{stmt.action_name}",
                value=stmt.action_name,
                path=path,
            )
        ]
        out.extend(_selector_tokens(grammar, stmt.selector, f"{path}.selector"))
        if stmt.args:
            out.append(_kw(grammar, "to", path))
            out.append(_value_token(grammar, stmt.args[0][1], path))
        return out
    if isinstance(stmt, StartStatement) or isinstance(stmt, StopStatement):
        verb = "start program" if isinstance(stmt, StartStatement) else "stop program"
        name = grammar.program_names.get(stmt.program_id, f"Unknown({stmt.program_id})")
        return [
            _kw(grammar, verb, path),
            Token(
                text=name,
                category="program",
                terminal_key=f"prog:{stmt.program_id}",
                value=stmt.program_id,
                path=path,
            ),
        ]
    assert isinstance(stmt, WaitStatement)
    ms = stmt.duration_ms
    if ms % 60000 == 0:
        amount, unit = ms // 60000, "minutes"
    elif ms % 1000 == 0:
        amount, unit = ms // 1000, "seconds"
    else:
        amount, unit = ms, "ms"
    return [
        _kw(grammar, "wait", path),
        Token(text=str(amount), category="number", terminal_key="class:number", value=amount, path=path),
        _kw(grammar, unit, path),
    ]


def _atom_tokens(grammar: Grammar, atom: Atom, path: str) -> list[Token]:
    out = _selector_tokens(grammar, atom.selector, f"{path}.selector", quantifier=atom.quantifier)
    out.append(
        Token(text=atom.variable, category="variable", terminal_key=f"var:{atom.variable}", value=atom.variable, path=path)
    )
    cmp_text = COMPARATOR_TEXT[atom.comparator]
    out.append(Token(text=cmp_text, category="keyword", terminal_key=f"cmp:{cmp_text}", value=atom.comparator, path=path))
    out.append(_value_token(grammar, atom.value, path))
    return out


def _condition_tokens(grammar: Grammar, cond, path: str) -> list[Token]:
    if isinstance(cond, Atom):
        return _atom_tokens(grammar, cond, path)
    if isinstance(cond, Not):
        inner = cond.item
        out = [_kw(grammar, "not", path)]
        if isinstance(inner, (And, Or)):
            out.append(_kw(grammar, "(", path))
            out.extend(_condition_tokens(grammar, inner, f"{path}.not"))
            out.append(_kw(grammar, ")", path))
        else:
            out.extend(_condition_tokens(grammar, inner, f"{path}.not"))
        return out
    if isinstance(cond, And):
        out: list[Token] = []
        for i, item in enumerate(cond.items):
            if i:
                out.append(_kw(grammar, "and", path))
            if isinstance(item, (And, Or)):
                out.append(_kw(grammar, "(", path))
                out.extend(_condition_tokens(grammar, item, f"{path}[{i}]"))
                out.append(_kw(grammar, ")", path))
            else:
                out.extend(_condition_tokens(grammar, item, f"{path}[{i}]"))
        return out
    assert isinstance(cond, Or)
    out = []
    for i, item in enumerate(cond.items):
        if i:
            out.append(_kw(grammar, "or", path))
        if isinstance(item, Or):
            out.append(_kw(grammar, "(", path))
            out.extend(_condition_tokens(grammar, item, f"{path}[{i}]"))
            out.append(_kw(grammar, ")", path))
        else:
            out.extend(_condition_tokens(grammar, item, f"{path}[{i}]"))
    return out


def render(program: Program, grammar: Grammar) -> tuple[Token, ...]:
    """Token sentence for a program; joins with single spaces to source text."""
    out: list[Token] = [
        _kw(grammar, "program", ""),
        Token(text=program.name, category="program", terminal_key="class:name", value=program.name, path="name"),
    ]
    for i, stmt in enumerate(program.imperative):
        out.extend(_statement_tokens(grammar, stmt, f"imperative[{i}]"))
    for rule in program.rules:
        rpath = f"rules[{rule.index}]"
        trig = rule.trigger
        if isinstance(trig, EventTrigger):
            out.append(_kw(grammar, "each time", rpath))
            out.extend(_selector_tokens(grammar, trig.selector, f"{rpath}.trigger.selector"))
            display = grammar.event_display.get(trig.event_type, trig.event_type)
            out.append(
                Token(text=display, category="event", terminal_key=f"ev:{trig.event_type}", value=trig.event_type, path=rpath)
            )
            if trig.param_value is not None:
                out.append(_value_token(grammar, trig.param_value, rpath))
        else:
            assert isinstance(trig, StateTrigger)
            out.append(_kw(grammar, "if", rpath))
            out.extend(_condition_tokens(grammar, trig.condition, f"{rpath}.trigger.condition"))
        out.append(_kw(grammar, "do", rpath))
        for i, stmt in enumerate(rule.body):
            out.extend(_statement_tokens(grammar, stmt, f"{rpath}.body[{i}]"))
    return tuple(out)


def render_text(program: Program, grammar: Grammar) -> str:
    return " ".join(t.text for t in render(program, grammar))
