"""Syntax-directed completion: exactly the tokens that are legal next.

A draft is the token prefix of a program under construction; editing always
happens at the leftmost hole, which for a prefix is its end.  Options come
from a first-set walk over the parser's outstanding symbols, so they are
sound and complete against the grammar by construction; the test suite
still cross-checks them against brute-force re-parsing.

Device options may be tagged "state-filtered-out" when the pending action
would not change the device's current state; they stay offered so the UI
can gray them instead of hiding them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InvalidInsertionPointError, ParseError, StaleOptionError
from .language.grammar import Grammar, Terminal, Token, derive_grammar
from .language.parser import PrefixAnalysis, analyze_prefix, _Build
from .registry import RegistrySnapshot

AVAILABLE_TAG = "available"
STATE_FILTERED = "state-filtered-out"

_CATEGORY_RANK = {
    "keyword": 0,
    "device": 1,
    "kind": 2,
    "location": 3,
    "action": 4,
    "event": 5,
    "variable": 6,
    "value": 7,
    "number": 8,
    "program": 9,
}


@dataclass(frozen=True)
class Draft:
    tokens: tuple[Token, ...] = ()

    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    def to_json(self) -> dict:
        return {
            "tokens": [
                {
                    "text": t.text,
                    "category": t.category,
                    "terminal_key": t.terminal_key,
                    "value": t.value,
                }
                for t in self.tokens
            ]
        }

    @staticmethod
    def from_json(d: dict) -> "Draft":
        return Draft(
            tokens=tuple(
                Token(
                    text=t["text"],
                    category=t["category"],
                    terminal_key=t.get("terminal_key", ""),
                    value=t.get("value"),
                )
                for t in d.get("tokens", [])
            )
        )


@dataclass(frozen=True)
class InsertionPoint:
    """Slot ordinal plus the chain of syntactic constructs enclosing it."""

    token_index: int
    context: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"token_index": self.token_index, "context": list(self.context)}

    @staticmethod
    def from_json(d: dict) -> "InsertionPoint":
        return InsertionPoint(token_index=d["token_index"], context=tuple(d.get("context", ())))


@dataclass(frozen=True)
class CompletionOption:
    token: Token
    category: str
    free_text: bool
    availability: str
    edit: str  # human description of the AST delta
    generation: int
    domain_hint: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "token": {
                "text": self.token.text,
                "category": self.token.category,
                "terminal_key": self.token.terminal_key,
                "value": self.token.value,
            },
            "category": self.category,
            "free_text": self.free_text,
            "availability": self.availability,
            "edit": self.edit,
            "generation": self.generation,
            "domain_hint": self.domain_hint,
        }

    @staticmethod
    def from_json(d: dict) -> "CompletionOption":
        t = d["token"]
        return CompletionOption(
            token=Token(
                text=t["text"],
                category=t["category"],
                terminal_key=t.get("terminal_key", ""),
                value=t.get("value"),
            ),
            category=d["category"],
            free_text=d["free_text"],
            availability=d["availability"],
            edit=d.get("edit", ""),
            generation=d["generation"],
            domain_hint=d.get("domain_hint"),
        )


def _context_from_analysis(analysis: PrefixAnalysis) -> tuple[str, ...]:
    # productions still being built, outermost first: the path to the hole
    return tuple(b.production.lhs for b in analysis.stack if isinstance(b, _Build))


def _analyze(draft: Draft, grammar: Grammar) -> PrefixAnalysis:
    try:
        return analyze_prefix(draft.text(), grammar)
    except ParseError as exc:
        raise InvalidInsertionPointError(
            f"draft does not parse as a prefix: {exc}"
        ) from exc


def current_point(draft: Draft, grammar: Grammar) -> InsertionPoint:
    analysis = _analyze(draft, grammar)
    return InsertionPoint(
        token_index=len(draft.tokens), context=_context_from_analysis(analysis)
    )


def _pending_action(analysis: PrefixAnalysis) -> Optional[str]:
    """Action whose selector slot the hole sits in, if any."""
    for sym in reversed(analysis.stack):
        if isinstance(sym, _Build):
            continue
        kind, name = sym
        if kind == "n" and name.startswith("ACTSEL:"):
            return name.split(":", 1)[1]
        return None
    return None


def _state_filtered(action_name: str, device_id: str, snapshot: RegistrySnapshot) -> bool:
    desc = snapshot.device(device_id)
    if desc is None:
        return False
    adef = snapshot.catalog.kind(desc.kind).actions.get(action_name)
    if adef is None or adef.param is not None or not adef.effect:
        return False
    state = snapshot.states.get(device_id, {})
    return all(state.get(var) == val for var, val in adef.effect.items())


def _option_for_terminal(
    term: Terminal,
    analysis: PrefixAnalysis,
    snapshot: RegistrySnapshot,
    generation: int,
) -> CompletionOption:
    free = term.text is None
    token = term.instantiate(term.representative_text() if free else None)
    availability = AVAILABLE_TAG
    if term.category == "device":
        action = _pending_action(analysis)
        if action is not None and _state_filtered(action, token.value, snapshot):
            availability = STATE_FILTERED
    context = _context_from_analysis(analysis)
    inside = context[-1] if context else "PROGRAM"
    hint = None
    if free and term.domain is not None:
        hint = term.domain.kind
    elif term.key == "class:number":
        hint = "integer"
    elif term.key == "class:name":
        hint = "name"
    return CompletionOption(
        token=token,
        category=term.category,
        free_text=free,
        availability=availability,
        edit=f"append {term.category} token in {inside}",
        generation=generation,
        domain_hint=hint,
    )


def options(
    draft: Draft,
    point: InsertionPoint,
    snapshot: RegistrySnapshot,
    known_programs: Sequence[tuple[str, str]] = (),
    grammar: Optional[Grammar] = None,
) -> list[CompletionOption]:
    """Every legal next token at the insertion point, deterministically ordered."""
    if grammar is None:
        grammar = derive_grammar(snapshot, known_programs=known_programs)
    if point.token_index != len(draft.tokens):
        raise InvalidInsertionPointError(
            f"insertion point {point.token_index} is not the leftmost hole "
            f"({len(draft.tokens)})"
        )
    analysis = _analyze(draft, grammar)
    opts = [
        _option_for_terminal(grammar.terminals[key], analysis, snapshot, grammar.generation)
        for key in analysis.expected
    ]
    opts.sort(key=lambda o: (_CATEGORY_RANK.get(o.category, 99), o.token.text))
    return opts


def apply_option(
    draft: Draft,
    point: InsertionPoint,
    option: CompletionOption,
    snapshot: RegistrySnapshot,
    known_programs: Sequence[tuple[str, str]] = (),
    grammar: Optional[Grammar] = None,
    text: Optional[str] = None,
) -> tuple[Draft, InsertionPoint]:
    """Insert an option; returns the new draft and the next hole."""
    if grammar is None:
        grammar = derive_grammar(snapshot, known_programs=known_programs)
    if option.generation != grammar.generation:
        raise StaleOptionError(
            f"option from generation {option.generation}, grammar is {grammar.generation}"
        )
    if point.token_index != len(draft.tokens):
        raise InvalidInsertionPointError("insertion point is not the leftmost hole")
    token = option.token
    if text is not None:
        if not option.free_text:
            raise InvalidInsertionPointError("only free-text options accept custom text")
        term = grammar.terminals.get(option.token.terminal_key)
        if term is None:
            raise StaleOptionError(f"terminal {option.token.terminal_key} left the grammar")
        token = term.instantiate(text)
    new_draft = Draft(tokens=draft.tokens + (token,))
    analysis = _analyze(new_draft, grammar)  # raises if the edit is not legal
    return new_draft, InsertionPoint(
        token_index=len(new_draft.tokens), context=_context_from_analysis(analysis)
    )


def delete_at(
    draft: Draft,
    point: InsertionPoint,
    snapshot: RegistrySnapshot,
    known_programs: Sequence[tuple[str, str]] = (),
    grammar: Optional[Grammar] = None,
) -> tuple[Draft, InsertionPoint]:
    """Remove the token at the point and everything that depended on it.

    Later tokens were chosen under the deleted one (an event type depends on
    its selector's kind, a value on its variable), so deletion truncates the
    suffix; the result is always grammatically extendable.
    """
    if grammar is None:
        grammar = derive_grammar(snapshot, known_programs=known_programs)
    if not draft.tokens:
        return draft, InsertionPoint(token_index=0, context=_point_context(draft, grammar))
    if not (0 <= point.token_index < len(draft.tokens)):
        raise InvalidInsertionPointError(
            f"delete point {point.token_index} does not address a filled token"
        )
    new_draft = Draft(tokens=draft.tokens[: point.token_index])
    analysis = _analyze(new_draft, grammar)
    return new_draft, InsertionPoint(
        token_index=len(new_draft.tokens), context=_context_from_analysis(analysis)
    )


def _point_context(draft: Draft, grammar: Grammar) -> tuple[str, ...]:
    return _context_from_analysis(_analyze(draft, grammar))
