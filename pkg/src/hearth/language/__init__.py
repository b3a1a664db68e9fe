"""The automation language: AST, dynamic grammar, parser, renderer, validation."""

from .nodes import (  # noqa: F401
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
from .grammar import Grammar, Terminal, Token, derive_grammar  # noqa: F401
from .parser import analyze_prefix, expected_terminals, parse  # noqa: F401
from .render import render  # noqa: F401
from .validate import ValidationReport, validate  # noqa: F401
