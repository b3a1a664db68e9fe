"""Program persistence: one JSON document per program.

A document holds the program id, its source text, and the structured tree;
the loader re-parses the text and compares so the two can never drift.
Writes are atomic (write-aside then rename) and idempotent: saving identical
content changes nothing on disk.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..errors import ParseError, ProgramNotFoundError, StorageError
from ..language.grammar import NAME_RE, RESERVED_NAMES, Grammar
from ..language.nodes import Program, program_from_json, program_to_json
from ..language.parser import parse


def check_name(name: str) -> None:
    if not NAME_RE.match(name):
        raise StorageError(f"program name {name!r} must be an identifier")
    if name.lower() in RESERVED_NAMES:
        raise StorageError(f"program name {name!r} is a reserved word")


class ProgramStore:
    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, program_id: str) -> Path:
        check_name(program_id)
        return self.directory / f"{program_id}.json"

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def known_programs(self) -> list[tuple[str, str]]:
        out = []
        for pid in self.list_ids():
            doc = self._read(pid)
            out.append((doc["program_id"], doc["name"]))
        return out

    def _read(self, program_id: str) -> dict:
        path = self._path(program_id)
        if not path.exists():
            raise ProgramNotFoundError(f"no stored program {program_id!r}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StorageError(f"corrupt program document {path}: {exc}") from exc

    def get_text(self, program_id: str) -> str:
        return self._read(program_id)["text"]

    def save(self, name: str, text: str, grammar: Grammar) -> tuple[Program, bool]:
        """Parse and persist; returns (program, changed).

        The grammar must already know this program's own name so self-stop
        references parse.
        """
        check_name(name)
        try:
            program = parse(text, grammar)
        except ParseError as exc:
            raise StorageError(
                f"program text does not parse at position {exc.position}: {exc}"
            ) from exc
        if program.name != name:
            raise StorageError(
                f"document name {name!r} does not match program header {program.name!r}"
            )
        doc = {"program_id": program.program_id, "name": name, "text": text, "ast": program_to_json(program)}
        blob = json.dumps(doc, sort_keys=True, indent=2) + "\n"
        path = self._path(program.program_id)
        if path.exists() and path.read_text(encoding="utf-8") == blob:
            return program, False
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(blob, encoding="utf-8")
        os.replace(tmp, path)
        return program, True

    def load(self, program_id: str, grammar: Grammar) -> Program:
        """Load one program, verifying text and tree agree."""
        doc = self._read(program_id)
        stored = program_from_json(doc["ast"])
        try:
            reparsed = parse(doc["text"], grammar)
        except ParseError:
            # text references vocabulary the registry has never seen; the
            # tree is still usable and validation will flag the unknowns
            return stored
        if reparsed != stored:
            raise StorageError(
                f"stored text and tree disagree for {program_id!r}; refusing to load"
            )
        return stored

    def load_all(self, grammar: Grammar) -> dict[str, Program]:
        return {pid: self.load(pid, grammar) for pid in self.list_ids()}

    def delete(self, program_id: str) -> bool:
        path = self._path(program_id)
        if not path.exists():
            return False
        path.unlink()
        return True
