"""Experiment configuration files.

A config is plain text, one ``key = value`` per line, ``#`` starts a comment::

    command = interpolate
    model = potts
    q = 3
    graph = k2.el
    target = 2
    grid = 1000

``command`` names the subcommand (words separated by spaces). Every other key is
a long option of that subcommand, spelled with either dashes or underscores.
Values are checked against the subcommand's option kinds before anything runs.
Replay files written by the CLI use the same format.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .rational import ParseError, parse_rational

GLOBAL_KEYS = ("seed", "threads", "budget")


@dataclass
class ExperimentConfig:
    command: tuple
    options: dict = field(default_factory=dict)  # option name -> raw string; flags map to "true"
    source: str = "<config>"
    base_dir: str = "."  # relative file paths are resolved against this

    def to_argv(self, kinds: dict) -> list[str]:
        glob, local = [], []
        for key, val in self.options.items():
            target = glob if key in GLOBAL_KEYS else local
            if kinds.get(key) == "flag":
                if val == "true":
                    target.append(f"--{key}")
            else:
                if kinds.get(key) in ("in", "out") and not os.path.isabs(val):
                    val = os.path.normpath(os.path.join(self.base_dir, val))
                target += [f"--{key}", val]
        return glob + list(self.command) + local

    def render(self) -> str:
        lines = [f"command = {' '.join(self.command)}"]
        lines += [f"{k} = {v}" for k, v in self.options.items()]
        return "\n".join(lines) + "\n"


_BOOL = {"true": "true", "yes": "true", "1": "true", "false": "false", "no": "false", "0": "false"}


def check_value(kind: str, raw: str, where: str, base_dir: str = ".") -> str:
    """Validate one raw value against an option kind; returns the normalised string."""
    if kind == "rational":
        parse_rational(raw, where)
    elif kind == "int":
        try:
            int(raw)
        except ValueError:
            raise ParseError(f"expected an integer, got {raw!r}", where) from None
    elif kind == "real":
        try:
            float(raw)
        except ValueError:
            raise ParseError(f"expected a real number, got {raw!r}", where) from None
    elif kind == "flag":
        if raw.lower() not in _BOOL:
            raise ParseError(f"expected true/false, got {raw!r}", where)
        return _BOOL[raw.lower()]
    elif kind == "in":
        path = raw if os.path.isabs(raw) else os.path.join(base_dir, raw)
        if not os.path.exists(path):
            raise ParseError(f"file {raw!r} does not exist", where)
    elif kind.startswith("choice:"):
        allowed = kind[len("choice:"):].split("|")
        if raw not in allowed:
            raise ParseError(f"expected one of {', '.join(allowed)}, got {raw!r}", where)
    return raw


def parse_config(text: str, schema, source: str = "<config>", base_dir: str = ".") -> ExperimentConfig:
    """Parse and validate a config.

    ``schema(command_words)`` returns ``{option: kind}`` for a known subcommand
    and None otherwise. Global options are accepted for every command.
    """
    command = None
    raw_items = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        key, eq, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key:
            raise ParseError(f"expected 'key = value', got {body!r}", where)
        key = key.replace("_", "-")
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", where)
        seen[key] = lineno
        if key == "command":
            command = (tuple(val.split()), where)
        else:
            raw_items.append((key, val, where))
    if command is None:
        raise ParseError("missing 'command' key", f"{source}:1")
    words, cwhere = command
    kinds = schema(words)
    if kinds is None:
        raise ParseError(f"unknown command {' '.join(words)!r}", cwhere)
    opts = {}
    for key, val, where in raw_items:
        if key not in kinds:
            raise ParseError(f"unknown key {key!r} for command {' '.join(words)!r}", where)
        opts[key] = check_value(kinds[key], val, where, base_dir)
    return ExperimentConfig(words, opts, source, base_dir)


def read_config(path: str, schema) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, schema, path, os.path.dirname(os.path.abspath(path)))
