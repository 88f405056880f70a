"""Hierarchical parameter store with argument parsing and file load/save.

A :class:`ConfigTree` holds scalars (bool, int, float, str) at dotted paths
("camera.fx").  Values can come from four layers; higher layers win:

    argv  >  environment  >  config file (--conf <path>)  >  defaults

JSON and YAML files are supported, chosen by suffix.  Unknown command-line
flags are kept (open-world: plugins may register parameters the harness
does not know about) and reported as warnings.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import yaml

from .errors import SlamkitError

Scalar = bool | int | float | str

_MISSING = object()


class ConfigError(SlamkitError):
    pass


class UnsupportedFormatError(ConfigError):
    pass


class TypeConflictError(ConfigError):
    pass


class ParseError(ConfigError):
    pass


def coerce_scalar(text: str) -> Scalar:
    """Type a raw string by trial order bool -> int -> float -> str."""
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _split_path(path: str) -> list[str]:
    parts = path.split(".")
    if any(not p for p in parts):
        raise ParseError(f"invalid path {path!r}: empty segment")
    return parts


class _RWLock:
    """Many concurrent readers, one exclusive writer."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_write(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()


class WatchHandle:
    def __init__(self, tree: "ConfigTree", path: str, callback):
        self._tree = tree
        self.path = path
        self.callback = callback

    def cancel(self):
        self._tree._watchers.pop(id(self), None)


class ConfigTree:
    """Ordered tree of scalars addressed by dotted paths."""

    def __init__(self, data: dict | None = None):
        self._root: dict = {}
        self._lock = _RWLock()
        self._watchers: dict[int, WatchHandle] = {}
        self.warnings: list[str] = []
        if data:
            self._merge(self._root, _validate_tree(data, ""))

    def get(self, path: str, default=_MISSING):
        parts = _split_path(path)
        self._lock.acquire_read()
        try:
            node = self._root
            for p in parts:
                if not isinstance(node, dict) or p not in node:
                    if default is _MISSING:
                        raise KeyError(path)
                    return default
                node = node[p]
            return _copy_node(node)
        finally:
            self._lock.release_read()

    def has(self, path: str) -> bool:
        probe = object()
        return self.get(path, probe) is not probe

    def set(self, path: str, value):
        if isinstance(value, dict):
            value = _validate_tree(value, path)
        elif not isinstance(value, Scalar):
            raise TypeConflictError(f"unsupported value type {type(value).__name__} at {path!r}")
        parts = _split_path(path)
        self._lock.acquire_write()
        try:
            node = self._root
            for p in parts[:-1]:
                nxt = node.get(p)
                if nxt is None:
                    nxt = node[p] = {}
                elif not isinstance(nxt, dict):
                    raise TypeConflictError(f"{path!r}: segment {p!r} holds a scalar")
                node = nxt
            leaf = parts[-1]
            if isinstance(node.get(leaf), dict) and not isinstance(value, dict):
                raise TypeConflictError(f"cannot set scalar over map subtree at {path!r}")
            node[leaf] = value
            watchers = [w for w in self._watchers.values() if w.path == path]
        finally:
            self._lock.release_write()
        for w in watchers:
            w.callback(path, value)

    def watch(self, path: str, callback: Callable[[str, Any], None]) -> WatchHandle:
        """Invoke ``callback(path, value)`` on each set of ``path``.

        Callbacks run on the writing thread.
        """
        h = WatchHandle(self, path, callback)
        self._watchers[id(h)] = h
        return h

    def overlay(self, other: "ConfigTree | dict"):
        """Deep-merge ``other`` on top of this tree (other wins)."""
        data = other._root if isinstance(other, ConfigTree) else _validate_tree(other, "")
        self._lock.acquire_write()
        try:
            self._merge(self._root, data)
        finally:
            self._lock.release_write()

    @staticmethod
    def _merge(dst: dict, src: dict):
        for k, v in src.items():
            if isinstance(v, dict) and isinstance(dst.get(k), dict):
                ConfigTree._merge(dst[k], v)
            else:
                dst[k] = _copy_node(v)

    def as_dict(self) -> dict:
        self._lock.acquire_read()
        try:
            return _copy_node(self._root)
        finally:
            self._lock.release_read()

    def __eq__(self, other):
        if isinstance(other, ConfigTree):
            return self._root == other._root
        return NotImplemented

    def __repr__(self):
        return f"ConfigTree({self._root!r})"


def _copy_node(node):
    if isinstance(node, dict):
        return {k: _copy_node(v) for k, v in node.items()}
    return node


def _validate_tree(data, path):
    if isinstance(data, dict):
        out = {}
        for k, v in data.items():
            if not isinstance(k, str):
                raise ConfigError(f"non-string key {k!r} at {path or '<root>'}")
            out[k] = _validate_tree(v, f"{path}.{k}" if path else k)
        return out
    if isinstance(data, Scalar):
        return data
    raise ConfigError(f"unsupported node type {type(data).__name__} at {path or '<root>'}")


@dataclass
class ArgSpec:
    name: str
    default: Scalar
    help: str = ""


class ArgParser:
    """Declares parameters and parses argv/env/file layers into one tree."""

    def __init__(self, specs: Iterable[ArgSpec] = ()):
        self._specs: dict[str, ArgSpec] = {}
        for s in specs:
            self.add(s.name, s.default, s.help)

    def add(self, name: str, default: Scalar, help: str = ""):
        if name in self._specs:
            raise ConfigError(f"duplicate argument spec {name!r}")
        _split_path(name)
        self._specs[name] = ArgSpec(name, default, help)

    def help_text(self) -> str:
        lines = ["# arguments: --<name>=<value> | --<name> <value> | --conf <file>"]
        for s in self._specs.values():
            lines.append(f"  --{s.name} (default: {s.default!r})  {s.help}")
        return "\n".join(lines)

    def parse(self, argv: list[str], environ: dict | None = None) -> ConfigTree:
        """Build the merged tree; ``tree.positionals`` keeps bare tokens."""
        environ = os.environ if environ is None else environ
        flags, positionals, warnings = _parse_tokens(argv)

        tree = ConfigTree()
        for s in self._specs.values():
            tree.set(s.name, s.default)
        conf = flags.get("conf")
        if conf is not None:
            tree.overlay(load_tree(str(conf)))
        for s in self._specs.values():
            raw = environ.get(s.name)
            if raw is None:
                raw = environ.get(s.name.replace(".", "_"))
            if raw is not None:
                tree.set(s.name, coerce_scalar(str(raw)))
        for name, value in flags.items():
            if name not in self._specs and name != "conf":
                warnings.append(f"unknown flag --{name} (stored)")
            tree.set(name, value)
        tree.positionals = positionals
        tree.warnings.extend(warnings)
        return tree


def _looks_like_flag(token: str) -> bool:
    if not token.startswith("-") or token in ("-", "--"):
        return False
    body = token.lstrip("-")
    return bool(body) and not body[0].isdigit()


def _parse_tokens(argv: list[str]):
    flags: dict[str, Scalar] = {}
    positionals: list[str] = []
    warnings: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if not _looks_like_flag(tok):
            positionals.append(tok)
            i += 1
            continue
        if tok.startswith("--"):
            body = tok[2:]
        else:
            body = tok[1:]
        if not body or body.startswith("=") or body.startswith("-"):
            raise ParseError(f"malformed argument {tok!r}")
        if "=" in body:
            name, _, raw = body.partition("=")
            value = coerce_scalar(raw)
            i += 1
        elif i + 1 < len(argv) and not _looks_like_flag(argv[i + 1]):
            name = body
            value = coerce_scalar(argv[i + 1])
            i += 2
        else:
            # bare flag: boolean switch (e.g. --help)
            name = body
            value = True
            i += 1
        _split_path(name)
        flags[name] = value
    return flags, positionals, warnings


def parse_args(argv: list[str], specs: Iterable[ArgSpec] = (),
               environ: dict | None = None) -> ConfigTree:
    return ArgParser(specs).parse(argv, environ=environ)


def help_text(specs: Iterable[ArgSpec]) -> str:
    return ArgParser(specs).help_text()


def load_tree(path: str) -> ConfigTree:
    suffix = os.path.splitext(path)[1].lower()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{e.lineno}: {e.msg}") from e
    elif suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark else "?"
            raise ParseError(f"{path}:{line}: {e}") from e
    else:
        raise UnsupportedFormatError(
            f"unsupported config format {suffix!r} (supported: .json, .yaml, .yml)")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level node must be a map")
    return ConfigTree(data)


def save_tree(tree: ConfigTree, path: str):
    suffix = os.path.splitext(path)[1].lower()
    data = tree.as_dict()
    if suffix == ".json":
        text = json.dumps(data, indent=2) + "\n"
    elif suffix in (".yaml", ".yml"):
        text = yaml.safe_dump(data, default_flow_style=False, sort_keys=False)
    else:
        raise UnsupportedFormatError(
            f"unsupported config format {suffix!r} (supported: .json, .yaml, .yml)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
