"""Experiment configuration files.

An INI-style file with sections ``[experiment]``, ``[graph]``,
``[conditions]``, ``[model]`` and ``[numerics]``. Lists are whitespace
separated. Every value error names the line it came from.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .distributions import make_distribution
from .errors import InputError

KINDS = ("spectrum", "wegner", "ids", "ssf-decoupling", "ssf-volume", "weak-wegner", "initial-scale", "bc-sweep")
SECTIONS = ("experiment", "graph", "conditions", "model", "numerics")
DISTRIBUTION_PARAMS = {"lo", "hi", "p", "c", "tau", "x0", "alpha"}


_MISSING = object()


class ConfigError(InputError):
    pass


@dataclass
class ExperimentConfig:
    parser: configparser.ConfigParser
    lines: dict = field(default_factory=dict)
    text: str = ""

    def _where(self, section: str, key: str) -> str:
        n = self.lines.get((section, key))
        return f"line {n}: " if n else ""

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=_MISSING):
        if not self.has(section, key):
            if default is _MISSING:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        return self.parser.get(section, key)

    def get(self, section: str, key: str, conv=str, default=_MISSING):
        if not self.has(section, key):
            if default is _MISSING:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        value = self.parser.get(section, key)
        try:
            return conv(value)
        except (ValueError, TypeError, InputError) as exc:
            raise ConfigError(f"{self._where(section, key)}[{section}] {key} = {value!r}: {exc}") from None

    def floats(self, section: str, key: str, default=_MISSING) -> tuple[float, ...]:
        return self.get(section, key, lambda s: tuple(float(x) for x in s.split()), default)

    def ints(self, section: str, key: str, default=_MISSING) -> tuple[int, ...]:
        return self.get(section, key, lambda s: tuple(int(x) for x in s.split()), default)

    def boolean(self, section: str, key: str, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"{self._where(section, key)}[{section}] {key}: expected a boolean") from None

    @property
    def kind(self) -> str:
        k = self.get("experiment", "kind")
        if k not in KINDS:
            raise ConfigError(f"{self._where('experiment', 'kind')}unknown experiment kind {k!r}; expected one of {KINDS}")
        return k

    def distribution(self):
        if not self.parser.has_section("model"):
            raise ConfigError("missing [model] section")
        kind = self.get("model", "distribution")
        params = {k: v for k, v in self.parser.items("model") if k in DISTRIBUTION_PARAMS}
        try:
            return make_distribution(kind, **{k: float(v) for k, v in params.items()})
        except (InputError, ValueError) as exc:
            raise ConfigError(f"{self._where('model', 'distribution')}{exc}") from None

    def set(self, assignment: str):
        """Apply a ``section.key=value`` override."""
        m = re.fullmatch(r"\s*([A-Za-z_-]+)\.([A-Za-z0-9_]+)\s*=(.*)", assignment)
        if not m:
            raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
        section, key, value = m.group(1), m.group(2).lower(), m.group(3).strip()
        if section not in SECTIONS:
            raise ConfigError(f"override names unknown section {section!r}")
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser.set(section, key, value)
        self.lines.pop((section, key), None)


def _line_numbers(text: str) -> dict:
    out, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section:
            out[(section, m.group(1).strip().lower())] = n
    return out


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        lines = ", ".join(f"line {n}" for n, _ in exc.errors)
        raise ConfigError(f"{lines}: cannot parse") from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    for s in parser.sections():
        if s not in SECTIONS:
            raise ConfigError(f"unknown section [{s}]")
    cfg = ExperimentConfig(parser, _line_numbers(text), text)
    cfg.kind
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
