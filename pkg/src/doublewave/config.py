"""Flat sectioned key=value configs with line-accurate error reporting.

Format, by example:

    # comment
    [scenario]
    name = free_gaussian
    seed = 7

    [grid]
    extent = -12, 12
    points = 601

Sections group keys; values are bare strings until a typed accessor parses
them. Parse errors and bad values always carry file and line number.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(Exception):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        self.message = message
        where = ""
        if path is not None:
            where = path if line is None else "%s:%d" % (path, line)
            where += ": "
        super().__init__(where + message)


@dataclass
class Config:
    path: str = "<memory>"
    sections: dict = field(default_factory=dict)   # section -> {key: raw string}
    _lines: dict = field(default_factory=dict)     # (section, key) -> line number

    def has(self, section: str, key: str) -> bool:
        return section in self.sections and key in self.sections[section]

    def section_names(self) -> list[str]:
        return list(self.sections.keys())

    def keys(self, section: str) -> list[str]:
        return list(self.sections.get(section, {}).keys())

    def _raw(self, section: str, key: str, default):
        if not self.has(section, key):
            if default is not _REQUIRED:
                return None
            raise ConfigError("missing required key '%s' in section [%s]" % (key, section),
                              self.path)
        return self.sections[section][key]

    def _where(self, section: str, key: str) -> int | None:
        return self._lines.get((section, key))

    def get_str(self, section: str, key: str, default=None) -> str | None:
        raw = self._raw(section, key, default)
        return default if raw is None else raw

    def get_int(self, section: str, key: str, default=None) -> int | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError("key '%s' expects an integer, got %r" % (key, raw),
                              self.path, self._where(section, key)) from None

    def get_float(self, section: str, key: str, default=None) -> float | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError("key '%s' expects a number, got %r" % (key, raw),
                              self.path, self._where(section, key)) from None

    def get_bool(self, section: str, key: str, default=None) -> bool | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError("key '%s' expects true/false, got %r" % (key, raw),
                          self.path, self._where(section, key))

    def get_floats(self, section: str, key: str, default=None) -> list[float] | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            return [float(p.strip()) for p in raw.split(",") if p.strip() != ""]
        except ValueError:
            raise ConfigError("key '%s' expects comma-separated numbers, got %r"
                              % (key, raw), self.path, self._where(section, key)) from None

    def get_strs(self, section: str, key: str, default=None) -> list[str] | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        return [p.strip() for p in raw.split(",") if p.strip() != ""]

    def fail(self, section: str, key: str, message: str):
        """Raise a ConfigError pointing at a key's definition line."""
        raise ConfigError(message, self.path, self._where(section, key))


class _Required:
    pass


_REQUIRED = _Required()
REQUIRED = _REQUIRED


def parse_string(text: str, path: str = "<memory>") -> Config:
    cfg = Config(path=path)
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError("empty section name", path, lineno)
            cfg.sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value' or '[section]', got %r" % line,
                              path, lineno)
        if section is None:
            raise ConfigError("key outside any [section]", path, lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", path, lineno)
        if key in cfg.sections[section]:
            raise ConfigError("duplicate key '%s' in section [%s] (first defined at line %d)"
                              % (key, section, cfg._lines[(section, key)]), path, lineno)
        cfg.sections[section][key] = value
        cfg._lines[(section, key)] = lineno
    return cfg


def parse_file(path: str) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config: %s" % exc, path) from None
    return parse_string(text, path)


def serialize(cfg: Config) -> str:
    """Write the config back out; parse(serialize(parse(x))) == parse(x)."""
    parts = []
    for section, kv in cfg.sections.items():
        parts.append("[%s]" % section)
        for key, value in kv.items():
            parts.append("%s = %s" % (key, value))
        parts.append("")
    return "\n".join(parts)
