"""Run configuration: ``key = value`` files, overrides and a content hash."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

from .pipeline import DetectorConfig


def _int_list(text: str) -> tuple:
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    parts = [p for p in body.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ValueError(f"expected three integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto", "default") else float(text)


def _word(text: str) -> str:
    return text.strip().lower()


# config key -> (DetectorConfig field, parser)
KEYS = {
    "tgf.td_us": ("td_us", int),
    "tgf.lambda": ("lam", float),
    "tgf.s": ("s", int),
    "refractory.period_us": ("refractory_period_us", int),
    "aed.tau": ("aed_tau", float),
    "aed.table_resolution": ("aed_resolution", int),
    "aed.max_ratio": ("aed_max_ratio", float),
    "harris.sobel_size": ("sobel_size", int),
    "harris.threshold": ("harris_threshold", _optional_float),
    "harris.k": ("k", float),
    "harris.sigma": ("sigma", float),
    "esusan.g": ("g", _int_list),
    "esusan.g_noise": ("g_noise", _int_list),
    "geharris.n_l": ("n_l", int),
    "pipeline.surface": ("surface", _word),
    "pipeline.polarity": ("polarity", _word),
}
FIELD_TO_KEY = {f: k for k, (f, _) in KEYS.items()}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved parameters of one run.

    ``values`` maps config keys to raw strings as given; ``detector`` is
    the :class:`DetectorConfig` they resolve to.
    """

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __post_init__(self):
        self.detector = self._resolve()

    def _resolve(self) -> DetectorConfig:
        kwargs = {}
        for key, raw in self.values.items():
            if key not in KEYS:
                raise ConfigError(f"{self.source}: unknown config key {key!r}")
            name, parse = KEYS[key]
            try:
                kwargs[name] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{self.source}: bad value for {key}: {exc}") from None
        try:
            return DetectorConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                           comment_prefixes=("#", ";"),
                                           inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        if parser.sections() != ["run"]:
            raise ConfigError(f"{source}: sections are not allowed in run configs")
        return cls(dict(parser["run"]), source)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), str(path))

    def with_overrides(self, pairs) -> "RunConfig":
        """Apply ``key=value`` strings (as given to ``--set``)."""
        values = dict(self.values)
        for pair in pairs or ():
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"override {pair!r} is not of the form key=value")
            values[key.strip()] = value.strip()
        source = self.source if not pairs else f"{self.source} with --set overrides"
        return RunConfig(values, source)

    def resolved(self) -> dict:
        """Every key with its effective value, defaults included."""
        out = {}
        for key, (name, _) in KEYS.items():
            value = getattr(self.detector, name)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    def config_hash(self, **extra) -> str:
        """First 16 hex digits of the SHA-256 of the canonical resolved config."""
        payload = dict(self.resolved(), **extra)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = []
        for key, value in self.resolved().items():
            if isinstance(value, list):
                value = "[" + ",".join(str(v) for v in value) + "]"
            lines.append(f"{key} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"
