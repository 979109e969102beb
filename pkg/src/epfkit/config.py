"""Run configuration files.

Grammar: INI sections with ``key = value`` lines (``#`` or ``;`` comments).

``[channel]``
    ``re_tau``, ``n_cells``, ``stretching``, ``pressure_gradient``,
    ``max_iters``, ``conv_tol``, ``relax_u``, ``relax_turb``, ``workers``
``[model]``
    any SST coefficient (``sigma_k1``, ``beta_star``, ``a1``, ...)
``[perturbation]``
    ``target``, ``delta_b``, ``ev_mode``, ``legacy_f``; a single perturbed run
``[campaign]``
    ``consistent_delta_b``, ``legacy_delta_b``, ``legacy_f``

Every section is optional; missing keys take their defaults.  Unknown sections
or keys are rejected so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields

from .channel import ChannelConfig, SSTConstants
from .perturbation import PerturbationSpec

__all__ = ["ConfigError", "CampaignSettings", "RunConfig", "parse_config", "load_config", "canonicalize"]


class ConfigError(ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


_CHANNEL_KEYS = {
    "re_tau": float,
    "n_cells": int,
    "stretching": float,
    "pressure_gradient": float,
    "max_iters": int,
    "conv_tol": float,
    "relax_u": float,
    "relax_turb": float,
}
_MODEL_KEYS = {f.name: float for f in fields(SSTConstants)}
_PERTURBATION_KEYS = {"target": str, "delta_b": float, "ev_mode": str, "legacy_f": float}
_CAMPAIGN_KEYS = {"consistent_delta_b": float, "legacy_delta_b": float, "legacy_f": float}
_SECTIONS = {
    "channel": {**_CHANNEL_KEYS, "workers": int},
    "model": _MODEL_KEYS,
    "perturbation": _PERTURBATION_KEYS,
    "campaign": _CAMPAIGN_KEYS,
}


@dataclass(frozen=True)
class CampaignSettings:
    consistent_delta_b: float = 0.5
    legacy_delta_b: float = 1.0
    legacy_f: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelConfig
    campaign: CampaignSettings = field(default_factory=CampaignSettings)
    workers: int = 1

    @property
    def digest(self) -> str:
        return hashlib.sha256(canonicalize(self).encode("utf-8")).hexdigest()


def _convert(section, key, raw, kind):
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}", key) from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", section)
        allowed = _SECTIONS[section]
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"[{section}] unknown key {key!r}", key)
            values[section][key] = _convert(section, key, raw, allowed[key])

    chan = dict(values.get("channel", {}))
    workers = chan.pop("workers", 1)
    if workers < 1:
        raise ConfigError("[channel] workers must be at least 1", "workers")
    try:
        model = SSTConstants(**values.get("model", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[model] {exc}") from None
    spec = None
    if "perturbation" in values:
        p = values["perturbation"]
        for key in ("target", "delta_b"):
            if key not in p:
                raise ConfigError(f"[perturbation] missing key {key!r}", key)
        try:
            spec = PerturbationSpec(p["target"], p["delta_b"], p.get("ev_mode", "production_max"), p.get("legacy_f"))
        except ValueError as exc:
            raise ConfigError(f"[perturbation] {exc}", _guess_key(str(exc), _PERTURBATION_KEYS)) from None
    try:
        channel = ChannelConfig(model=model, **chan).with_perturbation(spec)
    except ValueError as exc:
        raise ConfigError(f"[channel] {exc}", _guess_key(str(exc), _CHANNEL_KEYS)) from None
    try:
        campaign = _campaign(values.get("campaign", {}))
    except ValueError as exc:
        raise ConfigError(f"[campaign] {exc}", _guess_key(str(exc), _CAMPAIGN_KEYS)) from None
    return RunConfig(channel, campaign, workers)


def _campaign(v):
    c = CampaignSettings(**v)
    for name in ("consistent_delta_b", "legacy_delta_b", "legacy_f"):
        value = getattr(c, name)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return c


def _guess_key(message, keys):
    for key in keys:
        if key in message:
            return key
    return None


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonicalize(cfg: RunConfig) -> str:
    """Stable text form; parsing it gives back an equal configuration."""
    ch = cfg.channel
    lines = ["[channel]"]
    for key in _CHANNEL_KEYS:
        lines.append(f"{key} = {_fmt(getattr(ch, key))}")
    lines.append(f"workers = {cfg.workers}")
    lines += ["", "[model]"]
    for f in fields(SSTConstants):
        lines.append(f"{f.name} = {_fmt(getattr(ch.model, f.name))}")
    if ch.perturbation is not None:
        p = ch.perturbation
        lines += ["", "[perturbation]", f"target = {p.target}", f"delta_b = {_fmt(float(p.delta_b))}", f"ev_mode = {p.ev_mode}"]
        if p.legacy_f is not None:
            lines.append(f"legacy_f = {_fmt(float(p.legacy_f))}")
    lines += ["", "[campaign]"]
    for key in _CAMPAIGN_KEYS:
        lines.append(f"{key} = {_fmt(float(getattr(cfg.campaign, key)))}")
    return "\n".join(lines) + "\n"
