"""Run configuration: YAML file merged over ``data/defaults.yaml``, strictly
validated. Errors name the dotted key and, when known, the source line."""
from __future__ import annotations

import copy
import hashlib
import importlib.resources
import json
import math
import re
from pathlib import Path

import yaml

from .errors import ConfigError

NUM = (int, float)
_ENUMS = {
    "profile": ("full", "reduced"),
    "link.cancellers[]": ("linear_freq", "linear_time", "reconstruction", "aux_chain", "precal"),
    "system.hd_band_rule": ("dl_full_band", "split_band"),
}
# leaf type table; tuples list acceptable types, None allows null
_TYPES = {
    "schema_version": (int,),
    "profile": (str,),
    "seed": (int,),
    "physics.speed_of_light_mps": NUM,
    "link.cancellers": (list,),
    "link.coherence": (list,),
    "link.n_frames": (int,),
    "link.n_seeds": (int,),
    "link.tx_power_dbm": NUM,
    "link.noise_dbm": NUM,
    "link.analog_sic_db": NUM,
    "link.aux_noise_dbm": NUM,
    "link.pa_file": (str, None),
    "link.channel.base_taps_full_rate": (int,),
    "link.channel.delay_spread_mult": (int,),
    "link.channel.decay_db_per_tap_full_rate": NUM,
    "link.reference.l0_backoff_db": NUM,
    "link.reference.h0_level_db": NUM,
    "link.orders.recon_k": (int,),
    "link.orders.recon_l": (int, None),
    "link.orders.linear_l": (int, None),
    "link.orders.pa_fit_k": (int,),
    "link.orders.pa_fit_l": (int,),
    "link.orders.precal_k": (int,),
    "link.orders.precal_l": (int,),
    "system.topology": (str, None),
    "system.n_drops": (int,),
    "system.cancellation_db": (dict,),
    "system.from_link_sim": (bool,),
    "system.link_coherence": (dict, str, *NUM),
    "system.tx_power_bs_dbm": NUM,
    "system.tx_power_ms_dbm": NUM,
    "system.noise_dbm": NUM,
    "system.bandwidth_hz": NUM,
    "system.hd_band_rule": (str,),
    "system.sinr_cap_db": (*NUM, None),
    "pa_fit.k": (int,),
    "pa_fit.l": (int,),
}
_POSITIVE = {
    "physics.speed_of_light_mps", "link.n_frames", "link.n_seeds",
    "link.channel.base_taps_full_rate", "link.channel.delay_spread_mult",
    "link.orders.recon_k", "link.orders.recon_l", "link.orders.linear_l",
    "link.orders.pa_fit_k", "link.orders.pa_fit_l", "link.orders.precal_k",
    "link.orders.precal_l", "system.bandwidth_hz", "pa_fit.k", "pa_fit.l",
}
_NON_NEGATIVE = {"link.analog_sic_db", "system.n_drops", "seed"}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e9`` / ``2.52e9`` as floats (YAML 1.2)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _load_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def defaults() -> dict:
    text = (importlib.resources.files("fdsic") / "data" / "defaults.yaml").read_text()
    return _load_yaml(text)


def _line_marks(text: str) -> dict[str, int]:
    """Dotted key -> 1-based line for every mapping key in the document."""
    marks: dict[str, int] = {}
    try:
        root = yaml.compose(text, Loader=_Loader)
    except yaml.YAMLError:
        return marks

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}{k.value}"
                marks[key] = k.start_mark.line + 1
                walk(v, key + ".")

    if root is not None:
        walk(root, "")
    return marks


def _type_ok(value, allowed) -> bool:
    for t in allowed:
        if t is None and value is None:
            return True
        if t is not None and isinstance(value, t) and not (t in NUM and isinstance(value, bool)):
            return True
    return False


def _merge(base: dict, over: dict, prefix: str, marks) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        dotted = f"{prefix}{key}"
        if not isinstance(key, str) or key not in base:
            raise ConfigError(_where("unknown key", dotted, marks), dotted)
        if isinstance(base[key], dict) and dotted not in _TYPES:
            if not isinstance(val, dict):
                raise ConfigError(_where("expected a mapping", dotted, marks), dotted)
            out[key] = _merge(base[key], val, dotted + ".", marks)
        else:
            out[key] = val
    return out


_LAST_PART = re.compile(r"(\[\d+\]|\.[^.\[]+)$")


def _where(msg, key, marks) -> str:
    # list entries and nested fields fall back to the nearest marked parent
    line = marks.get(key)
    while line is None and _LAST_PART.search(key):
        key = _LAST_PART.sub("", key)
        line = marks.get(key)
    return f"{msg} (line {line})" if line else msg


def _check_coherence(entry, key, marks):
    if entry == "static":
        return
    if _type_ok(entry, NUM):
        if not entry > 0:
            raise ConfigError(_where("coherence time must be > 0 ms", key, marks), key)
        return
    if isinstance(entry, dict):
        if set(entry) != {"speed_kmh", "carrier_hz"}:
            raise ConfigError(
                _where("needs exactly speed_kmh and carrier_hz", key, marks), key
            )
        for sub in ("speed_kmh", "carrier_hz"):
            if not _type_ok(entry[sub], NUM) or entry[sub] < 0:
                raise ConfigError(_where("must be a non-negative number", key, marks),
                                  f"{key}.{sub}")
        return
    raise ConfigError(
        _where("expected 'static', a time in ms, or {speed_kmh, carrier_hz}", key, marks), key
    )


def validate(cfg: dict, marks=None) -> dict:
    marks = marks or {}
    for key, allowed in _TYPES.items():
        node = cfg
        for part in key.split("."):
            node = node[part]
        if not _type_ok(node, allowed):
            names = ", ".join("null" if t is None else t.__name__ for t in allowed)
            raise ConfigError(_where(f"expected {names}, got {node!r}", key, marks), key)
        if key in _POSITIVE and node is not None and not node > 0:
            raise ConfigError(_where("must be > 0", key, marks), key)
        if key in _NON_NEGATIVE and not node >= 0:
            raise ConfigError(_where("must be >= 0", key, marks), key)
        if key in _ENUMS and node not in _ENUMS[key]:
            raise ConfigError(
                _where(f"must be one of {', '.join(_ENUMS[key])}", key, marks), key
            )
    if cfg["schema_version"] != 1:
        raise ConfigError("unsupported schema version", "schema_version")
    for i, c in enumerate(cfg["link"]["cancellers"]):
        if c not in _ENUMS["link.cancellers[]"]:
            raise ConfigError(_where(f"unknown canceller {c!r}", "link.cancellers", marks),
                              f"link.cancellers[{i}]")
    if not cfg["link"]["cancellers"]:
        raise ConfigError("at least one canceller is required", "link.cancellers")
    if not cfg["link"]["coherence"]:
        raise ConfigError("at least one coherence setting is required", "link.coherence")
    for i, e in enumerate(cfg["link"]["coherence"]):
        _check_coherence(e, f"link.coherence[{i}]", marks)
    _check_coherence(cfg["system"]["link_coherence"], "system.link_coherence", marks)
    for name, val in cfg["system"]["cancellation_db"].items():
        key = f"system.cancellation_db.{name}"
        if name not in _ENUMS["link.cancellers[]"] or name == "linear_time":
            raise ConfigError(_where("unknown canceller", key, marks), key)
        if not _type_ok(val, NUM) or not val >= 0:
            raise ConfigError(_where("must be a number >= 0", key, marks), key)
    if "precal" in cfg["link"]["cancellers"] and cfg["link"]["n_frames"] < 2:
        raise ConfigError(
            _where("pre-calibration needs >= 2 frames", "link.n_frames", marks), "link.n_frames"
        )
    return cfg


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then ``overrides``.

    Relative file paths inside the config resolve against the config's
    directory.
    """
    cfg = defaults()
    marks: dict[str, int] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}", "config") from None
        try:
            user = _load_yaml(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" (line {mark.line + 1})" if mark else ""
            raise ConfigError(f"YAML syntax error{where}: {getattr(exc, 'problem', exc)}",
                              "config") from None
        marks = _line_marks(text)
        if user is None:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError("top level must be a mapping", "config")
        cfg = _merge(cfg, user, "", marks)
        for key in (("link", "pa_file"), ("system", "topology")):
            val = cfg[key[0]][key[1]]
            if isinstance(val, str) and not Path(val).is_absolute():
                cfg[key[0]][key[1]] = str((path.parent / val).resolve())
    if overrides:
        cfg = _merge(cfg, overrides, "", {})
    return validate(cfg, marks)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def coherence_seconds(entry, speed_of_light_mps: float) -> float:
    """Resolve one coherence entry to seconds (``inf`` for static)."""
    from .impairments import coherence_time

    if entry == "static":
        return math.inf
    if isinstance(entry, dict):
        return coherence_time(entry["speed_kmh"] / 3.6, entry["carrier_hz"], speed_of_light_mps)
    return float(entry) * 1e-3
