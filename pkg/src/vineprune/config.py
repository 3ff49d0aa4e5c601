"""Pipeline configuration: flat ``key = value`` files with validated defaults.

Every key, its unit and its default::

    alpha_V, alpha_I, alpha_D   rad    pi/2   location sector angles (alpha_I is accepted, unused)
    alpha_L, alpha_C            -      0.578  lateral / cross slope limits for a vertical cane
    vigor_min, vigor_max        m      0.006, 0.014  accepted basal cane thickness
    adjacency_min               m      0.10   new regions closer than this are removed
    adjacency_metric            -      max    max | min over the two neighbour distances
    spur_nodes_N                -      2      nodes kept on a spur cut
    cut_offset_d                m      0.02   user cut distance along a segment
    correction_max_radius       px     15     search radius when snapping points to organs
    depth_window                px     2      half-width of the median depth window
    root_side                   -      left   end of the cordon the plant grows from
    fx, fy, cx, cy              px     unset  camera intrinsics (cx, cy default to image centre)
    depth_scale                 m/unit 0.001  metres per stored depth unit
    conn_dilation               px     3      dilation disc radius, all organ pairs
    conn_max_iter               -      5      dilation iterations, all organ pairs
    conn_n_slots                -      4      bounding box bands, all organ pairs
    conn_include_top            -      true   retry with the top slot, all organ pairs
    conn_<parent>_<child>_<p>   -      -      per-pair override, e.g. conn_cane_node_n_slots
    connection_order            -      Table of organ pairs, e.g. "main_cordon>arm, arm>cane"
    cut_rules                   -      rule names in priority order (see pruning_points.RULES)

The cane->node pair ships with ``n_slots = 2``: nodes sit inside the cane, so
their overlap is centred on the node box rather than at one end of it.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .organs import CONNECTION_TABLE, OrganClass


@dataclass(frozen=True)
class ConnectionParams:
    dilation: int = 3
    max_iter: int = 5
    n_slots: int = 4
    include_top: bool = True


DEFAULT_RULES = (
    "crowded_new",
    "ventral_new",
    "replacement",
    "vertical_vigorous",
    "weak_or_leaning",
    "no_canes",
    "default_spur",
)

_PAIR_DEFAULTS = {(OrganClass.CANE, OrganClass.NODE): {"n_slots": 2}}


def _default_connections(base=None):
    base = base or ConnectionParams()
    return {
        pair: dataclasses.replace(base, **_PAIR_DEFAULTS.get(pair, {}))
        for pair in CONNECTION_TABLE
    }


@dataclass(frozen=True)
class PipelineConfig:
    alpha_V: float = math.pi / 2
    alpha_I: float = math.pi / 2
    alpha_D: float = math.pi / 2
    alpha_L: float = 0.578
    alpha_C: float = 0.578
    vigor_min: float = 0.006
    vigor_max: float = 0.014
    adjacency_min: float = 0.10
    adjacency_metric: str = "max"
    spur_nodes_N: int = 2
    cut_offset_d: float = 0.02
    correction_max_radius: int = 15
    depth_window: int = 2
    root_side: str = "left"
    fx: float | None = None
    fy: float | None = None
    cx: float | None = None
    cy: float | None = None
    depth_scale: float = 0.001
    connections: dict = field(default_factory=_default_connections)
    connection_order: tuple = CONNECTION_TABLE
    cut_rules: tuple = DEFAULT_RULES

    def __post_init__(self):
        for key in ("alpha_V", "alpha_I", "alpha_D", "alpha_L", "alpha_C"):
            v = getattr(self, key)
            if not (0.0 < v <= math.pi):
                raise ConfigError(key, f"must lie in (0, pi], got {v}")
        if not (0.0 <= self.vigor_min < self.vigor_max):
            raise ConfigError("vigor_min", "need 0 <= vigor_min < vigor_max")
        if self.adjacency_min < 0:
            raise ConfigError("adjacency_min", "must be >= 0")
        if self.adjacency_metric not in ("max", "min"):
            raise ConfigError("adjacency_metric", "must be 'max' or 'min'")
        if self.spur_nodes_N < 1:
            raise ConfigError("spur_nodes_N", "must be >= 1")
        if self.cut_offset_d < 0:
            raise ConfigError("cut_offset_d", "must be >= 0")
        if self.correction_max_radius < 0:
            raise ConfigError("correction_max_radius", "must be >= 0")
        if self.depth_window < 0:
            raise ConfigError("depth_window", "must be >= 0")
        if self.root_side not in ("left", "right"):
            raise ConfigError("root_side", "must be 'left' or 'right'")
        for key in ("fx", "fy"):
            v = getattr(self, key)
            if v is not None and v <= 0:
                raise ConfigError(key, "focal length must be > 0")
        if self.depth_scale <= 0:
            raise ConfigError("depth_scale", "must be > 0")
        for pair, p in self.connections.items():
            name = f"conn_{pair[0].value}_{pair[1].value}"
            if p.dilation < 1:
                raise ConfigError(f"{name}_dilation", "must be >= 1")
            if p.max_iter < 0:
                raise ConfigError(f"{name}_max_iter", "must be >= 0")
            if p.n_slots < 2:
                raise ConfigError(f"{name}_n_slots", "must be >= 2")
        for pair in self.connection_order:
            if pair not in CONNECTION_TABLE:
                raise ConfigError("connection_order", f"{pair[0].value}>{pair[1].value} is not a legal pair")
        from .pruning_points import RULES

        for name in self.cut_rules:
            if name not in RULES:
                raise ConfigError("cut_rules", f"unknown rule {name!r}")

    def params_for(self, parent, child):
        return self.connections[(parent, child)]

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["connections"] = {
            f"{a.value}>{b.value}": dataclasses.asdict(p) for (a, b), p in self.connections.items()
        }
        d["connection_order"] = [f"{a.value}>{b.value}" for a, b in self.connection_order]
        d["cut_rules"] = list(self.cut_rules)
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FLOAT_KEYS = {
    "alpha_V", "alpha_I", "alpha_D", "alpha_L", "alpha_C", "vigor_min", "vigor_max",
    "adjacency_min", "cut_offset_d", "fx", "fy", "cx", "cy", "depth_scale",
}
_INT_KEYS = {"spur_nodes_N", "correction_max_radius", "depth_window"}
_STR_KEYS = {"adjacency_metric", "root_side"}
_CONN_FIELDS = {"dilation": int, "max_iter": int, "n_slots": int, "include_top": "bool"}
_ORGAN_NAMES = "|".join(o.value for o in OrganClass)
_PAIR_KEY = re.compile(rf"^conn_({_ORGAN_NAMES})_({_ORGAN_NAMES})_(dilation|max_iter|n_slots|include_top)$")
_GLOBAL_KEY = re.compile(r"^conn_(dilation|max_iter|n_slots|include_top)$")


def _to_bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _convert(key, text, kind):
    if kind == "bool":
        return _to_bool(key, text)
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {text!r}") from None


def _parse_pair(key, text):
    a, sep, b = text.partition(">")
    try:
        return OrganClass(a.strip()), OrganClass(b.strip())
    except ValueError:
        raise ConfigError(key, f"bad organ pair {text!r}") from None


def parse_config(text):
    """Build a :class:`PipelineConfig` from ``key = value`` text."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None

    kwargs = {}
    base = {}
    pair_over = {}
    for key, raw in parser["config"].items():
        if key in _FLOAT_KEYS:
            kwargs[key] = _convert(key, raw, float)
        elif key in _INT_KEYS:
            kwargs[key] = _convert(key, raw, int)
        elif key in _STR_KEYS:
            kwargs[key] = raw.strip().lower()
        elif key == "connection_order":
            kwargs[key] = tuple(_parse_pair(key, t) for t in raw.split(",") if t.strip())
        elif key == "cut_rules":
            kwargs[key] = tuple(t.strip() for t in raw.split(",") if t.strip())
        elif m := _GLOBAL_KEY.match(key):
            base[m.group(1)] = _convert(key, raw, _CONN_FIELDS[m.group(1)])
        elif m := _PAIR_KEY.match(key):
            pair = (OrganClass(m.group(1)), OrganClass(m.group(2)))
            if pair not in CONNECTION_TABLE:
                raise ConfigError(key, "not a legal parent>child pair")
            pair_over.setdefault(pair, {})[m.group(3)] = _convert(key, raw, _CONN_FIELDS[m.group(3)])
        else:
            raise ConfigError(key, "unknown key")

    conns = _default_connections(ConnectionParams(**base))
    for pair, over in pair_over.items():
        conns[pair] = dataclasses.replace(conns[pair], **over)
    kwargs["connections"] = conns
    return PipelineConfig(**kwargs)


def load_config(path):
    """Read a config file; an empty or missing-key file yields the defaults."""
    return parse_config(Path(path).read_text())
