"""Experiment configuration: an INI file with map/weight/assumptions/run sections.

Example::

    [map]
    kind = doubling

    [weight]
    kind = inverse-derivative
    alpha = 0.5

    [assumptions]
    p = 4.0
    samples_per_branch = 64
    refinement_depth = 20

    [run]
    beta = 0.5
    cells = 16,64,256
    nmax = 16
    seed = 1

Affine maps list one ``lo hi slope intercept`` branch per line under
``map.branches``; tabulated weights list their samples under
``weight.samples``.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .maps import BranchedMap, affine_map, cascade_map, doubling_map, make_weight
from .transfer import QuadratureSettings, TransferSystem

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "build_system"]


class ConfigError(ValueError):
    """Configuration problem, addressed by section.key (and line when known)."""

    def __init__(self, field_path, message):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


_MAP_KINDS = ("doubling", "cascade", "affine")
_WEIGHT_KINDS = ("constant", "inverse-derivative", "power", "weierstrass", "tabulated")


@dataclass(eq=False)
class ExperimentConfig:
    map: dict
    weight: dict
    assumptions: dict
    run: dict
    text: str = ""

    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]


def _get_float(section, sec_name, key, default=None):
    raw = section.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{sec_name}.{key}", f"not a number: {raw!r}") from None


def _get_int(section, sec_name, key, default=None):
    raw = section.get(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{sec_name}.{key}", f"not an integer: {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ConfigError("<file>", f"INI parse error: {exc}") from None
    if "map" not in parser:
        raise ConfigError("map", "missing section")
    if "weight" not in parser:
        raise ConfigError("weight", "missing section")

    msec = parser["map"]
    kind = msec.get("kind", "").strip()
    if kind not in _MAP_KINDS:
        raise ConfigError("map.kind", f"expected one of {_MAP_KINDS}, got {kind!r}")
    map_cfg = {"kind": kind}
    if kind == "cascade":
        map_cfg["j_max"] = _get_int(msec, "map", "j_max", 40)
    if kind == "affine":
        branches = []
        raw = msec.get("branches", "")
        for i, line in enumerate(s for s in raw.splitlines() if s.strip()):
            parts = line.split()
            if len(parts) != 4:
                raise ConfigError(f"map.branches[{i}]",
                                  f"expected 'lo hi slope intercept', got {line.strip()!r}")
            try:
                lo, hi, slope, intercept = map(float, parts)
            except ValueError:
                raise ConfigError(f"map.branches[{i}]", f"non-numeric entry in {line.strip()!r}") from None
            if not lo < hi:
                raise ConfigError(f"map.branches[{i}]", f"interval degenerate: lo={lo} >= hi={hi}")
            branches.append((lo, hi, slope, intercept))
        if not branches:
            raise ConfigError("map.branches", "affine map needs at least one branch")
        map_cfg["branches"] = branches

    wsec = parser["weight"]
    wkind = wsec.get("kind", "").strip().replace("_", "-")
    if wkind not in _WEIGHT_KINDS:
        raise ConfigError("weight.kind", f"expected one of {_WEIGHT_KINDS}, got {wkind!r}")
    weight_cfg = {"kind": wkind}
    weight_cfg["alpha"] = _get_float(wsec, "weight", "alpha")
    for key in ("value", "delta", "scale", "tail_sup_sum", "tail_mass_bound"):
        val = _get_float(wsec, "weight", key)
        if val is not None:
            weight_cfg[key] = val
    terms = _get_int(wsec, "weight", "terms")
    if terms is not None:
        weight_cfg["terms"] = terms
    if wkind == "tabulated":
        raw = wsec.get("samples", "")
        try:
            samples = [float(v) for v in raw.split()]
        except ValueError:
            raise ConfigError("weight.samples", "non-numeric sample") from None
        if not samples:
            raise ConfigError("weight.samples", "tabulated weight needs samples")
        weight_cfg["samples"] = samples

    asec = parser["assumptions"] if "assumptions" in parser else {}
    assumptions = {
        "p": _get_float(asec, "assumptions", "p", 4.0),
        "samples_per_branch": _get_int(asec, "assumptions", "samples_per_branch", 64),
        "refinement_depth": _get_int(asec, "assumptions", "refinement_depth", 20),
    }

    rsec = parser["run"] if "run" in parser else {}
    run = {
        "beta": _get_float(rsec, "run", "beta"),
        "nmax": _get_int(rsec, "run", "nmax", 16),
        "kdepth": _get_int(rsec, "run", "kdepth", 12),
        "ensemble": _get_int(rsec, "run", "ensemble", 32),
        "seed": _get_int(rsec, "run", "seed"),
        "threads": _get_int(rsec, "run", "threads", 1),
        "grid": _get_int(rsec, "run", "grid", 4096),
        "subdivisions": _get_int(rsec, "run", "subdivisions", 8),
        "check_tolerance": _get_float(rsec, "run", "check_tolerance"),
        "format": rsec.get("format", "csv").strip(),
        "output": rsec.get("output", "").strip(),
        "density": rsec.get("density", "constant").strip(),
    }
    cells_raw = rsec.get("cells", "16,64,256")
    try:
        run["cells"] = [int(c) for c in cells_raw.replace(" ", "").split(",") if c]
    except ValueError:
        raise ConfigError("run.cells", f"not a comma list of integers: {cells_raw!r}") from None
    eps_raw = rsec.get("eps_range", "4:10").strip()
    try:
        lo, hi = (int(v) for v in eps_raw.split(":"))
        run["eps_list"] = [2.0**-m for m in range(lo, hi + 1)]
    except ValueError:
        raise ConfigError("run.eps_range", f"expected 'lo:hi' dyadic exponents, got {eps_raw!r}") from None
    if run["format"] not in ("csv", "json"):
        raise ConfigError("run.format", f"expected csv or json, got {run['format']!r}")

    return ExperimentConfig(map=map_cfg, weight=weight_cfg, assumptions=assumptions,
                            run=run, text=text)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path!r}: {exc}") from None
    return parse_config(text)


def build_map(cfg: ExperimentConfig) -> BranchedMap:
    kind = cfg.map["kind"]
    if kind == "doubling":
        return doubling_map()
    if kind == "cascade":
        return cascade_map(cfg.map["j_max"])
    return affine_map(cfg.map["branches"])


def build_system(cfg: ExperimentConfig) -> TransferSystem:
    bmap = build_map(cfg)
    wargs = {k: v for k, v in cfg.weight.items() if k not in ("kind", "alpha")}
    try:
        weight = make_weight(cfg.weight["kind"], bmap, alpha=cfg.weight.get("alpha"),
                             p=cfg.assumptions["p"], **wargs)
    except ValueError as exc:
        raise ConfigError("weight", str(exc)) from None
    quad = QuadratureSettings(subdivisions=cfg.run["subdivisions"],
                              refine_depth=cfg.assumptions["refinement_depth"],
                              check_tolerance=cfg.run["check_tolerance"])
    from .maps import check_hypotheses

    hyp = check_hypotheses(bmap, weight,
                           samples_per_branch=cfg.assumptions["samples_per_branch"],
                           refinement_depth=cfg.assumptions["refinement_depth"])
    return TransferSystem(bmap, weight, quad=quad, hypotheses=hyp)
