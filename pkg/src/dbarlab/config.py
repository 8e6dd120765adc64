"""Scenario configuration: YAML files, dotted overrides and validation.

Every scenario reads the same schema; keys a scenario does not use are
ignored.  ``validate`` collects every problem before anything runs.
"""

import copy
import re
from dataclasses import dataclass

import yaml

from .errors import ConfigError

SCENARIOS = (
    "bm-reproduce", "homotopy-residual", "solve", "h0-reproduce", "kernel-identity",
    "lemma-sweep", "norm-report", "blowup-fit", "top-degree",
    # acceptance helpers for the chart and support-function checks
    "jacobian-recursion", "support-bounds",
)

LEMMA_CASES = ("intestl-i", "intestl-ii", "h0ele-i", "h0ele-ii", "h0ele-iii")
FAMILIES = ("exact_polynomial", "exact_exponential", "nonclosed", "top_degree")

DEFAULTS = {
    "scenario": None,
    "seed": 0,
    "threads": 1,
    "domain": {"kind": "ball", "n": 2, "weights": None, "delta": 0.25},
    "q": 1,
    "levels": [1, 2],
    "cutoff": None,  # {"r0": ..., "r1": ...}; default delta/4, 3 delta/4
    "family": "exact_polynomial",
    "forms": None,  # indices into the family (default: all)
    "functions": None,  # sympy expressions in z1.., zb1..
    "points": None,  # explicit list of [re, im, re, im, ...] or {"count", "radius"}
    "norm": {"k": 1, "p": 4.0, "mu": [0.4]},
    "lemma": {"cases": [], "delta_range": [1e-4, 1e-1], "per_decade": 7, "n": 2},
    "rays": {"count": 3, "radii": [1e-1, 3.16e-3], "samples": 7, "order": 2},
    "pairs": 100,
    "h": 1e-4,
    "h_fd": 1e-5,
    "thresholds": {},
    "output": {"csv": "records.csv", "json": "summary.json", "plot": "plot.dat"},
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"""),
    list("-+0123456789"),
)


def _load(text):
    return yaml.load(text, Loader=_Loader)


@dataclass
class ScenarioConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    @property
    def scenario(self):
        return self.data["scenario"]


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text):
    """``a.b.c=value`` with ``value`` parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = _load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"override {text!r}: {e}") from e
    nested = value
    for part in reversed(key.split(".")):
        nested = {part: nested}
    return nested


def load_config(path=None, overrides=(), data=None):
    if data is None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = _load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    merged = _merge(DEFAULTS, data)
    for o in overrides:
        merged = _merge(merged, parse_override(o) if isinstance(o, str) else o)
    cfg = ScenarioConfig(merged)
    problems = validate(cfg)
    if problems:
        raise ConfigError("invalid config:\n  - " + "\n  - ".join(problems))
    return cfg


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg):
    """Return the list of all problems (empty when valid)."""
    d = cfg.data
    p = []
    known = set(DEFAULTS)
    for k in d:
        if k not in known:
            p.append(f"unknown key {k!r}")
    if d["scenario"] not in SCENARIOS:
        p.append(f"scenario must be one of {', '.join(SCENARIOS)}; got {d['scenario']!r}")
    if not _is_int(d["seed"]) or d["seed"] < 0:
        p.append("seed must be a nonnegative integer")
    if not _is_int(d["threads"]) or d["threads"] < 1:
        p.append("threads must be a positive integer")
    dom = d["domain"]
    if not isinstance(dom, dict):
        p.append("domain must be a mapping")
    else:
        if dom.get("kind") not in ("ball", "ellipsoid"):
            p.append("domain.kind must be ball or ellipsoid")
        n = dom.get("n")
        if not _is_int(n) or n < 2:
            p.append("domain.n must be an integer >= 2")
        if dom.get("kind") == "ellipsoid":
            w = dom.get("weights")
            if not isinstance(w, list) or not all(_is_num(x) and x > 0 for x in w):
                p.append("domain.weights must be a list of positive numbers for an ellipsoid")
            elif _is_int(n) and len(w) != n:
                p.append("domain.weights must have n entries")
        if not _is_num(dom.get("delta")) or dom["delta"] <= 0:
            p.append("domain.delta must be positive")
    if not _is_int(d["q"]):
        p.append("q must be an integer")
    elif isinstance(dom, dict) and _is_int(dom.get("n")) and not 0 <= d["q"] <= dom["n"]:
        p.append("q must lie in 0..n")
    lv = d["levels"]
    if not isinstance(lv, list) or not lv or not all(_is_int(x) and x >= 0 for x in lv):
        p.append("levels must be a nonempty list of nonnegative integers")
    cut = d["cutoff"]
    if cut is not None:
        if not isinstance(cut, dict) or not all(_is_num(cut.get(k)) for k in ("r0", "r1")):
            p.append("cutoff must have numeric r0 and r1")
        elif not 0 < cut["r0"] < cut["r1"]:
            p.append("cutoff needs 0 < r0 < r1")
        elif isinstance(dom, dict) and _is_num(dom.get("delta")) and cut["r1"] > dom["delta"]:
            p.append("cutoff.r1 must not exceed domain.delta")
    if d["family"] not in FAMILIES:
        p.append(f"family must be one of {', '.join(FAMILIES)}")
    if d["forms"] is not None and (not isinstance(d["forms"], list) or not all(_is_int(i) and i >= 0 for i in d["forms"])):
        p.append("forms must be a list of indices")
    if d["functions"] is not None and (not isinstance(d["functions"], list) or not all(isinstance(f, (str, int, float)) for f in d["functions"])):
        p.append("functions must be a list of expressions")
    pts = d["points"]
    if pts is not None:
        if isinstance(pts, dict):
            if not _is_int(pts.get("count")) or pts["count"] < 1:
                p.append("points.count must be a positive integer")
            if not _is_num(pts.get("radius", 0.6)) or not 0 < pts.get("radius", 0.6) < 1:
                p.append("points.radius must lie in (0, 1)")
        elif not isinstance(pts, list) or not all(isinstance(x, list) and all(_is_num(c) for c in x) for x in pts):
            p.append("points must be a list of real coordinate lists or {count, radius}")
        elif isinstance(dom, dict) and _is_int(dom.get("n")) and any(len(x) != 2 * dom["n"] for x in pts):
            p.append("each point needs 2n real coordinates (re, im per complex coordinate)")
    nm = d["norm"]
    if not isinstance(nm, dict):
        p.append("norm must be a mapping")
    else:
        if not _is_int(nm.get("k")) or nm["k"] < 0:
            p.append("norm.k must be a nonnegative integer")
        if not _is_num(nm.get("p")) or nm["p"] <= 1:
            p.append("norm.p must exceed 1")
        mus = nm.get("mu")
        mus = mus if isinstance(mus, list) else [mus]
        if not all(m is None or (_is_num(m) and 0 < m < 1) for m in mus):
            p.append("norm.mu entries must lie in (0, 1)")
    lem = d["lemma"]
    if not isinstance(lem, dict):
        p.append("lemma must be a mapping")
    else:
        for c in lem.get("cases") or []:
            if not isinstance(c, dict) or c.get("case") not in LEMMA_CASES:
                p.append(f"lemma case must be one of {', '.join(LEMMA_CASES)}")
            elif not isinstance(c.get("alphas", [0]), list):
                p.append("lemma alphas must be a list")
        r = lem.get("delta_range")
        if not (isinstance(r, list) and len(r) == 2 and all(_is_num(x) and x > 0 for x in r) and r[0] < r[1]):
            p.append("lemma.delta_range must be [lo, hi] with 0 < lo < hi")
        if not _is_int(lem.get("per_decade")) or lem["per_decade"] < 1:
            p.append("lemma.per_decade must be a positive integer")
        if d["scenario"] == "lemma-sweep" and not lem.get("cases"):
            p.append("lemma-sweep needs at least one lemma case")
    rays = d["rays"]
    if not isinstance(rays, dict):
        p.append("rays must be a mapping")
    else:
        rr = rays.get("radii")
        if not (isinstance(rr, list) and len(rr) == 2 and all(_is_num(x) and x > 0 for x in rr)):
            p.append("rays.radii must be [largest, smallest] boundary distances")
        if not _is_int(rays.get("count")) or rays["count"] < 1:
            p.append("rays.count must be a positive integer")
        if not _is_int(rays.get("order")) or rays["order"] < 1:
            p.append("rays.order must be a positive integer")
    if not _is_int(d["pairs"]) or d["pairs"] < 1:
        p.append("pairs must be a positive integer")
    for key in ("h", "h_fd"):
        if not _is_num(d[key]) or d[key] <= 0:
            p.append(f"{key} must be positive")
    if not isinstance(d["thresholds"], dict):
        p.append("thresholds must be a mapping")
    out = d["output"]
    if not isinstance(out, dict) or not all(isinstance(out.get(k), str) for k in ("csv", "json", "plot")):
        p.append("output needs csv, json and plot file names")
    return p
