"""JSON run configuration: parsing, validation (all errors at once) and canonical serialization."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields

from .medium import BoxDomain, ScalarField, default_separation

STUDIES = (
    "sample",
    "solve-manybody",
    "solve-homogenized",
    "steady-average",
    "compare",
    "tauberian",
    "verify-lemmas",
)
FIELD_NAMES = ("N", "h", "c", "f")
FIELD_KEYS = {
    "constant": {"kind", "value"},
    "gaussian": {"kind", "center", "width", "amplitude", "offset"},
    "polynomial": {"kind", "terms"},
}
LEMMA_KEYS = {"radius", "distance", "lambdas", "radii", "n_theta", "lemma2_lambda"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _default_fields() -> dict:
    return {
        "N": {"kind": "constant", "value": 1.0},
        "h": {"kind": "constant", "value": 0.0},
        "c": {"kind": "constant", "value": 4.0 * math.pi},
        "f": {"kind": "constant", "value": 1.0},
    }


def _default_lemmas() -> dict:
    return {
        "radius": 0.1,
        "distance": 1.0,
        "lambdas": [0.0, 1.0, 4.0],
        "radii": [0.1, 0.05],
        "n_theta": [8, 16, 32, 64],
        "lemma2_lambda": 1.0,
    }


@dataclass
class RunConfig:
    domain: dict = field(default_factory=lambda: {"lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0]})
    fields: dict = field(default_factory=_default_fields)
    a: float = 0.01
    kappa: float = 0.5
    a_schedule: list | None = None
    seeds: list = field(default_factory=lambda: [0])
    lambdas: list = field(default_factory=lambda: [1.0])
    grid: int = 8
    b: float = 0.25
    coarse_mode: str = "analytic-density"
    study: str | None = None
    output_dir: str = "out"
    particles: list | None = None
    lemmas: dict = field(default_factory=_default_lemmas)

    # -- derived objects -------------------------------------------------
    @property
    def box(self) -> BoxDomain:
        return BoxDomain(tuple(self.domain["lo"]), tuple(self.domain["hi"]))

    def field(self, name: str) -> ScalarField:
        return ScalarField.from_dict(self.fields[name], support=self.box)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _vec3(v) -> bool:
    return isinstance(v, list) and len(v) == 3 and all(_is_num(x) for x in v)


def _check_field(name: str, entry, errors: list) -> None:
    if not isinstance(entry, dict):
        errors.append(f"fields.{name}: must be an object")
        return
    kind = entry.get("kind")
    if kind not in FIELD_KEYS:
        errors.append(f"fields.{name}.kind: must be one of {sorted(FIELD_KEYS)}")
        return
    for key in sorted(set(entry) - FIELD_KEYS[kind]):
        errors.append(f"fields.{name}: unknown key {key!r} for kind {kind!r}")
    if kind == "constant":
        if not _is_num(entry.get("value")):
            errors.append(f"fields.{name}.value: must be a finite number")
        elif name in ("N", "c") and entry["value"] < 0:
            errors.append(f"fields.{name}.value: must be non-negative")
        elif name == "c" and entry["value"] == 0:
            errors.append("fields.c.value: surface factor must be positive")
    elif kind == "gaussian":
        if not _vec3(entry.get("center")):
            errors.append(f"fields.{name}.center: must be a 3-vector")
        if not (_is_num(entry.get("width")) and entry["width"] > 0):
            errors.append(f"fields.{name}.width: must be a positive number")
        if not _is_num(entry.get("amplitude")):
            errors.append(f"fields.{name}.amplitude: must be a finite number")
        if "offset" in entry and not _is_num(entry["offset"]):
            errors.append(f"fields.{name}.offset: must be a finite number")
        if name in ("N", "c") and _is_num(entry.get("amplitude")) and _is_num(entry.get("offset", 0.0)):
            if entry["amplitude"] < 0 or entry.get("offset", 0.0) < 0:
                errors.append(f"fields.{name}: amplitude and offset must be non-negative")
    else:
        terms = entry.get("terms")
        ok = isinstance(terms, list) and all(
            isinstance(t, list) and len(t) == 4 and _is_num(t[0])
            and all(isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in t[1:])
            for t in terms
        )
        if not ok:
            errors.append(f"fields.{name}.terms: must be a list of [coef, px, py, pz] with integer powers >= 0")


def validate(data: dict) -> list[str]:
    errors: list[str] = []
    known = {f.name for f in fields(RunConfig)}
    for key in sorted(set(data) - known):
        errors.append(f"unknown key {key!r}")

    dom = data.get("domain", RunConfig().domain)
    if not (isinstance(dom, dict) and set(dom) == {"lo", "hi"} and _vec3(dom.get("lo")) and _vec3(dom.get("hi"))):
        errors.append("domain: must be {\"lo\": [x, y, z], \"hi\": [x, y, z]}")
    elif not all(h > l for l, h in zip(dom["lo"], dom["hi"])):
        errors.append("domain: hi must exceed lo on every axis")

    flds = data.get("fields", {})
    if not isinstance(flds, dict):
        errors.append("fields: must be an object")
    else:
        for key in sorted(set(flds) - set(FIELD_NAMES)):
            errors.append(f"fields: unknown field {key!r}")
        for name in FIELD_NAMES:
            if name in flds:
                _check_field(name, flds[name], errors)

    a = data.get("a", 0.01)
    if not (_is_num(a) and a > 0):
        errors.append("a: must be a positive number")
    kappa = data.get("kappa", 0.5)
    if not (_is_num(kappa) and 0 < kappa < 1):
        errors.append("kappa must lie in (0,1)")
    sched = data.get("a_schedule")
    if sched is not None:
        if not (isinstance(sched, list) and sched and all(_is_num(x) and x > 0 for x in sched)):
            errors.append("a_schedule: must be a non-empty list of positive numbers")
        elif any(x <= y for x, y in zip(sched, sched[1:])):
            errors.append("a_schedule: must be strictly decreasing")
    seeds = data.get("seeds", [0])
    if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2**64 for s in seeds)):
        errors.append("seeds: must be a non-empty list of unsigned 64-bit integers")
    lams = data.get("lambdas", [1.0])
    if not (isinstance(lams, list) and lams and all(_is_num(x) and x > 0 for x in lams)):
        errors.append("lambdas: must be a non-empty list of numbers > 0")
    grid = data.get("grid", 8)
    if not (isinstance(grid, int) and not isinstance(grid, bool) and grid >= 1):
        errors.append("grid: must be a positive integer")
    b = data.get("b", 0.25)
    if not (_is_num(b) and b > 0):
        errors.append("b: must be a positive number")
    if data.get("coarse_mode", "analytic-density") not in ("analytic-density", "empirical-count"):
        errors.append("coarse_mode: must be 'analytic-density' or 'empirical-count'")
    study = data.get("study")
    if study is not None and study not in STUDIES:
        errors.append(f"study: must be one of {list(STUDIES)}")
    if not isinstance(data.get("output_dir", "out"), str) or not data.get("output_dir", "out"):
        errors.append("output_dir: must be a non-empty string")
    parts = data.get("particles")
    if parts is not None and not (isinstance(parts, list) and all(_vec3(p) for p in parts)):
        errors.append("particles: must be a list of 3-vectors")
    lem = data.get("lemmas", {})
    if not isinstance(lem, dict):
        errors.append("lemmas: must be an object")
    else:
        for key in sorted(set(lem) - LEMMA_KEYS):
            errors.append(f"lemmas: unknown key {key!r}")
        if "radius" in lem and not (_is_num(lem["radius"]) and lem["radius"] > 0):
            errors.append("lemmas.radius: must be positive")
        if "distance" in lem and not (_is_num(lem["distance"]) and lem["distance"] > 0):
            errors.append("lemmas.distance: must be positive")
        if "lambdas" in lem and not (isinstance(lem["lambdas"], list) and all(_is_num(x) and x >= 0 for x in lem["lambdas"])):
            errors.append("lemmas.lambdas: must be a list of numbers >= 0")
        if "radii" in lem and not (isinstance(lem["radii"], list) and all(_is_num(x) and x > 0 for x in lem["radii"])):
            errors.append("lemmas.radii: must be a list of positive numbers")
        if "n_theta" in lem and not (isinstance(lem["n_theta"], list) and all(isinstance(x, int) and x >= 8 for x in lem["n_theta"])):
            errors.append("lemmas.n_theta: must be a list of integers >= 8")
        if "lemma2_lambda" in lem and not (_is_num(lem["lemma2_lambda"]) and lem["lemma2_lambda"] >= 0):
            errors.append("lemmas.lemma2_lambda: must be >= 0")
    return errors


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(["top level: must be a JSON object"])
    errors = validate(data)
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig()
    for key, val in data.items():
        if key == "fields":
            merged = _default_fields()
            merged.update(val)
            val = merged
        elif key == "lemmas":
            merged = _default_lemmas()
            merged.update(val)
            val = merged
        setattr(cfg, key, val)
    # normalise numbers so that round trips compare equal
    cfg.domain = {"lo": [float(v) for v in cfg.domain["lo"]], "hi": [float(v) for v in cfg.domain["hi"]]}
    cfg.a = float(cfg.a)
    cfg.kappa = float(cfg.kappa)
    cfg.b = float(cfg.b)
    cfg.lambdas = [float(v) for v in cfg.lambdas]
    if cfg.a_schedule is not None:
        cfg.a_schedule = [float(v) for v in cfg.a_schedule]
    cfg.fields = {k: ScalarField.from_dict(v).to_dict() for k, v in cfg.fields.items()}
    errors = _regime_errors(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def _regime_errors(cfg: RunConfig) -> list[str]:
    """Separation-regime preconditions for sampled clouds: ``d > 2a`` and ``b > d``."""
    if cfg.particles is not None:
        return []
    errors = []
    N = cfg.field("N")
    for a in cfg.a_schedule or [cfg.a]:
        d = default_separation(cfg.box, N, a, cfg.kappa)
        if not math.isfinite(d):
            continue
        if d <= 2.0 * a:
            errors.append(f"a={a:g}: separation d={d:.4g} must exceed 2a (lower N or a)")
        if cfg.b <= d:
            errors.append(f"b={cfg.b:g} must exceed the separation d={d:.4g} at a={a:g}")
    return errors


def parse_config(text: str) -> RunConfig:
    """Parse JSON text into a validated :class:`RunConfig`.

    Raises :class:`ConfigError` listing every problem found; JSON syntax
    errors report line and column.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return from_dict(data)
