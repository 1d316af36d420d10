"""Run configuration: a YAML document validated into a :class:`RunConfig`.

Schema (version 1)::

    schema_version: 1            # optional; only 1 is accepted
    algebra: b2 | h4 | h6        # default b2
    chart: cartesian | epidemic  # default epidemic
    rho0, b, b1, b2, b4, b5:     # coefficients; absent means zero
      number | expression string | {table: {t: [...], values: [...], order: 1|3}}
    t0: 0.0
    t1: 5.0
    a: <t0>                      # lower limit of the running integrals
    samples: 200
    tol: 1.0e-10
    q0, p0 | x0, y0              # initial state, in either chart
    seed: 20240607
    exact:     {c1: .., c2: ..}                     # optional, else from the initial state
    superpose: {particulars: [[u, v], ...]}         # 2 (b2, h4) or 3 (h6) states in `chart`
    constants: {copies: [[u, v], ...]}              # 3 (b2, h4) or 4 (h6) states in `chart`
    convert:   {input: path.csv}                    # columns t and the chart's coordinates
    verify:    {points: 200}

``b`` names the book coefficient and is an alias of ``b2`` (only valid for b2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .algebra import GENERATORS, Algebra
from .coeffs import Constant, Table, TimeFunction, parse_expression
from .dynamics import COEFFICIENT_INDEX, IntegrationConstants, SystemSpec
from .errors import ConfigError, ExpressionError
from .transform import Chart, PhaseState

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240607
COEFFICIENT_KEYS = ("rho0", "b", "b1", "b2", "b4", "b5")
_TOP_KEYS = {
    "schema_version", "algebra", "chart", "t0", "t1", "a", "samples", "tol", "seed",
    "q0", "p0", "x0", "y0", "exact", "superpose", "constants", "convert", "verify",
    *COEFFICIENT_KEYS,
}


@dataclass(frozen=True)
class RunConfig:
    algebra: Algebra
    chart: Chart
    coefficients: dict[str, TimeFunction]
    t0: float
    t1: float
    a: float
    samples: int
    tol: float
    initial: PhaseState | None
    seed: int = DEFAULT_SEED
    exact: IntegrationConstants | None = None
    particulars: tuple[PhaseState, ...] = ()
    copies: tuple[PhaseState, ...] = ()
    convert_input: str | None = None
    verify_points: int = 200
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def spec(self, chart: Chart | None = None) -> SystemSpec:
        return SystemSpec(self.algebra, chart or self.chart, a=self.a, **self.coefficients)

    def with_overrides(self, seed: int | None = None, tol: float | None = None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=int(seed))
        if tol is not None:
            if not tol > 0:
                raise ConfigError("must be positive", "tol")
            out = replace(out, tol=float(tol))
        return out


def _number(doc: dict, key: str, default=None, path: str = "") -> float:
    where = f"{path}.{key}" if path else key
    if key not in doc:
        if default is None:
            raise ConfigError("required field is missing", where)
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", where)
    if not math.isfinite(val):
        raise ConfigError("must be finite", where)
    return float(val)


def _coefficient(value: Any, where: str) -> TimeFunction:
    if isinstance(value, bool):
        raise ConfigError("expected a number, expression or table", where)
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise ConfigError("must be finite", where)
        return Constant(float(value))
    if isinstance(value, str):
        try:
            return parse_expression(value)
        except ExpressionError as exc:
            raise ConfigError(f"unparsable expression {value!r}: {exc}", where) from exc
    if isinstance(value, dict) and set(value) == {"table"} and isinstance(value["table"], dict):
        tab = value["table"]
        extra = set(tab) - {"t", "values", "order"}
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", f"{where}.table")
        try:
            return Table(tab.get("t", []), tab.get("values", []), int(tab.get("order", 1)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"{where}.table") from exc
    raise ConfigError("expected a number, expression or {table: ...}", where)


def _state_list(value: Any, chart: Chart, where: str) -> tuple[PhaseState, ...]:
    if not isinstance(value, list):
        raise ConfigError("expected a list of [u, v] pairs", where)
    out = []
    for i, item in enumerate(value):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in item)
        ):
            raise ConfigError("expected a pair of numbers", f"{where}[{i}]")
        out.append(PhaseState(chart, float(item[0]), float(item[1])))
    return tuple(out)


def _block(doc: dict, key: str, allowed: set[str]) -> dict:
    val = doc.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError("expected a mapping", key)
    extra = set(val) - allowed
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", key)
    return val


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises:
        ConfigError: invalid YAML or a schema violation; ``.path`` names the field.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError("unknown field", key)

    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})", "schema_version")

    try:
        algebra = Algebra(doc.get("algebra", "b2"))
    except ValueError:
        raise ConfigError(f"expected one of b2, h4, h6, got {doc.get('algebra')!r}", "algebra") from None
    try:
        chart = Chart(doc.get("chart", "epidemic"))
    except ValueError:
        raise ConfigError(f"expected cartesian or epidemic, got {doc.get('chart')!r}", "chart") from None

    coefficients: dict[str, TimeFunction] = {}
    gens = GENERATORS[algebra]
    for key in COEFFICIENT_KEYS:
        if key not in doc:
            continue
        if key == "b" and algebra is not Algebra.B2:
            raise ConfigError("'b' is the book coefficient; use b1/b2 for h4 and h6", key)
        name = "b2" if key == "b" else key
        if name in coefficients:
            raise ConfigError("given twice (b and b2)", key)
        func = _coefficient(doc[key], key)
        if COEFFICIENT_INDEX[name] not in gens and not func.is_zero:
            raise ConfigError(f"coefficient not allowed for the {algebra.value} algebra", key)
        coefficients[name] = func

    t0 = _number(doc, "t0", 0.0)
    t1 = _number(doc, "t1")
    if t1 < t0:
        raise ConfigError("must be >= t0", "t1")
    a = _number(doc, "a", t0)
    samples = doc.get("samples", 200)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        raise ConfigError("must be an integer >= 2", "samples")
    tol = _number(doc, "tol", 1e-10)
    if not tol > 0:
        raise ConfigError("must be positive", "tol")
    seed = doc.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("must be a non-negative integer", "seed")

    initial = None
    has_epi = "q0" in doc or "p0" in doc
    has_cart = "x0" in doc or "y0" in doc
    if has_epi and has_cart:
        raise ConfigError("give the initial state in one chart only", "x0")
    if has_epi:
        initial = PhaseState.epidemic(_number(doc, "q0"), _number(doc, "p0"))
    elif has_cart:
        initial = PhaseState.cartesian(_number(doc, "x0"), _number(doc, "y0"))

    exact_doc = _block(doc, "exact", {"c1", "c2"})
    exact = None
    if exact_doc:
        exact = IntegrationConstants(_number(exact_doc, "c1", path="exact"), _number(exact_doc, "c2", path="exact"))

    sup = _block(doc, "superpose", {"particulars"})
    particulars = _state_list(sup["particulars"], chart, "superpose.particulars") if "particulars" in sup else ()
    if particulars:
        need = 3 if algebra is Algebra.H6 else 2
        if len(particulars) != need:
            raise ConfigError(f"{algebra.value} needs {need} particular solutions", "superpose.particulars")

    cons = _block(doc, "constants", {"copies"})
    copies = _state_list(cons["copies"], chart, "constants.copies") if "copies" in cons else ()
    if copies:
        need = 4 if algebra is Algebra.H6 else 3
        if len(copies) != need:
            raise ConfigError(f"{algebra.value} needs {need} copies", "constants.copies")

    conv = _block(doc, "convert", {"input"})
    convert_input = conv.get("input")
    if convert_input is not None and not isinstance(convert_input, str):
        raise ConfigError("expected a file path", "convert.input")

    ver = _block(doc, "verify", {"points"})
    points = ver.get("points", 200)
    if isinstance(points, bool) or not isinstance(points, int) or points < 1:
        raise ConfigError("must be a positive integer", "verify.points")

    return RunConfig(
        algebra=algebra,
        chart=chart,
        coefficients=coefficients,
        t0=t0,
        t1=t1,
        a=a,
        samples=samples,
        tol=tol,
        initial=initial,
        seed=seed,
        exact=exact,
        particulars=particulars,
        copies=copies,
        convert_input=convert_input,
        verify_points=points,
        source=doc,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def default_config_text() -> str:
    """The shipped default configuration (``data/default.yaml``)."""
    return resources.files("lhsis").joinpath("data/default.yaml").read_text(encoding="utf-8")
