"""Scenario files: INI-style ``[section]`` headers with ``key = value`` lines.

Example::

    [problem]
    a = 0
    b = 1
    A = 0
    B = 0
    n = 2001

    [lagrangian]
    L = v^2
    mu = 2

    [obstacles]
    f = 0.5 - 4*(x - 0.5)^2
    g = 10
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ParseError, ValidationError
from .expr import Expression
from .lagrangian import Lagrangian
from .obstacles import ObstaclePair
from .regularity import DEFAULT_LADDER, ReportOptions
from .variational import ProblemSpec

SECTIONS = ("problem", "lagrangian", "obstacles", "solver", "checks", "output", "sweep")


@dataclass
class Scenario:
    a: float
    b: float
    A: float
    B: float
    L: str
    mu: float
    f: str
    g: str
    n: int = 2001
    L_v: str = None
    L_vv: str = None
    f_prime: str = None
    g_prime: str = None
    tol: float = 1e-8
    max_iter: int = 100_000
    seed: int = 0
    a3_pairs: int = 1100
    a3_scales: int = 11
    a3_beyond: bool = False
    p3_pairs: int = 500
    energy_pairs: int = 200
    ladder: tuple = DEFAULT_LADDER
    growth_factor: float = 1.8
    thetas: tuple = ()
    eps_ladder: tuple = None
    k_grid: tuple = None
    output: str = None
    sweep: dict = field(default_factory=dict)
    sweep_command: str = "solve"
    source: str = ""
    path: str = None

    @property
    def sha256(self):
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def lagrangian(self):
        return Lagrangian.from_expression(self.L, self.mu, self.L_v, self.L_vv)

    def obstacles(self):
        return ObstaclePair(self.f, self.g, self.a, self.b, fprime=self.f_prime, gprime=self.g_prime)

    def problem(self):
        return ProblemSpec(self.a, self.b, self.A, self.B, self.lagrangian(), self.obstacles(), self.n)

    def report_options(self, perturbation=None, jobs=1):
        return ReportOptions(
            seed=self.seed, a3_pairs=self.a3_pairs, a3_scales=self.a3_scales,
            a3_beyond=self.a3_beyond, p3_pairs=self.p3_pairs, energy_pairs=self.energy_pairs,
            ladder=self.ladder, growth_factor=self.growth_factor, extra_thetas=self.thetas,
            eps_ladder=self.eps_ladder, k_grid=self.k_grid, perturbation=perturbation,
            jobs=jobs, tol=self.tol,
        )

    def with_values(self, **changes):
        return replace(self, **changes)


# (section, key) -> (attribute, kind, required)
FIELDS = {
    ("problem", "a"): ("a", float, True),
    ("problem", "b"): ("b", float, True),
    ("problem", "A"): ("A", float, True),
    ("problem", "B"): ("B", float, True),
    ("problem", "n"): ("n", int, False),
    ("lagrangian", "L"): ("L", "xuv", True),
    ("lagrangian", "L_v"): ("L_v", "xuv", False),
    ("lagrangian", "L_vv"): ("L_vv", "xuv", False),
    ("lagrangian", "mu"): ("mu", float, True),
    ("obstacles", "f"): ("f", "x", True),
    ("obstacles", "g"): ("g", "x", True),
    ("obstacles", "f_prime"): ("f_prime", "x", False),
    ("obstacles", "g_prime"): ("g_prime", "x", False),
    ("solver", "n"): ("n", int, False),
    ("solver", "tol"): ("tol", float, False),
    ("solver", "max_iter"): ("max_iter", int, False),
    ("solver", "seed"): ("seed", int, False),
    ("checks", "a3_pairs"): ("a3_pairs", int, False),
    ("checks", "a3_scales"): ("a3_scales", int, False),
    ("checks", "a3_beyond"): ("a3_beyond", bool, False),
    ("checks", "p3_pairs"): ("p3_pairs", int, False),
    ("checks", "energy_pairs"): ("energy_pairs", int, False),
    ("checks", "ladder"): ("ladder", "ints", False),
    ("checks", "growth_factor"): ("growth_factor", float, False),
    ("checks", "thetas"): ("thetas", "floats", False),
    ("checks", "eps_ladder"): ("eps_ladder", "floats", False),
    ("checks", "k_grid"): ("k_grid", "floats", False),
    ("output", "dir"): ("output", str, False),
}


def _locate(text):
    """Map ``(section, key)`` to ``(line, column of the value)``, both 1-based."""
    where = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" in raw:
            key, _, rest = raw.partition("=")
            col = len(key) + 2 + (len(rest) - len(rest.lstrip()))
            where[(section, key.strip())] = (lineno, col)
    return where


def _convert(name, kind, raw):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if kind is float:
            return float(raw)
        if kind == "ints":
            return tuple(_convert(name, int, p) for p in raw.split(",") if p.strip())
        if kind == "floats":
            return tuple(float(p) for p in raw.split(",") if p.strip())
        return raw.strip()
    except ValueError:
        raise ValidationError(name, f"{name}: cannot read {raw.strip()!r}") from None


def _parse_sweep(section, where):
    grid = {}
    for key, raw in section.items():
        if key == "command":
            continue
        if "." not in key:
            raise ValidationError(key, f"sweep key {key!r} must look like section.key")
        sec, _, name = key.partition(".")
        if (sec, name) not in FIELDS:
            raise ValidationError(key, f"unknown sweep parameter {key!r}")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise ValidationError(key, f"sweep parameter {key!r} has no values")
        grid[(sec, name)] = values
    return grid


def _validate(sc):
    checks = [
        ("b", sc.a < sc.b, "need a < b"),
        ("n", sc.n >= 3, "need n >= 3"),
        ("mu", sc.mu > 0, "need mu > 0"),
        ("tol", sc.tol > 0, "need tol > 0"),
        ("max_iter", sc.max_iter >= 1, "need max_iter >= 1"),
        ("a3_pairs", sc.a3_pairs >= 1, "need a3_pairs >= 1"),
        ("a3_scales", sc.a3_scales >= 1, "need a3_scales >= 1"),
        ("p3_pairs", sc.p3_pairs >= 1, "need p3_pairs >= 1"),
        ("energy_pairs", sc.energy_pairs >= 1, "need energy_pairs >= 1"),
        ("growth_factor", sc.growth_factor > 1, "need growth_factor > 1"),
        ("ladder", len(sc.ladder) >= 3 and all(x < y for x, y in zip(sc.ladder, sc.ladder[1:]))
         and sc.ladder[0] >= 3, "ladder needs >= 3 increasing sizes >= 3"),
        ("thetas", all(t > 0 for t in sc.thetas), "thetas must be positive"),
        ("k_grid", sc.k_grid is None or (len(sc.k_grid) >= 1 and all(k >= 0 for k in sc.k_grid)),
         "k_grid entries must be nonnegative"),
        ("eps_ladder", sc.eps_ladder is None or (
            len(sc.eps_ladder) >= 2 and all(e > 0 for e in sc.eps_ladder)
            and all(x > y for x, y in zip(sc.eps_ladder, sc.eps_ladder[1:]))),
         "eps_ladder must be strictly decreasing positive values"),
        ("sweep.command", sc.sweep_command in ("solve", "verify", "theory", "dini"),
         "sweep command must be solve, verify, theory or dini"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise ValidationError(name, f"{name}: {msg}")


def parse_scenario_text(text, path=None):
    """Parse and validate scenario text; see :func:`parse_scenario`."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<scenario>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside any [section]", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ParseError("malformed scenario line", line=lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ParseError(str(exc).split(":")[-1].strip(), line=exc.lineno) from None
    where = _locate(text)
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ValidationError(sec, f"unknown section [{sec}]")
        if sec == "sweep":
            continue
        for key in cp[sec]:
            if (sec, key) not in FIELDS:
                raise ValidationError(key, f"unknown key {key!r} in [{sec}]")
    values = {}
    for (sec, key), (attr, kind, required) in FIELDS.items():
        if not cp.has_option(sec, key):
            if required:
                raise ValidationError(key, f"missing required field {key!r} in [{sec}]")
            continue
        raw = cp.get(sec, key)
        if kind in ("x", "xuv"):
            variables = ("x",) if kind == "x" else ("x", "u", "v")
            try:
                Expression(raw, variables)
            except ParseError as exc:
                line, col = where.get((sec, key), (None, None))
                column = col + exc.column - 1 if (col and exc.column) else col
                msg = str(exc).rsplit(" (column", 1)[0]
                raise ParseError(f"{key}: {msg}", line=line, column=column) from None
            values[attr] = raw.strip()
        else:
            values[attr] = _convert(key, kind, raw)
    sweep, command = {}, "solve"
    if cp.has_section("sweep"):
        sweep = _parse_sweep(cp["sweep"], where)
        command = cp["sweep"].get("command", "solve").strip()
    sc = Scenario(**values, sweep=sweep, sweep_command=command, source=text,
                  path=str(path) if path else None)
    _validate(sc)
    return sc


def parse_scenario(path):
    """Read and validate a scenario file.

    Raises :class:`ParseError` (with line and column) for syntax errors in
    the file or in an expression, and :class:`ValidationError` naming the
    field for missing or out-of-range values.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario_text(text, path)


def apply_overrides(sc, assignments):
    """Scenario with ``{(section, key): raw value}`` applied and revalidated."""
    text_changes = {}
    for (sec, key), raw in assignments.items():
        attr, kind, _ = FIELDS[(sec, key)]
        if kind in ("x", "xuv"):
            Expression(raw, ("x",) if kind == "x" else ("x", "u", "v"))
            text_changes[attr] = raw
        else:
            text_changes[attr] = _convert(key, kind, raw)
    out = sc.with_values(**text_changes)
    _validate(out)
    return out
