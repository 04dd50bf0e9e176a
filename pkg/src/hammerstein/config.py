"""Problem configuration files (INI syntax, read with configparser).

Sections::

    [kernel]    builtin = example1 | lidstone4 | lidstone:<n> | dirichlet2 | zero
                or  m, T, name and order<i>.le / order<i>.gt = "a b coef; ..."
    [cone.<j>]  a, b, c, d, phi (auto or an expression in s), xi (optional)
    [f]         builtin or expr, f0, finf, phi_r, rho_sup, rho_inf.<i>
    [certify]   lambdas, rho_min, rho_max, rho_count, samples, seed, best_window
    [solver]    lambda, grid, tol, max_iter, damping, u0, slack
    [output]    report, plots

Numbers may be written as fractions ("1/75") and "inf" is accepted where an
extended real makes sense.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import expression as ex
from .errors import ConfigError, ExpressionSyntaxError
from .hypothesis import ConeDecl
from .kernel import KernelSurface, builtin_kernel, kernel_from_triples
from .nonlinearity import BUILTINS, DEFAULT_BOX_SAMPLES, DEFAULT_SEED, NonlinearitySpec
from .solver import NODES_PER_PANEL

BUNDLED = ("example1.cfg", "example2.cfg", "lidstone.cfg")


@dataclass
class CertifyOptions:
    lambdas: tuple[float, ...] = ()
    rho_min: float = 1e-4
    rho_max: float = 1e2
    rho_count: int = 64
    samples: int = DEFAULT_BOX_SAMPLES
    seed: int = DEFAULT_SEED
    best_window: bool = True

    def rhos(self) -> np.ndarray:
        return np.geomspace(self.rho_min, self.rho_max, self.rho_count)


@dataclass
class SolverOptions:
    lam: float | None = None
    grid: int = 200
    tol: float = 1e-11
    max_iter: int = 500
    damping: float = 1.0
    u0: float = 0.0
    slack: float = 1e-8


@dataclass
class ProblemConfig:
    source: str
    kernel: KernelSurface
    cones: list[ConeDecl]
    f: NonlinearitySpec
    certify: CertifyOptions = field(default_factory=CertifyOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    report: str | None = None
    plots: bool = False

    @property
    def name(self) -> str:
        return Path(self.source).name


# scalar parsing -----------------------------------------------------------------

def parse_number(text: str) -> float:
    """A float, a fraction a/b, or +-inf."""
    s = text.strip().lower()
    if s in ("inf", "+inf", "infinity", "oo"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        return float(s)


def parse_exact(text: str) -> Fraction:
    return Fraction(text.strip())


def _bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("1", "yes", "true", "on"):
        return True
    if s in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


class _Reader:
    """configparser wrapper that turns every failure into a located ConfigError."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.lines = text.splitlines()
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as err:
            raise ConfigError(f"malformed config: {err.message if hasattr(err, 'message') else err}",
                              line=getattr(err, "lineno", None)) from None

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        pat = re.compile(r"^\s*\[([^\]]+)\]")
        for n, line in enumerate(self.lines, start=1):
            m = pat.match(line)
            if m:
                current = m.group(1).strip()
                if key is None and current == section:
                    return n
                continue
            if current == section and key is not None:
                if re.match(rf"^\s*{re.escape(key)}\s*[=:]", line):
                    return n
        return None

    def error(self, message: str, section: str, key: str | None = None) -> ConfigError:
        fld = f"{section}.{key}" if key else section
        return ConfigError(message, fld, self.line_of(section, key))

    def has(self, section: str, key: str | None = None) -> bool:
        if not self.cp.has_section(section):
            return False
        return key is None or self.cp.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        if not self.has(section, key):
            raise self.error("missing required field", section, key)
        return self.cp.get(section, key)

    def get(self, section: str, key: str, conv, default=None, required: bool = False):
        if not self.has(section, key):
            if required:
                raise self.error("missing required field", section, key)
            return default
        value = self.cp.get(section, key)
        try:
            return conv(value)
        except (ValueError, ZeroDivisionError, TypeError) as err:
            raise self.error(f"invalid value {value.strip()!r}: {err}", section, key) from None


# section readers -----------------------------------------------------------------

_ORDER_KEY = re.compile(r"^order(\d+)\.(le|gt)$")


def _triples(text: str) -> list[tuple[int, int, Fraction]]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ValueError(f"expected 'a b coefficient', got {chunk!r}")
        out.append((int(parts[0]), int(parts[1]), parse_exact(parts[2])))
    return out


def _read_kernel(r: _Reader) -> KernelSurface:
    if not r.has("kernel"):
        raise ConfigError("missing [kernel] section", "kernel")
    if r.has("kernel", "builtin"):
        ident = r.raw("kernel", "builtin").strip()
        try:
            return builtin_kernel(ident)
        except KeyError as err:
            raise r.error(str(err.args[0]), "kernel", "builtin") from None
    m = r.get("kernel", "m", int, required=True)
    if m < 1:
        raise r.error("m must be >= 1", "kernel", "m")
    T = r.get("kernel", "T", parse_exact, default=Fraction(1))
    if T <= 0:
        raise r.error("T must be positive", "kernel", "T")
    pieces = {}
    for key in r.cp.options("kernel"):
        match = _ORDER_KEY.match(key)
        if match:
            pieces[(int(match.group(1)), match.group(2))] = r.get("kernel", key, _triples)
        elif key not in ("m", "T", "name"):
            raise r.error("unknown kernel field", "kernel", key)
    name = r.get("kernel", "name", str.strip, default="explicit")
    try:
        return kernel_from_triples(m, T, pieces, name=name)
    except (ValueError, KeyError) as err:
        raise r.error(f"inconsistent kernel pieces: {err}", "kernel") from None


def _interval(r: _Reader, section: str, lo_key: str, hi_key: str, T: float,
              default: tuple[float, float] | None) -> tuple[float, float]:
    lo = r.get(section, lo_key, parse_number, default=None if default is None else default[0])
    hi = r.get(section, hi_key, parse_number, default=None if default is None else default[1])
    if lo is None or hi is None:
        raise r.error("missing interval end", section, lo_key if lo is None else hi_key)
    if not (0 <= lo <= hi <= T):
        raise r.error(f"interval [{lo:g}, {hi:g}] must lie inside [0, {T:g}]", section, lo_key)
    return lo, hi


def _read_cones(r: _Reader, K: KernelSurface) -> list[ConeDecl]:
    decls = []
    T = K.length
    for section in r.cp.sections():
        if not section.startswith("cone."):
            continue
        try:
            j = int(section.split(".", 1)[1])
        except ValueError:
            raise r.error("cone sections are named cone.<order>", section) from None
        if not 0 <= j <= K.m:
            raise r.error(f"cone order {j} outside 0..{K.m}", section)
        ab = _interval(r, section, "a", "b", T, None)
        cd = _interval(r, section, "c", "d", T, (0.0, T))
        phi_text = r.get(section, "phi", str.strip, default="auto")
        phi = None
        if phi_text.lower() != "auto":
            try:
                tree = ex.parse(phi_text, ("s",))
            except ExpressionSyntaxError as err:
                raise r.error(str(err), section, "phi") from None
            compiled = ex.compile_tree(tree, ("s",))

            def phi(s, _c=compiled):
                s = np.asarray(s, dtype=float)
                return np.broadcast_to(np.asarray(_c(s), dtype=float), s.shape)
        xi = r.get(section, "xi", parse_number)
        if xi is not None and not 0 < xi <= 1:
            raise r.error("xi must lie in (0, 1]", section, "xi")
        decls.append(ConeDecl(j, ab, cd, phi, phi_text, xi))
    return decls


def _read_f(r: _Reader, K: KernelSurface) -> NonlinearitySpec:
    if not r.has("f"):
        raise ConfigError("missing [f] section", "f")
    rho_inf = {}
    for key in r.cp.options("f"):
        if key.startswith("rho_inf."):
            try:
                rho_inf[int(key.split(".", 1)[1])] = r.raw("f", key).strip()
            except ValueError:
                raise r.error("rho_inf fields are named rho_inf.<order>", "f", key) from None
    phi_r = r.get("f", "phi_r", str.strip)
    rho_sup = r.get("f", "rho_sup", str.strip)
    if r.has("f", "builtin"):
        ident = r.raw("f", "builtin").strip()
        if ident not in BUILTINS:
            raise r.error(f"unknown builtin nonlinearity {ident!r}", "f", "builtin")
        base = BUILTINS[ident]
        text, f0, finf, name = base["text"], base["f0"], base["finf"], ident
        f0 = r.get("f", "f0", parse_number, default=f0)
        finf = r.get("f", "finf", parse_number, default=finf)
        if base["m"] != K.m:
            raise r.error(f"builtin {ident} has m={base['m']} but the kernel has m={K.m}", "f", "builtin")
    else:
        text = r.get("f", "expr", str.strip, required=True)
        f0 = r.get("f", "f0", parse_number, required=True)
        finf = r.get("f", "finf", parse_number, required=True)
        name = None
    for key, v in (("f0", f0), ("finf", finf)):
        if not v >= 0:
            raise r.error("declared limits must be nonnegative", "f", key)
    try:
        return NonlinearitySpec.from_expression(text, K.m, f0, finf, name=name, phi_rule=phi_r,
                                                rho_sup=rho_sup, rho_inf=rho_inf)
    except ExpressionSyntaxError as err:
        key = "expr" if r.has("f", "expr") else "f"
        raise r.error(str(err), "f", key if r.has("f", key) else None) from None


def _positive_list(text: str) -> tuple[float, ...]:
    vals = tuple(parse_number(v) for v in re.split(r"[,\s]+", text.strip()) if v)
    for v in vals:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("every lambda must be positive and finite")
    return vals


def _read_certify(r: _Reader) -> CertifyOptions:
    s = "certify"
    opts = CertifyOptions(
        lambdas=r.get(s, "lambdas", _positive_list, default=()),
        rho_min=r.get(s, "rho_min", parse_number, default=1e-4),
        rho_max=r.get(s, "rho_max", parse_number, default=1e2),
        rho_count=r.get(s, "rho_count", int, default=64),
        samples=r.get(s, "samples", int, default=DEFAULT_BOX_SAMPLES),
        seed=r.get(s, "seed", int, default=DEFAULT_SEED),
        best_window=r.get(s, "best_window", _bool, default=True),
    )
    if not 0 < opts.rho_min < opts.rho_max < math.inf:
        raise r.error("need 0 < rho_min < rho_max < inf", s, "rho_min")
    if opts.rho_count < 2:
        raise r.error("rho_count must be >= 2", s, "rho_count")
    if opts.samples < 2:
        raise r.error("samples must be >= 2", s, "samples")
    return opts


def _read_solver(r: _Reader) -> SolverOptions:
    s = "solver"
    opts = SolverOptions(
        lam=r.get(s, "lambda", parse_number),
        grid=r.get(s, "grid", int, default=200),
        tol=r.get(s, "tol", parse_number, default=1e-11),
        max_iter=r.get(s, "max_iter", int, default=500),
        damping=r.get(s, "damping", parse_number, default=1.0),
        u0=r.get(s, "u0", parse_number, default=0.0),
        slack=r.get(s, "slack", parse_number, default=1e-8),
    )
    if opts.lam is not None and not (opts.lam > 0 and math.isfinite(opts.lam)):
        raise r.error("lambda must be positive", s, "lambda")
    if opts.grid < NODES_PER_PANEL or opts.grid % NODES_PER_PANEL:
        raise r.error(f"grid must be a positive multiple of {NODES_PER_PANEL}", s, "grid")
    if not 0 < opts.damping <= 1:
        raise r.error("damping must lie in (0, 1]", s, "damping")
    if not opts.tol > 0:
        raise r.error("tol must be positive", s, "tol")
    if opts.max_iter < 1:
        raise r.error("max_iter must be >= 1", s, "max_iter")
    return opts


_KNOWN = {"kernel", "f", "certify", "solver", "output"}


def loads(text: str, source: str = "<string>") -> ProblemConfig:
    r = _Reader(text, source)
    for section in r.cp.sections():
        if section not in _KNOWN and not section.startswith("cone."):
            raise r.error("unknown section", section)
    K = _read_kernel(r)
    cones = _read_cones(r, K)
    f = _read_f(r, K)
    return ProblemConfig(
        source=source, kernel=K, cones=cones, f=f,
        certify=_read_certify(r), solver=_read_solver(r),
        report=r.get("output", "report", str.strip),
        plots=r.get("output", "plots", _bool, default=False),
    )


def resolve(path: str | Path) -> tuple[str, str]:
    """(text, source name); falls back to the bundled configs by file name."""
    p = Path(path)
    if p.is_file():
        return p.read_text(), str(p)
    if p.name in BUNDLED and len(p.parts) == 1:
        return resources.files("hammerstein.configs").joinpath(p.name).read_text(), p.name
    raise ConfigError(f"config file not found: {path}")


def load(path: str | Path) -> ProblemConfig:
    text, source = resolve(path)
    return loads(text, source)
