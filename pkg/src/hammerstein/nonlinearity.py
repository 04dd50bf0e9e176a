"""Nonlinearities f(t, x_0, ..., x_m) with declared asymptotic limits."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from . import expression as ex
from .errors import EvaluationDomainError
from .optimize import coordinate_refine

log = logging.getLogger(__name__)

DEFAULT_SEED = 42
DEFAULT_BOX_SAMPLES = 4096
_MAX_CORNER_DIM = 12


@dataclass(frozen=True)
class NonlinearitySpec:
    """f together with its declared f_0 / f^inf and optional closed forms.

    ``func`` is called as ``func(t, X)`` where ``X`` has leading axis of length
    ``m + 1``; both may carry extra broadcast axes.
    """

    m: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f0: float
    finf: float
    name: str = "f"
    tree: ex.Node | None = None
    phi_rule: ex.Node | None = None
    rho_sup_closed: ex.Node | None = None
    rho_inf_closed: dict[int, ex.Node] = field(default_factory=dict)

    def __post_init__(self):
        for label, v in (("f0", self.f0), ("finf", self.finf)):
            if not (v >= 0):
                raise ValueError(f"declared {label} must be a nonnegative extended real, got {v}")

    @classmethod
    def from_expression(cls, text: str, m: int, f0: float, finf: float, name: str | None = None,
                        phi_rule: str | None = None, rho_sup: str | None = None,
                        rho_inf: dict[int, str] | None = None) -> NonlinearitySpec:
        names = ["t"] + [f"x{i}" for i in range(m + 1)]
        tree = ex.parse(text, names)
        compiled = ex.compile_tree(tree, names)

        def func(t, X):
            return compiled(t, *(X[i] for i in range(m + 1)))

        return cls(
            m=m, func=func, f0=float(f0), finf=float(finf), name=name or text, tree=tree,
            phi_rule=ex.parse(phi_rule, ("t", "r")) if phi_rule else None,
            rho_sup_closed=ex.parse(rho_sup, ("r",)) if rho_sup else None,
            rho_inf_closed={int(k): ex.parse(v, ("r",)) for k, v in (rho_inf or {}).items()},
        )

    @property
    def text(self) -> str | None:
        return ex.to_text(self.tree) if self.tree is not None else None

    def __call__(self, t, X):
        t = np.asarray(t, dtype=float)
        X = np.asarray(X, dtype=float)
        out = self.func(t, X)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(t, X[0]).shape)


BUILTINS = {
    "example1_f": dict(text="exp(t)*(abs(x0)+abs(x1)+abs(x2))/(1+x0^2)", m=2, f0=1.0, finf=0.0),
    "example2_f": dict(text="t*(exp(x0)+x1^2+x2^2+x3^2)", m=3, f0=0.0, finf=math.inf),
}


def builtin_nonlinearity(ident: str) -> NonlinearitySpec:
    try:
        cfg = BUILTINS[ident]
    except KeyError:
        raise KeyError(f"unknown builtin nonlinearity {ident!r}") from None
    return NonlinearitySpec.from_expression(cfg["text"], cfg["m"], cfg["f0"], cfg["finf"], name=ident)


def evaluate(spec: NonlinearitySpec, t: float, x: Sequence[float], check: bool = False) -> float:
    """f(t, x) at one point; ``check`` asserts the value is nonnegative."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.m + 1,):
        raise ValueError(f"expected {spec.m + 1} state values, got shape {x.shape}")
    value = float(spec(t, x))
    if check and not value >= 0:
        raise EvaluationDomainError("nonlinearity returned a negative value",
                                    {"t": t, **{f"x{i}": v for i, v in enumerate(x)}, "f": value})
    return value


# ray probes of the asymptotic limits ------------------------------------------

@dataclass(frozen=True)
class LimitProbe:
    direction: str
    magnitudes: tuple[float, ...]
    bands: tuple[tuple[float, float], ...]

    @property
    def band(self) -> tuple[float, float]:
        return self.bands[-1]


def _rays(dim: int, ray_count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rays = 0.5 + 0.5 * rng.random((ray_count, dim))
    rays[0] = 1.0
    return rays


def probe_limits(spec: NonlinearitySpec, direction: str, ray_count: int = 16,
                 magnitudes: Sequence[float] | None = None, T: float = 1.0,
                 t_nodes: int = 33, seed: int = DEFAULT_SEED) -> LimitProbe:
    """Heuristic [min, max] of min_t (or max_t) f/|x|_1 along nonnegative rays."""
    if ray_count < 8:
        raise ValueError("ray_count must be >= 8")
    if direction not in ("zero", "infinity"):
        raise ValueError("direction must be 'zero' or 'infinity'")
    if magnitudes is None:
        magnitudes = (1e-2, 1e-4, 1e-6, 1e-8) if direction == "zero" else (1e2, 1e4, 1e6, 1e8)
    rays = _rays(spec.m + 1, ray_count, seed)
    t = np.linspace(0.0, T, t_nodes)
    bands = []
    with np.errstate(over="ignore", invalid="ignore"):
        for mu in magnitudes:
            X = (mu * rays).T[:, :, None]                  # (m+1, rays, 1)
            vals = spec(t[None, :], X) / (mu * rays.sum(axis=1))[:, None]
            # 0 * overflow gives nan; those samples carry no information
            per_ray = np.nanmin(vals, axis=1) if direction == "zero" else np.nanmax(vals, axis=1)
            bands.append((float(np.nanmin(per_ray)), float(np.nanmax(per_ray))))
    return LimitProbe(direction, tuple(float(m) for m in magnitudes), tuple(bands))


def _consistent(declared: float, lo: float, hi: float) -> bool:
    if math.isinf(declared):
        return hi > 1e3
    if declared == 0:
        return lo < 1e-3
    return lo / 10 <= declared <= hi * 10


def check_declared_limits(spec: NonlinearitySpec, T: float = 1.0, seed: int = DEFAULT_SEED) -> list[str]:
    """Warnings for declarations that disagree with ray probes; never raises."""
    warnings = []
    for label, declared, direction in (("f0", spec.f0, "zero"), ("finf", spec.finf, "infinity")):
        probe = probe_limits(spec, direction, T=T, seed=seed)
        lo, hi = probe.band
        if not _consistent(declared, lo, hi):
            msg = (f"declared {label}={declared:g} disagrees with ray probe band "
                   f"[{lo:.6g}, {hi:.6g}] at |x|~{probe.magnitudes[-1]:g}")
            log.warning(msg)
            warnings.append(msg)
    return warnings


# extrema over boxes ---------------------------------------------------------

@dataclass(frozen=True)
class BoxExtremum:
    value: float
    point: tuple[float, ...]
    closed_form: bool = False


def box_extremum(spec: NonlinearitySpec, t_range: tuple[float, float],
                 lower: Sequence[float], upper: Sequence[float], mode: str = "max",
                 samples: int = DEFAULT_BOX_SAMPLES, seed: int = DEFAULT_SEED,
                 refine: int = 4) -> BoxExtremum:
    """sup/inf of f over [t_lo, t_hi] x box via Sobol points, corners and coordinate search."""
    lo = np.concatenate([[t_range[0]], np.asarray(lower, dtype=float)])
    hi = np.concatenate([[t_range[1]], np.asarray(upper, dtype=float)])
    dim = lo.size
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    pts = lo + (hi - lo) * sampler.random_base2(int(math.ceil(math.log2(max(samples, 2)))))
    extra = [0.5 * (lo + hi)]
    if dim <= _MAX_CORNER_DIM:
        extra.extend(np.where(np.array(bits, dtype=bool), hi, lo)
                     for bits in itertools.product((0, 1), repeat=dim))
    pts = np.vstack([np.array(extra), pts])

    def value(p):
        p = np.asarray(p)
        return spec(p[..., 0], np.moveaxis(p[..., 1:], -1, 0))

    def scalar(p):
        return float(spec.func(float(p[0]), p[1:].tolist()))

    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(value(pts), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf if mode == "max" else np.inf, vals)
    order = np.argsort(-vals if mode == "max" else vals, kind="stable")
    best_v = float(vals[order[0]])
    best_p = pts[order[0]]
    if math.isfinite(best_v):
        for k in order[:refine]:
            p, v = coordinate_refine(scalar, pts[k], lo, hi, mode=mode)
            if (v > best_v) if mode == "max" else (v < best_v):
                best_v, best_p = float(v), p
    return BoxExtremum(best_v, tuple(float(c) for c in best_p))


def caratheodory_bound(spec: NonlinearitySpec, r: float, t_nodes: np.ndarray,
                       samples: int = 1024, seed: int = DEFAULT_SEED) -> np.ndarray:
    """phi_r(t) on ``t_nodes``: the declared rule, else 1.1 * sampled max over (-r, r)^{m+1}."""
    t_nodes = np.asarray(t_nodes, dtype=float)
    if spec.phi_rule is not None:
        vals = ex.evaluate(spec.phi_rule, {"t": t_nodes, "r": r})
        return np.broadcast_to(np.asarray(vals, dtype=float), t_nodes.shape).copy()
    sampler = qmc.Sobol(d=spec.m + 1, scramble=True, seed=seed)
    X = (-r + 2 * r * sampler.random_base2(int(math.ceil(math.log2(samples))))).T  # (m+1, N)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = spec(t_nodes[:, None], X[:, None, :])
    return 1.1 * np.max(vals, axis=1)
