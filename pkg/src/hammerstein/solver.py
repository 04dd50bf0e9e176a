"""Nystrom discretisation and damped Picard iteration for the Hammerstein operator.

The operator is discretised by product integration: the values
F_q = f(s_q, U[:, q]) are joined by their piecewise-linear interpolant F~
(constant beyond the outermost nodes) and every row integrates
d^i k(t_p, s) F~(s) exactly up to a Gauss-Legendre sub-rule on the cells
between consecutive nodes. Because t_p is itself a cell boundary the diagonal
kink never falls inside a cell, and because the hat functions are
nonnegative the discrete image of a nonnegative F is the exact image of a
nonnegative function.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergenceError, EvaluationDomainError
from .hypothesis import HypothesisReport
from .kernel import KernelSurface
from .nonlinearity import NonlinearitySpec
from .quadrature import composite_rule, gauss_legendre, panel_breakpoints

log = logging.getLogger(__name__)

DEFAULT_NODES = 200
NODES_PER_PANEL = 4
SUB_NODES = 8
DEFAULT_TOL = 1e-11
DEFAULT_MAX_ITER = 500
BLOWUP = 1e12
TRIVIAL_NORM = 1e-12


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    T: float

    @classmethod
    def composite(cls, n: int = DEFAULT_NODES, T: float = 1.0,
                  nodes_per_panel: int = NODES_PER_PANEL) -> Grid:
        if n < nodes_per_panel or n % nodes_per_panel:
            raise ValueError(f"node count {n} must be a positive multiple of {nodes_per_panel}")
        x, w = composite_rule(panel_breakpoints(0.0, T, n // nodes_per_panel), nodes_per_panel)
        return cls(x, w, float(T))

    @property
    def n(self) -> int:
        return self.nodes.size


def _hat_rule(grid: Grid, extra: Sequence[float] = (), sub_nodes: int = SUB_NODES):
    """Sub-points, positive weights and hat-function values (P x n) for the interpolant."""
    s = grid.nodes
    breaks = np.unique(np.concatenate([[0.0], s, [grid.T], np.asarray(extra, dtype=float)]))
    x, w = gauss_legendre(sub_nodes)
    lo, hi = breaks[:-1], breaks[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    sigma = (mid[:, None] + half[:, None] * x).ravel()
    omega = (half[:, None] * w).ravel()
    # hat weights; constant extension outside [s_0, s_{n-1}]
    j = np.clip(np.searchsorted(s, sigma, side="right") - 1, 0, s.size - 2)
    theta = np.clip((sigma - s[j]) / (s[j + 1] - s[j]), 0.0, 1.0)
    H = np.zeros((sigma.size, s.size))
    rows = np.arange(sigma.size)
    H[rows, j] = 1.0 - theta
    H[rows, j + 1] += theta
    return sigma, omega, H


@dataclass(frozen=True)
class DiscreteOperator:
    """W[i, p, q]: weight of F_q in the i-th derivative of the image at node p."""

    kernel: KernelSurface = field(repr=False)
    grid: Grid
    W: np.ndarray
    sub_nodes: int = SUB_NODES

    @property
    def m(self) -> int:
        return self.kernel.m

    def row_weights(self, t: float) -> np.ndarray:
        """(m+1, n) weights for evaluating the image at an arbitrary t in [0, T]."""
        sigma, omega, H = _hat_rule(self.grid, extra=[t], sub_nodes=self.sub_nodes)
        out = np.empty((self.m + 1, self.grid.n))
        for i in range(self.m + 1):
            out[i] = (self.kernel.eval_deriv(i, np.full_like(sigma, t), sigma) * omega) @ H
        return out

    def apply(self, F: np.ndarray, lam: float) -> np.ndarray:
        return lam * np.einsum("ipq,q->ip", self.W, F)


def discretize(K: KernelSurface, grid: Grid, sub_nodes: int = SUB_NODES) -> DiscreteOperator:
    if grid.nodes.min() < 0 or grid.nodes.max() > K.length + 1e-15:
        raise ValueError("grid must lie inside [0, T]")
    sigma, omega, H = _hat_rule(grid, sub_nodes=sub_nodes)
    t = grid.nodes[:, None]
    W = np.empty((K.m + 1, grid.n, grid.n))
    for i in range(K.m + 1):
        W[i] = (K.eval_deriv(i, t, sigma[None, :]) * omega) @ H
    return DiscreteOperator(K, grid, W, sub_nodes)


def nonlinearity_values(f: NonlinearitySpec, grid: Grid, U: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(f(grid.nodes, U), dtype=float)
    except EvaluationDomainError as err:
        raise EvaluationDomainError(f"nonlinearity failed on the grid: {err}", err.inputs) from err


def image(ops: DiscreteOperator, f: NonlinearitySpec, lam: float, U: np.ndarray) -> np.ndarray:
    return ops.apply(nonlinearity_values(f, ops.grid, U), lam)


def residual(ops: DiscreteOperator, f: NonlinearitySpec, lam: float, U: np.ndarray) -> float:
    """max over orders and nodes of |U - Phi(U)|."""
    return float(np.max(np.abs(U - image(ops, f, lam, U))))


# cone membership -----------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    sign: dict[int, tuple[float, float]]
    harnack: dict[int, tuple[tuple[float, float], tuple[float, float], float]]

    @classmethod
    def from_report(cls, report: HypothesisReport) -> ConeSpec:
        sign = {i: (iv.lo, iv.hi) for i, iv in enumerate(report.sign_intervals)
                if i in report.J0 and iv is not None}
        harnack = {j: (c.ab, c.cd, c.xi) for j, c in sorted(report.cones.items())}
        return cls(sign, harnack)


@dataclass(frozen=True)
class ConeVerdict:
    label: str
    passed: bool
    value: float
    bound: float
    note: str = ""


@dataclass(frozen=True)
class ConeReport:
    verdicts: tuple[ConeVerdict, ...]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _samples(nodes, U_row, lo, hi, evaluate, order):
    inside = (nodes >= lo) & (nodes <= hi)
    vals = list(U_row[inside])
    if evaluate is not None:
        vals.extend(evaluate(t)[order] for t in {lo, hi})
    return np.array(vals, dtype=float)


def cone_check(sol, cone: ConeSpec, slack: float = 1e-8) -> ConeReport:
    """Check sign and Harnack-type conditions on the nodes (and interval ends when available)."""
    nodes = sol.grid.nodes
    U = sol.U
    evaluate = getattr(sol, "evaluate", None)
    out = []
    for i, (lo, hi) in sorted(cone.sign.items()):
        vals = _samples(nodes, U[i], lo, hi, evaluate, i)
        if vals.size == 0:
            out.append(ConeVerdict(f"sign u^({i}) on [{lo:.6g}, {hi:.6g}]", True, math.nan, -slack,
                                   "no sample points"))
            continue
        low = float(vals.min())
        out.append(ConeVerdict(f"sign u^({i}) on [{lo:.6g}, {hi:.6g}]", low >= -slack, low, -slack))
    for j, (ab, cd, xi) in sorted(cone.harnack.items()):
        low_vals = _samples(nodes, U[j], ab[0], ab[1], evaluate, j)
        top_vals = _samples(nodes, U[j], cd[0], cd[1], evaluate, j)
        low = float(low_vals.min()) if low_vals.size else math.inf
        bound = xi * (float(np.abs(top_vals).max()) if top_vals.size else 0.0) - slack
        out.append(ConeVerdict(f"min u^({j}) on [{ab[0]:.6g}, {ab[1]:.6g}] >= {xi:.6g} max |u^({j})|",
                               low >= bound, low, bound))
    return ConeReport(tuple(out))


# Picard iteration -------------------------------------------------------------------

@dataclass
class Solution:
    grid: Grid
    U: np.ndarray
    lam: float
    iterations: int
    residual: float
    history: list[float]
    ops: DiscreteOperator = field(repr=False)
    f: NonlinearitySpec = field(repr=False)
    cone: ConeReport | None = None

    @property
    def norm(self) -> float:
        """max over orders of the sup norm on the grid (the norm of the space)."""
        return float(np.max(np.abs(self.U)))

    @property
    def trivial(self) -> bool:
        return self.norm < TRIVIAL_NORM

    def recompute_residual(self) -> float:
        return residual(self.ops, self.f, self.lam, self.U)

    def evaluate(self, t: float) -> np.ndarray:
        """Nystrom interpolation of (u, u', ..., u^(m)) at any t in [0, T]."""
        F = nonlinearity_values(self.f, self.grid, self.U)
        return self.lam * self.ops.row_weights(float(t)) @ F

    def evaluate_many(self, ts: Sequence[float]) -> np.ndarray:
        return np.stack([self.evaluate(t) for t in ts], axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [_label(i) for i in range(self.U.shape[0])])
        for p, t in enumerate(self.grid.nodes):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in self.U[:, p]])
        return buf.getvalue()


def _label(i: int) -> str:
    return "u" if i == 0 else "u" + "'" * i if i <= 3 else f"u^({i})"


def picard_solve(ops: DiscreteOperator, f: NonlinearitySpec, lam: float,
                 u0: np.ndarray | float | None = None, damping: float = 1.0,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Solution:
    """Iterate U <- (1 - theta) U + theta Phi(U) until the residual drops below ``tol``."""
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    shape = (ops.m + 1, ops.grid.n)
    if u0 is None:
        U = np.zeros(shape)
    else:
        U = np.broadcast_to(np.asarray(u0, dtype=float), shape).copy()
    if f.m != ops.m:
        raise ValueError(f"nonlinearity has m={f.m} but kernel has m={ops.m}")
    history: list[float] = []
    for it in range(max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            PU = image(ops, f, lam, U)
            res = float(np.max(np.abs(U - PU)))
        history.append(res)
        if not math.isfinite(res) or res > BLOWUP:
            raise DivergenceError(f"iteration diverged at step {it} (residual {res:.3g})", history, it)
        if res < tol:
            return Solution(ops.grid, U, lam, it, res, history, ops, f)
        U = (1.0 - damping) * U + damping * PU
    raise DivergenceError(f"no convergence in {max_iter} iterations (residual {history[-1]:.3g})",
                          history, max_iter)


def solve(K: KernelSurface, f: NonlinearitySpec, lam: float, n: int = DEFAULT_NODES,
          cone: ConeSpec | None = None, slack: float = 1e-8, **kw) -> Solution:
    ops = discretize(K, Grid.composite(n, K.length))
    sol = picard_solve(ops, f, lam, **kw)
    if cone is not None:
        sol.cone = cone_check(sol, cone, slack)
    return sol


def plot_solution(sol: Solution, path) -> None:
    """SVG line plot of u and its derivatives (deterministic output)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(sol.U.shape[0]):
        ax.plot(sol.grid.nodes, sol.U[i], label=_label(i))
    ax.set_xlabel("t")
    ax.set_title(f"lambda = {sol.lam:g}")
    ax.legend()
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "hammerstein"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
