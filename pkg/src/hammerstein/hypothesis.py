"""Numerical checks of the kernel hypotheses: sign intervals, envelopes and cone data.

Polynomial kernels are analysed exactly in the sampled variable (critical
points of univariate sections), so their envelopes carry no safety margin.
Black-box kernels are sampled densely and refined by golden-section search;
their envelopes are inflated and their cone constants deflated by ``safety``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import HypothesisViolation, NoValidXiError
from .kernel import KernelSurface
from .optimize import golden_section_min, refine_grid_extremum
from .quadrature import composite_rule, panel_breakpoints

log = logging.getLogger(__name__)

DEFAULT_SAFETY = 1e-6
XI_CEILING = 1.0 - 1e-9
ENVELOPE_PANELS = 64
ENVELOPE_NODES = 8
SIGN_GRID = 201
XI_GRID = 2001
REFINE_TOL = 1e-9


def default_safety(K: KernelSurface) -> float:
    return 0.0 if K.exact else DEFAULT_SAFETY


# sign intervals ---------------------------------------------------------------

@dataclass(frozen=True)
class SignInterval:
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, t, tol: float = 0.0):
        t = np.asarray(t)
        return (t >= self.lo - tol) & (t <= self.hi + tol)

    def covers(self, lo: float, hi: float, tol: float = 1e-12) -> bool:
        return self.lo <= lo + tol and self.hi >= hi - tol

    def __iter__(self):
        yield self.lo
        yield self.hi


def _min_over_s(K: KernelSurface, i: int, t: float) -> float:
    return K.extrema_in_s(i, t)[0]


def sign_interval(K: KernelSurface, i: int, grid_density: int = SIGN_GRID,
                  refine_tol: float = REFINE_TOL, sign_tol: float | None = None) -> SignInterval | None:
    """Largest [m_i, n_i] on which t -> min_s d^i k(t, s) stays >= -sign_tol.

    The longest run of qualifying grid points wins (the first one on ties);
    its ends are then pushed outwards by bisection to width ``refine_tol``.
    ``sign_tol`` defaults to rounding level for polynomial kernels, where a
    quadratic contact with zero would otherwise shift the ends, and to
    ``refine_tol`` for black-box kernels.
    """
    if grid_density < 101:
        raise ValueError("grid_density must be >= 101")
    L = K.length
    t = np.linspace(0.0, L, grid_density)
    g = np.array([_min_over_s(K, i, x) for x in t])
    if sign_tol is None:
        sign_tol = 1e-14 * max(1.0, float(np.max(np.abs(g)))) if K.exact else refine_tol
    good = g >= -sign_tol
    if not good.any():
        return None
    best, start = (0, 0), None
    for p, ok in enumerate(np.append(good, False)):
        if ok and start is None:
            start = p
        elif not ok and start is not None:
            if p - start > best[1] - best[0]:
                best = (start, p)
            start = None
    first, last = best[0], best[1] - 1

    def ok_at(x):
        return _min_over_s(K, i, x) >= -sign_tol

    def bisect(inside, outside):
        while abs(outside - inside) > refine_tol:
            mid = 0.5 * (inside + outside)
            if ok_at(mid):
                inside = mid
            else:
                outside = mid
        return inside

    lo = t[first] if first == 0 else bisect(t[first], t[first - 1])
    hi = t[last] if last == grid_density - 1 else bisect(t[last], t[last + 1])
    if hi - lo < 10 * refine_tol:
        # only an isolated point qualifies; report it exactly
        anchor = t[first]
        return SignInterval(float(anchor), float(anchor))
    return SignInterval(float(lo), float(hi))


# envelopes ----------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """h_i(s) = max_t |d^i k(t, s)| tabulated on quadrature nodes.

    Calling the envelope at arbitrary ``s`` recomputes the maximum directly
    for polynomial kernels and interpolates the table otherwise.
    """

    order: int
    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray | None
    kernel: KernelSurface | None = field(default=None, repr=False)
    closed_form: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    safety: float = 0.0

    def raw(self, s):
        s = np.asarray(s, dtype=float)
        if self.closed_form is not None:
            return np.broadcast_to(np.asarray(self.closed_form(s), dtype=float), s.shape)
        if self.kernel is not None and self.kernel.exact:
            flat = np.array([_abs_max_in_t(self.kernel, self.order, x) for x in s.ravel()])
            return flat.reshape(s.shape)
        return np.interp(s, self.nodes, self.values)

    def __call__(self, s):
        out = self.raw(s) * (1.0 + self.safety)
        return out if np.ndim(out) else float(out)

    @property
    def inflated(self) -> np.ndarray:
        return self.values * (1.0 + self.safety)

    def integral(self, lo: float | None = None, hi: float | None = None,
                 panels: int = ENVELOPE_PANELS, nodes_per_panel: int = ENVELOPE_NODES) -> float:
        """Integral of the inflated envelope over [lo, hi] (the full table by default)."""
        if lo is None and hi is None and self.weights is not None:
            return float(np.dot(self.weights, self.inflated))
        lo = float(self.nodes[0]) if lo is None else lo
        hi = float(self.nodes[-1]) if hi is None else hi
        if hi <= lo:
            return 0.0
        x, w = composite_rule(panel_breakpoints(lo, hi, panels), nodes_per_panel)
        return float(np.dot(w, self(x)))


def _abs_max_in_t(K: KernelSurface, i: int, s: float, lo: float = 0.0, hi: float | None = None) -> float:
    a, b = K.extrema_in_t(i, s, lo, hi)
    return max(-a, b, 0.0)


def envelope_grid(K: KernelSurface, panels: int = ENVELOPE_PANELS,
                  nodes_per_panel: int = ENVELOPE_NODES) -> tuple[np.ndarray, np.ndarray]:
    return composite_rule(panel_breakpoints(0.0, K.length, panels), nodes_per_panel)


def envelope(K: KernelSurface, i: int, s_grid: Sequence[float] | None = None,
             weights: Sequence[float] | None = None, safety: float | None = None,
             closed_form: Callable | None = None) -> Envelope:
    """Tabulate h_i on ``s_grid`` (composite Gauss-Legendre nodes by default)."""
    K._check_order(i)
    if s_grid is None:
        s_grid, weights = envelope_grid(K)
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0:
        raise ValueError("s_grid must be nonempty")
    if s_grid.min() < 0 or s_grid.max() > K.length:
        raise ValueError("s_grid must lie inside [0, T]")
    values = np.array([_abs_max_in_t(K, i, s) for s in s_grid])
    w = None if weights is None else np.asarray(weights, dtype=float)
    return Envelope(i, s_grid, values, w, kernel=K, closed_form=closed_form,
                    safety=default_safety(K) if safety is None else safety)


# cone constants -----------------------------------------------------------------

@dataclass(frozen=True)
class XiResult:
    value: float
    raw: float
    argmin: tuple[float, float]
    clamped: bool
    dominance_ok: bool
    dominance_excess: float
    notes: tuple[str, ...] = ()


def _min_in_t(K, j, s, ab):
    return K.extrema_in_t(j, s, ab[0], ab[1])[0]


def xi_constant(K: KernelSurface, j: int, ab: tuple[float, float], cd: tuple[float, float],
                phi: Callable, grid: int = XI_GRID, safety: float | None = None,
                tol: float = REFINE_TOL) -> XiResult:
    """Largest xi with d^j k(t, s) >= xi phi(s) on ab x I, clamped below 1.

    Also measures how far |d^j k| exceeds phi on cd x I (dominance).
    """
    L = K.length
    a, b = map(float, ab)
    c, d = map(float, cd)
    if not (0 <= a <= b <= L and 0 <= c <= d <= L):
        raise ValueError(f"intervals {ab}, {cd} must lie inside [0, {L}]")
    safety = default_safety(K) if safety is None else safety
    s = np.linspace(0.0, L, grid)
    kmin = np.array([_min_in_t(K, j, x, (a, b)) for x in s])
    phis = np.asarray(phi(s), dtype=float)
    if np.any(phis < 0):
        raise ValueError("phi must be nonnegative")
    scale = max(float(np.max(np.abs(kmin))), float(np.max(phis)), 1e-300)

    # nonnegativity on ab x I comes first
    worst = int(np.argmin(kmin))
    t_star, s_star = _argmin_in_t(K, j, s[worst], (a, b)), s[worst]
    if kmin[worst] < -tol * scale:
        raise HypothesisViolation(
            f"order-{j} kernel derivative is negative on [{a:g}, {b:g}] x I: "
            f"value {kmin[worst]:.3g} at t={t_star:.6g}, s={s_star:.6g}")

    live = phis > 1e-14 * float(np.max(phis)) if np.max(phis) > 0 else np.zeros_like(phis, bool)
    if not live.any():
        raise NoValidXiError(f"phi vanishes identically for order {j}")
    ratio = np.where(live, kmin / np.where(live, phis, 1.0), np.inf)

    def q(x):
        p = float(np.asarray(phi(np.array([x])))[0])
        if p <= 1e-14 * float(np.max(phis)):
            return math.inf
        return _min_in_t(K, j, x, (a, b)) / p

    s_best, raw = refine_grid_extremum(q, s, ratio, mode="min")
    raw = min(raw, float(np.min(ratio)))
    if not raw > 0:
        raise NoValidXiError(f"order {j}: inf of d^j k / phi over [{a:g}, {b:g}] x I is {raw:.3g} <= 0")
    notes = []
    value = raw / (1.0 + safety)
    clamped = value > XI_CEILING
    if clamped:
        notes.append(f"xi_{j} ratio reaches {raw:.12g}; clamped to 1 - 1e-9")
        value = XI_CEILING

    # dominance |d^j k| <= phi on cd x I
    amax = np.array([_abs_max_in_t(K, j, x, c, d) for x in s])
    excess = float(np.max(amax - phis * (1.0 + 1e-9) - tol * scale))
    dominance_ok = excess <= 0
    if not dominance_ok:
        notes.append(f"|d^{j} k| exceeds phi_{j} on [{c:g}, {d:g}] x I by {excess:.3g}")
    return XiResult(float(value), float(raw), (float(_argmin_in_t(K, j, s_best, (a, b))), float(s_best)),
                    clamped, dominance_ok, max(excess, 0.0), tuple(notes))


def _argmin_in_t(K, j, s, ab):
    a, b = ab
    if b <= a:
        return a
    x, _ = golden_section_min(lambda t: float(K.eval_deriv(j, t, s)), a, b, 1e-10)
    return x


# declarations and classification ------------------------------------------------

@dataclass(frozen=True)
class ConeDecl:
    """User choice of [a_j, b_j], [c_j, d_j], phi_j (None means h_j) and an optional xi_j."""

    order: int
    ab: tuple[float, float]
    cd: tuple[float, float]
    phi: Callable | None = None
    phi_text: str = "auto"
    xi: float | None = None


@dataclass(frozen=True)
class ConeData:
    order: int
    ab: tuple[float, float]
    cd: tuple[float, float]
    phi: Callable = field(repr=False)
    phi_text: str
    xi_computed: float
    xi: float
    phi_integral: float
    xi_result: XiResult = field(repr=False)

    @property
    def lambda_low(self) -> float:
        """xi_j times the integral of phi_j over [a_j, b_j]."""
        return self.xi * self.phi_integral


@dataclass(frozen=True)
class HypothesisReport:
    kernel_name: str
    m: int
    T: float
    sign_intervals: tuple[SignInterval | None, ...]
    envelopes: tuple[Envelope, ...]
    cones: dict[int, ConeData]
    J0: frozenset[int]
    J1: frozenset[int]
    J2: frozenset[int]
    h2: bool
    h4: bool
    h5: bool
    h5_tilde: bool
    notes: tuple[str, ...] = ()
    rejected: dict[int, str] = field(default_factory=dict)

    @property
    def c(self) -> float | None:
        return min(self.cones[j].xi for j in self.J2) if self.J2 else None

    def interval(self, j: int) -> tuple[float, float]:
        return self.cones[j].ab


def _phi_integral(phi: Callable, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    x, w = composite_rule(panel_breakpoints(a, b, ENVELOPE_PANELS), ENVELOPE_NODES)
    return float(np.dot(w, np.asarray(phi(x), dtype=float)))


def _is_full(iv: tuple[float, float], L: float, tol: float = 1e-12) -> bool:
    return abs(iv[0]) <= tol and abs(iv[1] - L) <= tol


def classify(K: KernelSurface, decls: Sequence[ConeDecl] = (), *,
             sign_grid: int = SIGN_GRID, refine_tol: float = REFINE_TOL,
             xi_grid: int = XI_GRID, safety: float | None = None,
             envelopes: Sequence[Envelope] | None = None) -> HypothesisReport:
    """Assemble the full hypothesis report for ``K`` and the cone declarations."""
    L = K.length
    notes = ["diagonal-kink regularity of the top derivative is assumed from the kernel representation"]
    intervals = tuple(sign_interval(K, i, sign_grid, refine_tol) for i in range(K.m + 1))
    if envelopes is None:
        envelopes = tuple(envelope(K, i, safety=safety) for i in range(K.m + 1))
    envelopes = tuple(envelopes)
    for env in envelopes:
        if not np.any(env.values > 0):
            notes.append(f"h_{env.order} vanishes on the grid")
    J0 = frozenset(i for i, iv in enumerate(intervals) if iv is not None)
    if not J0:
        notes.append("H2 fails: no derivative order has a nonnegative t-interval")

    cones: dict[int, ConeData] = {}
    rejected: dict[int, str] = {}
    for decl in sorted(decls, key=lambda d: d.order):
        j = decl.order
        K._check_order(j)
        if j in cones or j in rejected:
            raise ValueError(f"order {j} declared twice")
        phi = decl.phi if decl.phi is not None else envelopes[j]
        if j not in J0:
            rejected[j] = f"order {j} has no sign interval"
            continue
        try:
            res = xi_constant(K, j, decl.ab, decl.cd, phi, xi_grid, safety, refine_tol)
        except HypothesisViolation as err:
            rejected[j] = str(err)
            continue
        notes.extend(res.notes)
        if not res.dominance_ok:
            rejected[j] = f"phi_{j} does not dominate on [c, d]"
            continue
        integral = _phi_integral(phi, *map(float, decl.ab))
        if not integral > 0:
            rejected[j] = f"integral of phi_{j} over [a, b] is not positive"
            continue
        xi = res.value
        if decl.xi is not None:
            if 0 < decl.xi <= res.value * (1 + 1e-12):
                xi = float(decl.xi)
            else:
                notes.append(f"declared xi_{j}={decl.xi:g} exceeds computed {res.value:.8g}; using computed")
        cones[j] = ConeData(j, tuple(map(float, decl.ab)), tuple(map(float, decl.cd)), phi,
                            decl.phi_text, res.value, xi, integral, res)
    for j, why in rejected.items():
        notes.append(f"cone declaration for order {j} rejected: {why}")

    J1 = frozenset(cones)
    J2 = frozenset(j for j in J1 if _is_full(cones[j].cd, L))
    h4 = bool(J1)
    if not h4:
        notes.append("H4 fails: no order carries valid cone data")

    def prefix_in_J0(i0):
        return all(k in J0 for k in range(i0 + 1))

    h5 = any(prefix_in_J0(i0) and ((i0 in J1 and _is_full(cones[i0].cd, L))
                                    or (intervals[i0] is not None and intervals[i0].covers(0.0, L)))
             for i0 in J0)
    h5_tilde = any(prefix_in_J0(i0) for i0 in J2)
    if not h5:
        notes.append("H5 fails: the cone may contain a line")
    if not h5_tilde:
        notes.append("H5~ fails: J_2 is empty or not preceded by sign intervals; multiplicity analysis unavailable")
    return HypothesisReport(K.name, K.m, L, intervals, envelopes, cones, J0, J1, J2,
                            bool(J0), h4, h5, h5_tilde, tuple(notes), rejected)
