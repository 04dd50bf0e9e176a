"""Constants and lambda-windows for existence and multiplicity of cone solutions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expression as ex
from .errors import DegenerateMError, IncompleteReportError
from .hypothesis import HypothesisReport
from .kernel import KernelSurface
from .nonlinearity import DEFAULT_BOX_SAMPLES, DEFAULT_SEED, NonlinearitySpec, box_extremum
from .optimize import refine_grid_extremum

log = logging.getLogger(__name__)

T_GRID = 201
RHO_MIN, RHO_MAX, RHO_COUNT = 1e-4, 1e2, 64


def _inv(x: float) -> float:
    """Reciprocal with 1/0 = inf and 1/inf = 0."""
    if x == 0:
        return math.inf
    if math.isinf(x):
        return 0.0
    return 1.0 / x


# lambda windows -------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaWindow:
    """Open interval (lo, hi) of admissible lambda."""

    lo: float
    hi: float
    diagnostic: str = ""
    certified: bool = False

    @classmethod
    def empty(cls, diagnostic: str) -> LambdaWindow:
        return cls(math.nan, math.nan, diagnostic)

    @property
    def is_empty(self) -> bool:
        return not (self.lo < self.hi)

    def contains(self, lam: float) -> bool:
        return not self.is_empty and self.lo < lam < self.hi

    def __str__(self) -> str:
        if self.is_empty:
            return "empty"
        return f"({_fmt(self.lo)}, {_fmt(self.hi)})"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.10g}"


# constants from the hypothesis report ----------------------------------------------

def lambda_bars(report: HypothesisReport) -> tuple[tuple[float, ...], dict[int, float], float, float]:
    """(Lambda^i per order, Lambda_j per j in J_1, bar Lambda, underline Lambda)."""
    if len(report.envelopes) != report.m + 1:
        raise IncompleteReportError(f"expected {report.m + 1} envelopes, found {len(report.envelopes)}")
    up = []
    for i, env in enumerate(report.envelopes):
        if env is None:
            raise IncompleteReportError(f"missing envelope h_{i}")
        up.append(env.integral())
    low = {j: report.cones[j].lambda_low for j in sorted(report.J1)}
    bar = (report.m + 1) * max(up)
    lam = max((report.cones[j].xi * low[j] for j in low), default=0.0)
    return tuple(up), low, bar, lam


def existence_window(bar: float, lam: float, f0: float, finf: float) -> LambdaWindow:
    """Existence window (1/(Lambda f_0), 1/(bar Lambda f^inf)) when bar Lambda f^inf < Lambda f_0."""
    if f0 == 0 and math.isinf(finf):
        return LambdaWindow.empty("f_0 = 0 and f^inf = inf: no existence window")
    if not (bar > 0 and lam > 0):
        return LambdaWindow.empty("empty window: degenerate kernel constants (bar Lambda or Lambda is 0)")
    upper = bar * finf
    lower = lam * f0
    if not upper < lower:
        return LambdaWindow.empty(f"bar Lambda f^inf >= Lambda f_0 ({_fmt(upper)} >= {_fmt(lower)})")
    return LambdaWindow(_inv(lower), _inv(upper))


def _sup_over_t(func, lo: float, hi: float, grid: int = T_GRID) -> tuple[float, float]:
    t = np.linspace(lo, hi, grid)
    vals = np.array([func(x) for x in t])
    return refine_grid_extremum(func, t, vals, mode="max")


def _inf_over_t(func, lo: float, hi: float, grid: int = T_GRID) -> tuple[float, float]:
    t = np.linspace(lo, hi, grid)
    vals = np.array([func(x) for x in t])
    return refine_grid_extremum(func, t, vals, mode="min")


def compute_N(K: KernelSurface, grid: int = T_GRID) -> tuple[float, tuple[float, ...]]:
    """N and the per-order values sup_t of the integral of |d^i k(t, .)|; N = 1/max."""
    comps = []
    for i in range(K.m + 1):
        _, v = _sup_over_t(lambda t, i=i: K.integral_in_s(i, t, absolute=True), 0.0, K.length, grid)
        comps.append(float(v))
    return _inv(max(comps)), tuple(comps)


def compute_M(K: KernelSurface, i: int, ab: tuple[float, float], grid: int = T_GRID) -> float:
    """M_i, the reciprocal of inf over t in ab of the integral of d^i k(t, .) over ab."""
    a, b = map(float, ab)
    if not b > a:
        raise DegenerateMError(f"[a_{i}, b_{i}] = [{a:g}, {b:g}] has zero width")
    _, v = _inf_over_t(lambda t: K.integral_in_s(i, t, a, b), a, b, grid)
    if not v > 0:
        raise DegenerateMError(f"inf of the integral of d^{i} k over [{a:g}, {b:g}] is {v:.3g} <= 0")
    return 1.0 / v


# nonlinearity over boxes -----------------------------------------------------------

def f_rho_sup(f: NonlinearitySpec, rho: float, T: float = 1.0, samples: int = DEFAULT_BOX_SAMPLES,
              seed: int = DEFAULT_SEED) -> float:
    """f^rho = sup of f / rho over t in [0, T], x in [-rho, rho]^(m+1)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if f.rho_sup_closed is not None:
        return float(ex.evaluate(f.rho_sup_closed, {"r": rho}))
    box = box_extremum(f, (0.0, T), [-rho] * (f.m + 1), [rho] * (f.m + 1), "max", samples, seed)
    return box.value / rho


def inf_box(report: HypothesisReport, i: int, rho: float) -> tuple[tuple[float, float], list[float]]:
    """t-range and upper state bounds of the box used by f^i_rho."""
    a, b = report.cones[i].ab
    upper = [rho / report.cones[j].xi if j in report.J2 else rho for j in range(report.m + 1)]
    return (a, b), upper


def f_rho_inf(f: NonlinearitySpec, rho: float, i: int, report: HypothesisReport,
              samples: int = DEFAULT_BOX_SAMPLES, seed: int = DEFAULT_SEED) -> float:
    """f^i_rho = inf of f / rho over t in [a_i, b_i] and the nonnegative state box."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if i in f.rho_inf_closed:
        return float(ex.evaluate(f.rho_inf_closed[i], {"r": rho}))
    t_range, upper = inf_box(report, i, rho)
    box = box_extremum(f, t_range, [0.0] * (f.m + 1), upper, "min", samples, seed)
    return max(box.value, 0.0) / rho


def check_I1(lam: float, rho: float, N: float, f_sup: float) -> bool:
    """lambda f^rho / N < 1."""
    return lam * f_sup / N < 1 if N > 0 else False


def check_I0(lam: float, rho: float, i: int, M: float, f_inf: float) -> bool:
    """lambda f^i_rho / M_i > 1."""
    return lam * f_inf / M > 1


# multiplicity -------------------------------------------------------------------------

CONDITIONS: dict[str, tuple[str, ...]] = {
    "C1": ("I0", "I1"),
    "C2": ("I1", "I0"),
    "C3": ("I0", "I1", "I0"),
    "C4": ("I1", "I0", "I1"),
    "C5": ("I0", "I1", "I0", "I1"),
    "C6": ("I1", "I0", "I1", "I0"),
}

SOLUTIONS = {"C1": 1, "C2": 1, "C3": 2, "C4": 2, "C5": 3, "C6": 3}


def alternating_chain(first: str, levels: int) -> tuple[str, ...]:
    """I0/I1 alternation of any length; C1-C6 are the chains of length 2 to 4."""
    other = {"I0": "I1", "I1": "I0"}
    chain = [first]
    for _ in range(levels - 1):
        chain.append(other[chain[-1]])
    return tuple(chain)


def chain_ordered(chain: Sequence[str], rhos: Sequence[float], c: float) -> bool:
    """After an I0 level the next radius must exceed rho / c, after an I1 level rho itself."""
    for kind, r, r_next in zip(chain, rhos, rhos[1:]):
        bound = r / c if kind == "I0" else r
        if not bound < r_next:
            return False
    return True


@dataclass
class RhoProfile:
    """f^rho and f^i_rho tabulated on an ascending rho grid."""

    rhos: np.ndarray
    f_sup: np.ndarray
    f_inf: dict[int, np.ndarray]

    def i1_bound(self, N: float) -> np.ndarray:
        """I1 holds at rho iff lambda is below this value."""
        with np.errstate(divide="ignore"):
            return np.where(self.f_sup > 0, N / np.where(self.f_sup > 0, self.f_sup, 1.0), np.inf)

    def i0_bound(self, M: dict[int, float]) -> tuple[np.ndarray, np.ndarray]:
        """I0 holds at rho iff lambda exceeds this value; also the best order per rho."""
        best = np.full(self.rhos.shape, np.inf)
        arg = np.full(self.rhos.shape, -1)
        for i, Mi in sorted(M.items()):
            fi = self.f_inf[i]
            with np.errstate(divide="ignore"):
                b = np.where(fi > 0, Mi / np.where(fi > 0, fi, 1.0), np.inf)
            better = b < best
            best = np.where(better, b, best)
            arg = np.where(better, i, arg)
        return best, arg


def rho_grid(rho_min: float = RHO_MIN, rho_max: float = RHO_MAX, count: int = RHO_COUNT) -> np.ndarray:
    if not 0 < rho_min < rho_max or count < 2:
        raise ValueError("need 0 < rho_min < rho_max and count >= 2")
    return np.geomspace(rho_min, rho_max, count)


def rho_profile(f: NonlinearitySpec, report: HypothesisReport, rhos: Sequence[float],
                orders: Sequence[int] | None = None, samples: int = DEFAULT_BOX_SAMPLES,
                seed: int = DEFAULT_SEED) -> RhoProfile:
    rhos = np.asarray(rhos, dtype=float)
    orders = sorted(report.J1) if orders is None else list(orders)
    sup = np.array([f_rho_sup(f, r, report.T, samples, seed) for r in rhos])
    inf = {i: np.array([f_rho_inf(f, r, i, report, samples, seed) for r in rhos]) for i in orders}
    return RhoProfile(rhos, sup, inf)


@dataclass(frozen=True)
class MultiplicityRecord:
    condition: str
    chain: tuple[str, ...]
    rhos: tuple[float, ...]
    orders: tuple[int | None, ...]
    window: LambdaWindow
    solutions: int


@dataclass(frozen=True)
class MultiplicityResult:
    lam: float
    records: tuple[MultiplicityRecord, ...]
    i0_any: bool
    i1_any: bool
    diagnostics: tuple[str, ...] = ()

    @property
    def conditions(self) -> tuple[str, ...]:
        return tuple(r.condition for r in self.records)


def find_chain(chain: Sequence[str], lam: float, profile: RhoProfile, N: float,
               M: dict[int, float], c: float) -> tuple[tuple[float, ...], tuple[int | None, ...], LambdaWindow] | None:
    """Greedy witness: the smallest admissible radius at every level of the chain."""
    up = profile.i1_bound(N)
    low, arg = profile.i0_bound(M)
    ok = {"I1": lam < up, "I0": lam > low}
    picks: list[int] = []
    bound = 0.0
    for kind in chain:
        cand = np.nonzero(ok[kind] & (profile.rhos > bound))[0]
        if cand.size == 0:
            return None
        p = int(cand[0])
        picks.append(p)
        bound = profile.rhos[p] / c if kind == "I0" else profile.rhos[p]
    rhos = tuple(float(profile.rhos[p]) for p in picks)
    orders = tuple(int(arg[p]) if kind == "I0" else None for kind, p in zip(chain, picks))
    lo = max((float(low[p]) for kind, p in zip(chain, picks) if kind == "I0"), default=0.0)
    hi = min((float(up[p]) for kind, p in zip(chain, picks) if kind == "I1"), default=math.inf)
    return rhos, orders, LambdaWindow(lo, hi)


def multiplicity_search(lam: float, profile: RhoProfile, N: float, M: dict[int, float],
                        report: HypothesisReport,
                        conditions: dict[str, tuple[str, ...]] = CONDITIONS) -> MultiplicityResult:
    """Check every condition chain at one lambda on the tabulated rho grid."""
    diagnostics = []
    if not report.h5_tilde or report.c is None:
        return MultiplicityResult(lam, (), False, False,
                                  ("multiplicity unavailable: H5~ fails (J_2 empty)",))
    c = report.c
    up = profile.i1_bound(N)
    low, _ = profile.i0_bound(M)
    i1_any = bool(np.any(lam < up))
    i0_any = bool(np.any(lam > low))
    if not M:
        diagnostics.append("no order in J_1 has a usable M_i")
    if not i0_any:
        diagnostics.append("no rho on the grid satisfies I0")
    if not i1_any:
        diagnostics.append("no rho on the grid satisfies I1")
    records = []
    for name, chain in conditions.items():
        hit = find_chain(chain, lam, profile, N, M, c)
        if hit is None:
            continue
        rhos, orders, window = hit
        assert chain_ordered(chain, rhos, c)
        records.append(MultiplicityRecord(name, tuple(chain), rhos, orders, window,
                                          SOLUTIONS.get(name, len(chain) - 1)))
    return MultiplicityResult(lam, tuple(records), i0_any, i1_any, tuple(diagnostics))


@dataclass(frozen=True)
class BestC1:
    window: LambdaWindow
    rho2: float
    rho1: float | None
    order: int | None
    note: str


def best_lambda_window_C1(f: NonlinearitySpec, report: HypothesisReport, N: float,
                          M: dict[int, float], rho_min: float = RHO_MIN, rho_max: float = RHO_MAX,
                          count: int = RHO_COUNT, samples: int = DEFAULT_BOX_SAMPLES,
                          seed: int = DEFAULT_SEED, tol: float = 1e-7,
                          profile: RhoProfile | None = None) -> BestC1:
    """Widest single-solution window from C1: sup of N / f^rho and the rho_1 -> 0 limit."""
    if not report.h5_tilde or report.c is None:
        return BestC1(LambdaWindow.empty("H5~ fails: C1 unavailable"), math.nan, None, None, "")
    if not M:
        return BestC1(LambdaWindow.empty("no usable M_i"), math.nan, None, None, "")
    c = report.c

    def right(logr):
        fs = f_rho_sup(f, math.exp(logr), report.T, samples, seed)
        return N / fs if fs > 0 else math.inf

    if profile is not None:
        logs = np.log(profile.rhos)
        vals = profile.i1_bound(N)
    else:
        logs = np.linspace(math.log(rho_min), math.log(rho_max), count)
        vals = np.array([right(x) for x in logs])
    if np.all(vals <= 0) or not np.any(np.isfinite(vals)):
        return BestC1(LambdaWindow.empty("f^rho is infinite: right endpoint 0"), math.nan, None, None, "")
    x_best, hi = refine_grid_extremum(right, logs, vals, mode="max", tol=tol)
    rho2 = math.exp(x_best)
    if not hi > 0:
        return BestC1(LambdaWindow.empty("right endpoint is 0"), rho2, None, None, "")

    # left endpoint: inf over admissible rho_1 < c rho_2 of M_i / f^i_rho1
    small = np.geomspace(min(rho_min, c * rho2) * 1e-6, min(rho_min, c * rho2), 4)
    best_order, limit_zero = None, False
    for i in sorted(M):
        mass = np.array([f_rho_inf(f, r, i, report, samples, seed) * r for r in small])
        # rho * f^i_rho is the inf of f itself; a positive floor sends M_i / f^i_rho to 0
        if mass.min() > 0 and mass.min() >= 0.5 * mass.max():
            best_order, limit_zero = i, True
            break
    if limit_zero:
        note = f"left endpoint is the rho_1 -> 0 limit (inf of f over the order-{best_order} box stays positive)"
        return BestC1(LambdaWindow(0.0, hi), rho2, 0.0, best_order, note)
    best = (math.inf, None, None)
    if profile is not None:
        low, arg = profile.i0_bound(M)
        for p in np.nonzero(profile.rhos < c * rho2)[0]:
            if low[p] < best[0]:
                best = (float(low[p]), float(profile.rhos[p]), int(arg[p]))
    elif c * rho2 > rho_min:
        for r in rho_grid(rho_min, c * rho2 * (1 - 1e-12), count):
            for i, Mi in sorted(M.items()):
                fi = f_rho_inf(f, r, i, report, samples, seed)
                if fi > 0 and Mi / fi < best[0]:
                    best = (Mi / fi, float(r), i)
    lo, rho1, order = best
    if not lo < hi:
        return BestC1(LambdaWindow.empty("no rho_1 below c rho_2 satisfies I0 inside the I1 range"),
                      rho2, rho1, order, "")
    return BestC1(LambdaWindow(lo, hi), rho2, rho1, order, "left endpoint attained at a grid rho_1")


# assembled certificate ---------------------------------------------------------------

@dataclass
class Certificate:
    lambda_up: tuple[float, ...]
    lambda_low: dict[int, float]
    lambda_bar: float
    lambda_: float
    N: float
    inv_N: tuple[float, ...]
    M: dict[int, float]
    c: float | None
    f0: float
    finf: float
    existence: LambdaWindow
    xi: dict[int, float] = field(default_factory=dict)
    multiplicity: list[MultiplicityResult] = field(default_factory=list)
    best_c1: BestC1 | None = None
    profile: RhoProfile | None = None
    sup_certified: bool = False
    inf_certified: bool = False
    diagnostics: list[str] = field(default_factory=list)

    @property
    def inv_M(self) -> dict[int, float]:
        return {i: 1.0 / v for i, v in self.M.items()}

    def recompute_lambda(self) -> float:
        return max((self.lambda_low[j] * xi for j, xi in self.xi.items()), default=0.0)

    @property
    def any_window(self) -> bool:
        if not self.existence.is_empty:
            return True
        if self.best_c1 is not None and not self.best_c1.window.is_empty:
            return True
        return any(r.records for r in self.multiplicity)


def certify(K: KernelSurface, report: HypothesisReport, f: NonlinearitySpec,
            lambdas: Sequence[float] = (), rhos: Sequence[float] | None = None,
            samples: int = DEFAULT_BOX_SAMPLES, seed: int = DEFAULT_SEED,
            best_window: bool = True) -> Certificate:
    """Every constant, the existence window and the multiplicity table for ``lambdas``."""
    if f.m != K.m:
        raise ValueError(f"nonlinearity has m={f.m} but kernel has m={K.m}")
    up, low, bar, lam = lambda_bars(report)
    N, inv_N = compute_N(K)
    diags: list[str] = []
    M: dict[int, float] = {}
    for j in sorted(report.J1):
        try:
            M[j] = compute_M(K, j, report.cones[j].ab)
        except DegenerateMError as err:
            diags.append(f"M_{j} unusable: {err}")
    window = existence_window(bar, lam, f.f0, f.finf)
    if window.is_empty:
        diags.append(window.diagnostic)
    cert = Certificate(up, low, bar, lam, N, inv_N, M, report.c, f.f0, f.finf, window,
                       xi={j: report.cones[j].xi for j in report.J1},
                       sup_certified=f.rho_sup_closed is not None,
                       inf_certified=all(j in f.rho_inf_closed for j in M) and bool(M),
                       diagnostics=diags)
    if not report.h5_tilde:
        diags.append("multiplicity unavailable: H5~ fails (J_2 empty)")
        return cert
    profile = None
    if lambdas or (best_window and M):
        grid = rho_grid() if rhos is None else np.asarray(rhos, dtype=float)
        profile = rho_profile(f, report, grid, sorted(M), samples, seed)
        cert.profile = profile
    if lambdas:
        cert.multiplicity = [multiplicity_search(float(x), profile, N, M, report) for x in lambdas]
    if best_window and M:
        kw = {}
        if rhos is not None:
            kw = dict(rho_min=float(np.min(rhos)), rho_max=float(np.max(rhos)), count=len(rhos))
        cert.best_c1 = best_lambda_window_C1(f, report, N, M, samples=samples, seed=seed,
                                             profile=profile, **kw)
    return cert
