"""Plain-text key = value reports with embedded CSV tables.

Reports depend only on the config and its flags: no timestamps, no absolute
paths, and every float goes through one formatter.
"""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .certificate import Certificate, LambdaWindow, RhoProfile
from .hypothesis import HypothesisReport
from .kernel import SignPatternReport
from .solver import ConeReport, Solution

MAX_DENOMINATOR = 100_000


def num(x: float | None) -> str:
    """Decimal with 12 significant digits, prefixed by a fraction when one matches to 1e-12."""
    if x is None:
        return "none"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    dec = f"{x:.12g}"
    fr = Fraction(x).limit_denominator(MAX_DENOMINATOR)
    if fr.denominator > 1 and abs(float(fr) - x) <= 1e-12 * max(1.0, abs(x)):
        return f"{fr} ({dec})"
    return dec


def interval(iv) -> str:
    if iv is None:
        return "none"
    lo, hi = iv
    return f"[{num(lo)}, {num(hi)}]"


def index_set(s: Iterable[int]) -> str:
    return "{" + ", ".join(str(i) for i in sorted(s)) + "}"


def boolean(b: bool) -> str:
    return "true" if b else "false"


class ReportWriter:
    def __init__(self):
        self.lines: list[str] = []

    def section(self, name: str) -> None:
        if self.lines:
            self.lines.append("")
        self.lines.append(f"[{name}]")

    def kv(self, key: str, value) -> None:
        self.lines.append(f"{key} = {value}")

    def block(self, text: str) -> None:
        self.lines.extend(text.rstrip("\n").split("\n"))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def window_status(window: LambdaWindow, certified: bool) -> str:
    if window.is_empty:
        return "empty"
    return "certified" if certified else "heuristic"


def write_hypotheses(w: ReportWriter, rep: HypothesisReport) -> None:
    w.section("hypotheses")
    for i, iv in enumerate(rep.sign_intervals):
        w.kv(f"sign_interval.{i}", interval(None if iv is None else (iv.lo, iv.hi)))
    w.kv("J0", index_set(rep.J0))
    w.kv("J1", index_set(rep.J1))
    w.kv("J2", index_set(rep.J2))
    w.kv("H2", boolean(rep.h2))
    w.kv("H4", boolean(rep.h4))
    w.kv("H5", boolean(rep.h5))
    w.kv("H5_tilde", boolean(rep.h5_tilde))
    for j, cone in sorted(rep.cones.items()):
        w.kv(f"cone.{j}.ab", interval(cone.ab))
        w.kv(f"cone.{j}.cd", interval(cone.cd))
        w.kv(f"cone.{j}.phi", cone.phi_text)
        w.kv(f"cone.{j}.xi_computed", num(cone.xi_computed))
        w.kv(f"cone.{j}.xi", num(cone.xi))
    for j, why in sorted(rep.rejected.items()):
        w.kv(f"rejected.{j}", why)
    for k, note in enumerate(rep.notes):
        w.kv(f"note.{k}", note)


def write_constants(w: ReportWriter, cert: Certificate) -> None:
    w.section("constants")
    for i, v in enumerate(cert.lambda_up):
        w.kv(f"Lambda_up.{i}", num(v))
    for j, v in sorted(cert.lambda_low.items()):
        w.kv(f"Lambda_low.{j}", num(v))
    w.kv("Lambda_bar", num(cert.lambda_bar))
    w.kv("Lambda", num(cert.lambda_))
    w.kv("N", num(cert.N))
    for i, v in enumerate(cert.inv_N):
        w.kv(f"inv_N.{i}", num(v))
    for j, v in sorted(cert.M.items()):
        w.kv(f"M.{j}", num(v))
        w.kv(f"inv_M.{j}", num(1.0 / v))
    w.kv("c", num(cert.c))
    w.kv("f0", num(cert.f0))
    w.kv("finf", num(cert.finf))


def condition_table(cert: Certificate) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["lambda", "condition", "chain", "rhos", "orders", "window", "solutions"])
    for res in cert.multiplicity:
        if not res.records:
            out.writerow([num(res.lam), "none", "", "", "", "", 0])
        for r in res.records:
            out.writerow([
                f"{res.lam:.12g}", r.condition, "-".join(r.chain),
                " ".join(f"{x:.6g}" for x in r.rhos),
                " ".join("-" if o is None else str(o) for o in r.orders),
                str(r.window), r.solutions,
            ])
    return buf.getvalue()


def certificate_report(config_name: str, rep: HypothesisReport, cert: Certificate,
                       f_text: str, seed: int, exact_kernel: bool) -> str:
    w = ReportWriter()
    w.section("problem")
    w.kv("config", config_name)
    w.kv("kernel", rep.kernel_name)
    w.kv("m", rep.m)
    w.kv("T", num(rep.T))
    w.kv("f", f_text)
    w.kv("seed", seed)
    write_hypotheses(w, rep)
    write_constants(w, cert)

    w.section("existence")
    w.kv("window", str(cert.existence))
    # with exact kernel constants the window is only as good as the declared limits
    w.kv("status", window_status(cert.existence, exact_kernel))
    if cert.existence.diagnostic:
        w.kv("diagnostic", cert.existence.diagnostic)

    w.section("multiplicity")
    certified = cert.sup_certified and cert.inf_certified
    w.kv("f_rho_sup", "closed form" if cert.sup_certified else "sampled")
    w.kv("f_rho_inf", "closed form" if cert.inf_certified else "sampled")
    if cert.best_c1 is not None:
        b = cert.best_c1
        w.kv("best_C1.window", str(b.window))
        w.kv("best_C1.status", window_status(b.window, certified))
        w.kv("best_C1.rho2", num(b.rho2))
        w.kv("best_C1.rho1", num(b.rho1))
        w.kv("best_C1.order", "none" if b.order is None else b.order)
        if b.note:
            w.kv("best_C1.note", b.note)
        if b.window.diagnostic:
            w.kv("best_C1.diagnostic", b.window.diagnostic)
    for k, res in enumerate(cert.multiplicity):
        w.kv(f"lambda.{k}", num(res.lam))
        w.kv(f"lambda.{k}.conditions", ",".join(res.conditions) or "none")
        w.kv(f"lambda.{k}.I0_satisfiable", boolean(res.i0_any))
        w.kv(f"lambda.{k}.I1_satisfiable", boolean(res.i1_any))
        w.kv(f"lambda.{k}.max_solutions", max((r.solutions for r in res.records), default=0))
        for d, msg in enumerate(res.diagnostics):
            w.kv(f"lambda.{k}.diagnostic.{d}", msg)
    w.kv("table", "csv")
    w.block(condition_table(cert))

    w.section("diagnostics")
    w.kv("any_window", boolean(cert.any_window))
    if not cert.any_window:
        w.kv("verdict", "empty window")
    for k, msg in enumerate(cert.diagnostics):
        w.kv(f"diagnostic.{k}", msg)
    return w.text()


def cone_lines(w: ReportWriter, cone: ConeReport | None) -> None:
    if cone is None:
        w.kv("cone", "not checked")
        return
    w.kv("cone", "pass" if cone.passed else "FAIL")
    for k, v in enumerate(cone.verdicts):
        w.kv(f"cone.{k}", f"{v.label}: {'pass' if v.passed else 'FAIL'} "
                          f"(value {v.value:.6g}, bound {v.bound:.6g})")


def solution_summary(config_name: str, sol: Solution, u0: float, shells: Sequence[float] = ()) -> str:
    w = ReportWriter()
    w.section("solve")
    w.kv("config", config_name)
    w.kv("lambda", num(sol.lam))
    w.kv("grid", sol.grid.n)
    w.kv("u0", num(u0))
    w.kv("iterations", sol.iterations)
    w.kv("residual", f"{sol.residual:.6e}")
    w.kv("norm", f"{sol.norm:.12g}")
    if sol.trivial:
        w.kv("status", "trivial fixed point")
        w.kv("note", "u = 0 solves the equation here; seed u0 to look for other solutions")
    else:
        w.kv("status", "nontrivial")
    if shells:
        w.kv("shell", _shell(sol.norm, shells))
    cone_lines(w, sol.cone)
    return w.text()


def _shell(norm: float, radii: Sequence[float]) -> str:
    radii = sorted(radii)
    lo = 0.0
    for r in radii:
        if norm < r:
            return f"({num(lo)}, {num(r)})"
        lo = r
    return f"({num(lo)}, inf)"


def divergence_dump(config_name: str, lam: float, message: str, history: Sequence[float]) -> str:
    w = ReportWriter()
    w.section("solve")
    w.kv("config", config_name)
    w.kv("lambda", num(lam))
    w.kv("status", "diverged")
    w.kv("message", message)
    w.kv("history", "csv")
    w.block("step,residual\n" + "\n".join(f"{k},{r:.6e}" for k, r in enumerate(history)))
    return w.text()


def signs_report(rep: SignPatternReport) -> str:
    w = ReportWriter()
    w.section("signs")
    for line in rep.lines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            w.kv(key, value)
        else:
            w.lines.append(line)
    w.kv("verdict", "pass" if rep.passed else "FAIL")
    return w.text()


def profile_csv(profile: RhoProfile) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    orders = sorted(profile.f_inf)
    out.writerow(["rho", "f_rho_sup"] + [f"f_rho_inf.{i}" for i in orders])
    for p, r in enumerate(profile.rhos):
        out.writerow([f"{r:.12g}", f"{profile.f_sup[p]:.12g}"]
                     + [f"{profile.f_inf[i][p]:.12g}" for i in orders])
    return buf.getvalue()


def plot_profile(profile: RhoProfile, N: float, M: dict[int, float], path) -> None:
    """SVG of the I1 and I0 lambda bounds across the rho grid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    up = profile.i1_bound(N)
    ax.loglog(profile.rhos, np.where(np.isfinite(up), up, np.nan), label="I1: lambda below")
    for i, Mi in sorted(M.items()):
        low, _ = profile.i0_bound({i: Mi})
        ax.loglog(profile.rhos, np.where(np.isfinite(low), low, np.nan), label=f"I0 order {i}: lambda above")
    ax.set_xlabel("rho")
    ax.set_ylabel("lambda")
    ax.legend()
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "hammerstein"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
