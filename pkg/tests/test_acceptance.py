"""End-to-end acceptance checks.

Each check is a cached function returning an :class:`Outcome`; the pytest
wrappers assert on it and the terminal summary prints one line per check.
Every surrogate built along the way is re-verified by the shared audit,
which is itself the last check.

Run ``python tests/test_acceptance.py`` for the same report without pytest;
``--slow`` adds the full-size basin comparison.
"""

from __future__ import annotations

import concurrent.futures as cf
import functools
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from sosnewton.cli import LABEL_TOL, basin_grid
from sosnewton.hon import empirical_order, minimize, minimize_classical, minimize_global, step_order_d
from sosnewton.jets import ATAN1, BEALE, SQRT1, lipschitz_bound_on_grid
from sosnewton.polycore import Polynomial
from sosnewton.sosform import (STATIONARITY_TOL, min_t, quadrature_psd_gap,
                               stationarity_residual, verify_certificate)
from sosnewton.uni3 import (ScalarDerivs, basin_radius, beta_closed_form, closed_form_map,
                            converges, find_bracket, n2_map, n3_map, quartic_weight,
                            shrinks_everywhere)


@dataclass
class Outcome:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float


ACCEPTANCE_RESULTS: dict = {}


def _record(out: Outcome) -> Outcome:
    ACCEPTANCE_RESULTS[out.key] = out
    return out


def summary_lines() -> list:
    order = sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(k.rstrip("abcdefgh")), k))
    lines = [f"[{k:>3}] {'PASS' if o.passed else 'FAIL'}  {o.title}: {o.detail} "
             f"({o.seconds:.1f}s)" for k, o in ((k, ACCEPTANCE_RESULTS[k]) for k in order)]
    if "7a" in ACCEPTANCE_RESULTS and "7b" not in ACCEPTANCE_RESULTS:
        lines.append("[ 7b] SKIP  Beale basins 41x41: slow, run with -m slow")
    return lines


# ---------------------------------------------------------------------------
# certificate audit


@dataclass
class Audit:
    """Running re-verification of every surrogate the checks produce."""

    certificates: int = 0
    steps: int = 0
    worst_residual: float = 0.0
    worst_eig: float = math.inf
    worst_stationarity: float = 0.0
    failures: list = field(default_factory=list)

    def certificate(self, cert, where: str):
        ok, rep = verify_certificate(cert)
        self.certificates += 1
        self.worst_residual = max(self.worst_residual, rep["residual"])
        self.worst_eig = min(self.worst_eig, rep["min_eig"])
        if not ok and len(self.failures) < 20:
            self.failures.append(f"{where}: certificate {rep}")
        return ok

    def step(self, report, where: str):
        self.steps += 1
        self.certificate(report.certificate, where)
        stat = stationarity_residual(report.surrogate_local, report.local_minimizer)
        self.worst_stationarity = max(self.worst_stationarity, stat)
        if not stat <= STATIONARITY_TOL and len(self.failures) < 20:
            self.failures.append(f"{where}: stationarity {stat:.3g} at {report.center}")

    def merge(self, other: "Audit"):
        self.certificates += other.certificates
        self.steps += other.steps
        self.worst_residual = max(self.worst_residual, other.worst_residual)
        self.worst_eig = min(self.worst_eig, other.worst_eig)
        self.worst_stationarity = max(self.worst_stationarity, other.worst_stationarity)
        self.failures.extend(other.failures[:max(0, 20 - len(self.failures))])

    @property
    def ok(self) -> bool:
        return not self.failures


AUDIT = Audit()
AUDITED: set = set()


def audited_map(f, d: int, where: str, eps: float = 0.01, audit: Audit = AUDIT):
    def step(x):
        rep = step_order_d(f, [x], d, eps)
        audit.step(rep, where)
        return float(rep.next[0])
    return step


def audit_trace(trace, where: str, audit: Audit = AUDIT):
    for rep in trace.steps:
        if rep.certificate is not None:
            audit.step(rep, where)


def _timed(fn):
    @functools.lru_cache(maxsize=None)
    @functools.wraps(fn)
    def wrapper():
        t0 = time.perf_counter()
        key, title, passed, detail = fn()
        return _record(Outcome(key, title, bool(passed), detail, time.perf_counter() - t0))
    return wrapper


# ---------------------------------------------------------------------------
# checks


@_timed
def classical_radius():
    r = basin_radius(closed_form_map(SQRT1, 2), 0.0, 0.5, 2.0)
    return "1", "classical basin radius on sqrt1", abs(r - 1.0) <= 1e-4, f"radius {r:.8f}"


@_timed
def third_order_radius():
    r = basin_radius(closed_form_map(SQRT1, 3), 0.0, 2.0, 4.0)
    beta = beta_closed_form()
    ok = abs(r - 3.407) <= 5e-3 and abs(beta - r) <= 1e-3
    return "2", "third-order basin radius on sqrt1", ok, f"bisection {r:.6f}, closed form {beta:.6f}"


RADIUS_TARGETS = {4: 4.5, 5: 5.9}


@_timed
def radius_table_rows():
    AUDITED.add("3")
    rows = {}
    for d in RADIUS_TARGETS:
        step = audited_map(SQRT1, d, f"radius d={d}")
        rows[d] = basin_radius(step, 0.0, *find_bracket(step, 0.0))
    ok = all(abs(rows[d] - RADIUS_TARGETS[d]) <= 0.2 for d in rows)
    detail = ", ".join(f"d={d}: {rows[d]:.4f} (target {RADIUS_TARGETS[d]} +- 0.2)" for d in rows)
    return "3", "radius table for d=4,5 via SDP steps", ok, detail


@_timed
def fast_convergence():
    AUDITED.add("4")
    tr = minimize(SQRT1, [5.9], 5)
    audit_trace(tr, "order 5 from 5.9")
    errs = [abs(x[0]) for x in tr.iterates]
    hit = next((k for k, e in enumerate(errs) if e <= 1e-12), None)
    ok = hit is not None and hit <= 6
    return "4", "order-5 run on sqrt1 from 5.9", ok, \
        f"|x_k| = {', '.join(f'{e:.2e}' for e in errs[:7])}; first <= 1e-12 at k={hit}"


@_timed
def classical_oscillation():
    m2 = closed_form_map(ATAN1, 2)
    img = n2_map(ScalarDerivs.of(ATAN1, 13.494), 13.494)
    inside, outside = converges(m2, 1.70, 0.0), converges(m2, 1.72, 0.0)
    ok = abs(img + 13.494) <= 0.01 and inside and not outside
    return "5", "classical oscillation on atan1", ok, \
        f"N2(13.494) = {img:.5f}; 1.70 converges: {inside}; 1.72 converges: {outside}"


@_timed
def atan1_global_behaviour():
    AUDITED.add("6")
    xs = np.linspace(0.0, 100.0, 1001)[1:]
    shrink = shrinks_everywhere(closed_form_map(ATAN1, 3), xs)
    runs = {}
    for x0 in (5.0, -5.0, 50.0, -50.0):
        tr = minimize(ATAN1, [x0], 3)
        audit_trace(tr, f"atan1 d=3 from {x0}")
        runs[x0] = (tr.termination, abs(tr.final[0]))
    ok = shrink.all() and all(t == "GradTol" and e <= 1e-8 for t, e in runs.values())
    detail = f"|N3(x)| < |x| on {int(shrink.sum())}/{xs.size} points; " + \
        ", ".join(f"{x0:+g}: {t}" for x0, (t, _) in runs.items())
    return "6", "third-order global behaviour on atan1", ok, detail


# ---- basins on the Beale function


def _beale_point(args):
    x0, method, max_iter = args
    audit = Audit()
    if method == "hon":
        tr = minimize(BEALE, list(x0), 3, eps=0.01, max_iter=max_iter)
        audit_trace(tr, f"beale from {x0}", audit)
    else:
        tr = minimize_classical(BEALE, list(x0), max_iter=max_iter)
    final = tr.final
    label = bool(np.all(np.isfinite(final))
                 and np.linalg.norm(final - np.array(BEALE.minimizer)) <= LABEL_TOL)
    return label, audit


def beale_fractions(grid: int, max_iter: int = 350):
    pts = basin_grid(2, -4.0, 4.0, grid)
    workers = os.cpu_count() or 1
    out = {}
    for method in ("classical", "hon"):
        jobs = [(p, method, max_iter) for p in pts]
        if workers > 1:
            with cf.ProcessPoolExecutor(workers) as pool:
                res = list(pool.map(_beale_point, jobs, chunksize=1))
        else:
            res = [_beale_point(j) for j in jobs]
        for _, a in res:
            AUDIT.merge(a)
        out[method] = sum(lab for lab, _ in res) / len(res)
    return out


def _beale_check(grid: int, budget: float, key: str):
    t0 = time.perf_counter()
    AUDITED.add(key)
    fr = beale_fractions(grid)
    secs = time.perf_counter() - t0
    larger = fr["hon"] > fr["classical"]
    fast = secs < budget
    return key, f"Beale basins {grid}x{grid}", larger and fast, \
        (f"converged fraction d=3 {fr['hon']:.4f} vs classical {fr['classical']:.4f} "
         f"({'larger' if larger else 'NOT larger'}); {secs:.0f}s against a {budget:.0f}s budget "
         f"on {os.cpu_count()} CPU(s)")


@_timed
def beale_smoke():
    return _beale_check(21, 300.0, "7a")


@_timed
def beale_full():
    return _beale_check(41, 1800.0, "7b")


@_timed
def closed_form_agreement():
    AUDITED.add("8")
    worst = {}
    for f in (SQRT1, ATAN1):
        xs = [x for x in np.linspace(-3.0, 3.0, 50) if f.derivatives_1d(x, 2)[2] > 0]
        step = audited_map(f, 3, f"{f.name} grid")
        worst[f.name] = max(abs(n3_map(ScalarDerivs.of(f, x), x) - step(x)) for x in xs)
    ok = all(v <= 1e-6 for v in worst.values())
    return "8", "closed form vs SDP step", ok, \
        ", ".join(f"{k}: max diff {v:.2e}" for k, v in worst.items())


@_timed
def weight_formula():
    AUDITED.add("9")
    rng = np.random.default_rng(9)
    worst = 0.0
    for i in range(100):
        f1 = rng.uniform(-3, 3)
        f2 = rng.uniform(0.05, 5)
        f3 = rng.choice([-1, 1]) * rng.uniform(0.05, 5)
        T = Polynomial(1, {(1,): f1, (2,): f2 / 2, (3,): f3 / 6})
        res = min_t(T, [0.0], 4)
        AUDIT.certificate(res.certificate, f"random cubic {i}")
        expected = quartic_weight(ScalarDerivs(f1, f2, f3))
        worst = max(worst, abs(res.weight - expected) / expected)
    return "9", "univariate weight formula", worst <= 1e-6, \
        f"max relative error {worst:.2e} over 100 cubics"


@_timed
def empirical_orders():
    AUDITED.add("10")
    cases = [(ATAN1, 3, 1.0), (SQRT1, 3, 1.5), (SQRT1, 4, 1.5)]
    got = []
    for f, d, x0 in cases:
        tr = minimize(f, [x0], d)
        audit_trace(tr, f"{f.name} d={d} from {x0}")
        got.append((f.name, d, empirical_order(tr, [0.0])))
    ok = all(p >= d - 0.3 for _, d, p in got)
    return "10", "empirical convergence order", ok, \
        ", ".join(f"{n} d={d}: {p:.3f}" for n, d, p in got)


def _random_psd_poly_matrix(rng):
    size = int(rng.integers(1, 4))
    half = int(rng.integers(0, 4))
    B = rng.normal(size=(half + 1, size, size))
    M = np.zeros((2 * half + 1, size, size))
    for i in range(half + 1):
        for j in range(half + 1):
            M[i + j] += B[i].T @ B[j]
    return M


@_timed
def quadrature_bound():
    rng = np.random.default_rng(11)
    worst = min(quadrature_psd_gap(M, a) for M in (_random_psd_poly_matrix(rng)
                                                   for _ in range(100)) for a in (0, 1))
    return "11", "quadrature PSD bound", worst >= -1e-9, \
        f"smallest eigenvalue {worst:.3e} over 100 matrices, alpha in {{0, 1}}"


@_timed
def monotone_global():
    AUDITED.add("12")
    M = lipschitz_bound_on_grid(ATAN1, 3, -100.0, 100.0, points=20001, safety=1.1)
    tr = minimize_global(ATAN1, [50.0], 3, M=M, grad_tol=1e-8)
    audit_trace(tr, "monotone atan1")
    vals = tr.values
    mono = all(b <= a for a, b in zip(vals, vals[1:]))
    ok = mono and tr.termination == "GradTol" and tr.grad_norms[-1] <= 1e-8
    return "12", "monotone variant on atan1 from 50", ok, \
        (f"M = {M:.3f}, {tr.n_steps} steps, nonincreasing: {mono}, "
         f"final |grad| {tr.grad_norms[-1]:.1e}")


PRODUCERS = [radius_table_rows, fast_convergence, atan1_global_behaviour, beale_smoke,
             closed_form_agreement, weight_formula, empirical_orders, monotone_global]


@_timed
def certificate_audit():
    for p in PRODUCERS:
        p()
    a = AUDIT
    detail = (f"{a.certificates} certificates ({a.steps} steps) from checks "
              f"{', '.join(sorted(AUDITED, key=lambda k: int(k.rstrip('ab'))))}; worst residual "
              f"{a.worst_residual:.1e}, worst Gram eigenvalue {a.worst_eig:.1e}, "
              f"worst stationarity {a.worst_stationarity:.1e}")
    if a.failures:
        detail += "; first failure: " + a.failures[0]
    return "13", "certificate soundness", a.ok and a.certificates > 0, detail


# ---------------------------------------------------------------------------
# pytest wrappers; the runtime budgets are part of each check


def _check(fn, budget=None):
    out = fn()
    _budget_note(out, budget)
    out = ACCEPTANCE_RESULTS[out.key]
    assert out.passed, out.detail


def test_classical_basin_radius():
    _check(classical_radius, 1.0)


def test_third_order_basin_radius():
    _check(third_order_radius, 5.0)


def test_radius_table():
    _check(radius_table_rows, 600.0)


def test_order5_fast_convergence():
    _check(fast_convergence, 60.0)


def test_classical_oscillation():
    _check(classical_oscillation, 1.0)


def test_third_order_global_behaviour():
    _check(atan1_global_behaviour, 120.0)


def test_beale_basins_smoke():
    _check(beale_smoke)


@pytest.mark.slow
def test_beale_basins_full():
    _check(beale_full)


def test_closed_form_agreement():
    _check(closed_form_agreement)


def test_weight_formula():
    _check(weight_formula)


def test_empirical_order():
    _check(empirical_orders)


def test_quadrature_bound():
    _check(quadrature_bound)


def test_monotone_variant():
    _check(monotone_global, 120.0)


def test_certificate_soundness():
    _check(certificate_audit)


def _budget_note(out: Outcome, budget):
    if budget is not None and out.seconds >= budget and out.passed:
        _record(Outcome(out.key, out.title, False,
                        out.detail + f"; runtime {out.seconds:.1f}s over {budget}s", out.seconds))


if __name__ == "__main__":
    checks = [(classical_radius, 1.0), (third_order_radius, 5.0), (radius_table_rows, 600.0),
              (fast_convergence, 60.0), (classical_oscillation, 1.0),
              (atan1_global_behaviour, 120.0), (beale_smoke, None), (closed_form_agreement, None),
              (weight_formula, None), (empirical_orders, None), (quadrature_bound, None),
              (monotone_global, 120.0)]
    if "--slow" in sys.argv:
        checks.append((beale_full, None))
    for fn, budget in checks:
        _budget_note(fn(), budget)
    certificate_audit()
    print("\n".join(summary_lines()))
    sys.exit(0 if all(o.passed for o in ACCEPTANCE_RESULTS.values()) else 1)
