"""Acceptance battery run by ``weakdet verify``.

Each check returns a :class:`Check` holding what was measured, what was
expected and the tolerance, plus the per-n functional rows it computed.  A
check fails when its comparison fails *or* when any cubature it relied on
did not converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import convergence as cv
from .. import functionals as fn
from .. import maps
from ..quadrature import integrate
from .config import RunConfig

EPS = np.finfo(float).eps


@dataclass
class Check:
    name: str
    passed: bool
    measured: object
    expected: object
    tolerance: object = None
    detail: str = ""
    rows: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": _plain(self.measured),
                "expected": _plain(self.expected), "tolerance": _plain(self.tolerance),
                "detail": self.detail}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _row(res: fn.FunctionalResult, truth=None) -> dict:
    out = {"n": res.n, "functional": res.label, "value": res.value, "abs_error": res.error,
           "nodes": res.nodes, "converged": res.converged}
    if truth is not None:
        out["truth"] = truth
    return out


def e1(d):
    v = np.zeros(d)
    v[0] = 1.0
    return v


def check_image_volume(cfg: RunConfig) -> Check:
    d = cfg.dim
    rel_tol = 1e-6 if d == 2 else 1e-5
    rows, rel, signs, ok = [], {}, {}, True
    for n in cfg.volume_n_list:
        fam = maps.raw(d, n)
        res = fn.det_functional(fam, tol=cfg.tol)
        exact = fn.image_volume_closed_form(d, n)
        rel[n] = abs(abs(res.value) - exact) / exact
        signs[n] = int(np.sign(res.value))
        ok &= res.converged and rel[n] <= rel_tol
        rows.append(_row(res, truth=exact))
    rep = cv.sweep(maps.raw(d, 1), cfg.n_list, ["abs_det"], cfg.tol)
    rows += [_row(r.results["abs_det"]) for r in rep.rows]
    conv = all(r.converged for r in rep.rows)
    fit = rep.fits.get("abs_det")
    omega = maps.ball_volume(d)
    lim_rel = abs(fit.limit - omega) / omega if fit else math.inf
    passed = bool(ok and conv and lim_rel <= 0.01)
    return Check(
        "1 image volume", passed,
        {"max_rel_error": max(rel.values()), "limit": fit.limit if fit else None,
         "sign_of_signed_integral": signs},
        {"volume": f"omega_{d} (1 - 1/(2n+1))^{d}", "limit": omega},
        {"rel": rel_tol, "limit_rel": 0.01},
        f"max rel err {max(rel.values()):.2e}, limit {fit.limit if fit else float('nan'):.6f} "
        f"vs {omega:.6f} (rel {lim_rel:.2e}); signed integral sign {sorted(set(signs.values()))}",
        rows)


def check_boundary_values(cfg: RunConfig) -> Check:
    d = cfg.dim
    worst = 0.0
    for n in sorted(set(cfg.n_list) | set(cfg.volume_n_list)):
        fam = maps.raw(d, n)
        hi = maps.evaluate(fam, e1(d))
        lo = maps.evaluate(fam, -e1(d))
        want_hi = -2.0 * e1(d)
        want_lo = -2.0 / (2 * n + 1) * e1(d)
        worst = max(worst, np.max(np.abs(hi - want_hi)) / 2.0,
                    np.max(np.abs(lo - want_lo)) / abs(want_lo[0]))
    tol = 4 * EPS
    return Check("2 boundary values", worst <= tol, worst, 0.0, tol,
                 f"largest relative deviation {worst:.2e}")


def check_conformal_equality(cfg: RunConfig) -> Check:
    d = cfg.dim
    const = d ** (d / 2)
    rows, ok, worst = [], True, 0.0
    for n in cfg.n_list:
        fam = maps.raw(d, n)
        grad = fn.grad_power_integral(fam, d, tol=cfg.tol)
        absdet = fn.abs_det_functional(fam, tol=cfg.tol)
        diff = abs(grad.value - const * absdet.value)
        allowed = grad.abs_error_estimate + const * absdet.error
        worst = max(worst, diff / allowed if allowed > 0 else math.inf)
        ok &= grad.converged and absdet.converged and diff <= allowed
        rows.append(_row(absdet))
        rows.append({"n": n, "functional": f"grad_power:{d}", "value": grad.value,
                     "abs_error": grad.abs_error_estimate, "nodes": grad.node_count,
                     "converged": grad.converged})
    return Check("3 conformal equality", bool(ok), worst, "<= 1 (difference / combined error)",
                 "combined cubature error",
                 f"worst |int|grad f|^d - d^(d/2) int|det|| / combined error = {worst:.3f}", rows)


def check_bound_and_decay(cfg: RunConfig) -> Check:
    d = cfg.dim
    cap = d ** (d / 2) * maps.ball_volume(d) * (1 + 1e-3)
    rows, ok = [], True
    grads = []
    for n in cfg.n_list:
        g = fn.grad_lp_norm(maps.raw(d, n), tol=cfg.tol)
        grads.append(g.value ** d)
        ok &= g.converged
        rows.append(_row(g))
    bounded = max(grads) <= cap
    ns = sorted(set(cfg.n_list) | set(cfg.decay_n_list))
    lp_res = [fn.lp_norm(maps.raw(d, n), tol=cfg.tol) for n in ns]
    lps = np.array([r.value for r in lp_res])
    slack = np.array([r.error for r in lp_res])
    rows += [_row(r) for r in lp_res]
    ok &= all(r.converged for r in lp_res)
    monotone = bool(np.all(np.diff(lps) <= slack[1:] + slack[:-1]))
    by_n = dict(zip(ns, lps))
    fit = cv.extrapolate(cfg.decay_n_list, [by_n[n] for n in cfg.decay_n_list])
    limit_ok = fit.limit <= 1e-2
    passed = bool(ok and bounded and monotone and limit_ok)
    return Check(
        "4 uniform bound and L^d decay", passed,
        {"max_grad_norm_pow_d": max(grads), "lp_values": by_n, "lp_limit": fit.limit},
        {"grad_cap": cap, "lp_nonincreasing": True, "lp_limit_max": 1e-2},
        {"eps": 1e-3},
        f"max ||grad f_n||^d = {max(grads):.6f} <= {cap:.6f}: {bounded}; "
        f"||f_n||_L^d nonincreasing over n={ns}: {monotone}; "
        f"extrapolated limit from n={list(fit.n_used)}: {fit.limit:.3e}",
        rows)


def check_corollary_limit(cfg: RunConfig) -> Check:
    d = cfg.dim
    target = d ** (d / 2) * cfg.c
    rep = cv.sweep(maps.scaled(d, 1, cfg.c), cfg.n_list, ["sobolev_energy"], cfg.tol)
    vals = rep.values("sobolev_energy")
    errs = rep.errors("sobolev_energy")
    fit = rep.fits.get("sobolev_energy")
    conv = all(r.converged for r in rep.rows)
    rel = abs(fit.limit - target) / target if fit else math.inf
    above = bool(np.all(vals - errs > target))
    passed = bool(conv and rel <= 0.01 and above)
    return Check(
        "5 corollary limit", passed,
        {"limit": fit.limit if fit else None, "energies": vals},
        {"limit": target, "energies_strictly_above": target}, {"rel": 0.01},
        f"limit {fit.limit if fit else float('nan'):.6f} vs {target:.6f} (rel {rel:.2e}); "
        f"all energies above bound: {above}",
        [_row(r.results["sobolev_energy"]) for r in rep.rows])


def tartar_closed_form(a: float, n: int) -> float:
    return -a * (1.0 - (1.0 - a) ** (2 * n)) / 2.0


def check_tartar(cfg: RunConfig) -> Check:
    a = cfg.tartar_a
    rep = cv.sweep(maps.tartar(1, a), cfg.tartar_n_list, ["det"], cfg.tol)
    rows, worst = [], 0.0
    for r in rep.rows:
        truth = tartar_closed_form(a, r.n)
        worst = max(worst, abs(r.results["det"].value - truth))
        rows.append(_row(r.results["det"], truth=truth))
    fit = rep.fits.get("det")
    conv = all(r.converged for r in rep.rows)
    lim_err = abs(fit.limit + a / 2) if fit else math.inf
    passed = bool(conv and worst <= 1e-8 and lim_err <= 1e-4)
    return Check(
        "6 tartar example", passed,
        {"max_abs_error": worst, "limit": fit.limit if fit else None},
        {"closed_form": "-a(1-(1-a)^(2n))/2", "limit": -a / 2}, {"abs": 1e-8, "limit_abs": 1e-4},
        f"max |computed - closed form| {worst:.2e}; limit {fit.limit if fit else float('nan'):.8f}",
        rows)


def check_muller_contrast(cfg: RunConfig) -> Check:
    d = cfg.dim
    n = 64
    bump = cv.TestField.bump(d, cfg.bump_radius)
    rep = cv.local_det_pairing(maps.raw(d, 1), bump, [16, 32, n], cfg.tol)
    last = rep.rows[-1]
    local = last.results["local_det"]
    glob = last.results["global_det"]
    envelope = last.extra["envelope"]
    omega = maps.ball_volume(d)
    conv = all(r.converged for r in rep.rows)
    below = abs(local.value) + local.error <= envelope
    above = abs(glob.value) - glob.error > 0.9 * omega
    passed = bool(conv and below and above)
    return Check(
        "7 Muller contrast", passed,
        {"local": local.value, "global": glob.value},
        {"local_envelope": envelope, "global_min": 0.9 * omega}, None,
        f"n={n}: |local| {abs(local.value):.3e} <= envelope {envelope:.3e}: {below}; "
        f"|global| {abs(glob.value):.6f} > 0.9 omega_d = {0.9 * omega:.6f}: {above}",
        [_row(r.results[k]) for r in rep.rows for k in ("local_det", "global_det")])


def check_concentration(cfg: RunConfig) -> Check:
    d = cfg.dim
    ns = [4, 8, 16, 32, 64]
    fracs, rows, conv = [], [], True
    for n in ns:
        res = fn.concentration_profile(maps.raw(d, n), e1(d), [0.5], cfg.tol)[0]
        fracs.append(res.value)
        conv &= res.converged
        rows.append(_row(res))
    nondecreasing = bool(np.all(np.diff(fracs) >= 0))
    passed = bool(conv and fracs[-1] >= 0.95 and nondecreasing)
    return Check(
        "8 concentration", passed, {"fractions": dict(zip(ns, fracs))},
        {"n64_min": 0.95, "nondecreasing": True}, None,
        f"fraction in B(e1,0.5) at n=64: {fracs[-1]:.6f}; nondecreasing: {nondecreasing}", rows)


def oracle_families(d: int, n: int) -> list[maps.MapFamily]:
    fams = [maps.raw(d, n), maps.normalize(d, n), maps.scaled(d, n, 1.0),
            maps.reflect(maps.raw(d, n), d)]
    if d == 2:
        fams.append(maps.tartar(n, 0.5))
    return fams


def oracle_points(family: maps.MapFamily, count: int, rng, h=maps.DEFAULT_FD_STEP):
    d = family.dim
    if family.base == "tartar":
        return h + (family.a - 2 * h) * rng.random((count, 2))
    dirs = rng.standard_normal((count, d))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = (1.0 - 2 * h) * rng.random(count) ** (1.0 / d)
    return dirs * radii[:, None]


def check_oracles(cfg: RunConfig) -> Check:
    d = cfg.dim
    rng = np.random.default_rng(cfg.seed)
    worst_fd = worst_det = 0.0
    for n in cfg.oracle_n_list:
        for fam in oracle_families(d, n):
            pts = oracle_points(fam, cfg.oracle_points, rng)
            jac = maps.jacobian(fam, pts)
            fd = maps.finite_difference_jacobian(fam, pts)
            rel = maps.frobenius(jac - fd) / maps.frobenius(jac)
            worst_fd = max(worst_fd, float(rel.max()))
            closed = maps.det_jacobian(fam, pts)
            lu = np.array([maps.lu_det(j) for j in jac])
            worst_det = max(worst_det, float(np.max(np.abs(closed - lu) / np.abs(lu))))
    passed = worst_fd <= 1e-6 and worst_det <= 1e-12
    return Check("9 oracle equivalence", bool(passed),
                 {"fd_rel": worst_fd, "det_rel": worst_det},
                 {"fd_rel": 1e-6, "det_rel": 1e-12}, None,
                 f"worst FD vs analytic {worst_fd:.2e}; worst closed-form vs LU det {worst_det:.2e}")


def check_thread_invariance(cfg: RunConfig) -> Check:
    d = cfg.dim
    fam = maps.raw(d, max(cfg.n_list))
    region = fn.default_region(fam)
    results = [integrate(lambda x: np.abs(maps.det_jacobian(fam, x)), region, cfg.tol,
                         threads=t) for t in (1, 2, 4)]
    values = [r.value.hex() for r in results] + [float(r.abs_error_estimate).hex() for r in results]
    same = len({r.value for r in results}) == 1 and len({r.abs_error_estimate for r in results}) == 1
    return Check("10 determinism across thread counts", bool(same), values[:3], "identical", None,
                 f"abs_det at n={fam.n} with 1/2/4 threads bitwise identical: {same}")


CHECKS = (check_image_volume, check_boundary_values, check_conformal_equality,
          check_bound_and_decay, check_corollary_limit, check_tartar, check_muller_contrast,
          check_concentration, check_oracles, check_thread_invariance)


def run_all(cfg: RunConfig, log=None) -> list[Check]:
    out = []
    for check in CHECKS:
        res = check(cfg)
        if log is not None:
            log(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
        out.append(res)
    return out
