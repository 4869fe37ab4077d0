"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line, collected in the terminal summary.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import cap_image_fraction
from weakdet import convergence as cv
from weakdet import functionals as fn
from weakdet import maps as m
from weakdet.harness.report import strip_timestamp

PI = math.pi
EPS = np.finfo(float).eps
OMEGA = {2: PI, 3: 4 * PI / 3}
VOLUME_NS = (1, 4, 10, 32, 64)
SWEEP_NS = (4, 8, 16, 32, 64)
DECAY_NS = (16, 32, 64, 128, 256)


def image_volume(d, n):
    return OMEGA[d] * (1 - 1 / (2 * n + 1)) ** d


def test_1_image_volume(record):
    ok, worst, signs, limits = True, {}, set(), {}
    for d, tol in ((2, 1e-6), (3, 1e-5)):
        errs = []
        for n in VOLUME_NS:
            res = fn.det_functional(m.raw(d, n))
            signs.add("-" if res.value < 0 else "+")
            errs.append(abs(abs(res.value) - image_volume(d, n)) / image_volume(d, n))
        worst[d] = max(errs)
        rep = cv.sweep(m.raw(d, 1), SWEEP_NS, ["abs_det"])
        limits[d] = rep.extrapolated_limit
        ok &= worst[d] <= tol and abs(limits[d] - OMEGA[d]) <= 0.01 * OMEGA[d]
    record("1 image volume", ok,
           f"rel err d2={worst[2]:.1e} d3={worst[3]:.1e}; limits {limits[2]:.5f} "
           f"{limits[3]:.5f}; sign of signed integral: {''.join(sorted(signs))}")
    assert ok


def test_2_boundary_values(record):
    worst = 0.0
    for d in (2, 3):
        e1 = np.eye(d)[0]
        for n in range(1, 65):
            f = m.raw(d, n)
            worst = max(worst, np.max(np.abs(m.evaluate(f, e1) + 2 * e1)),
                        np.max(np.abs(m.evaluate(f, -e1) + 2 / (2 * n + 1) * e1)))
    ok = worst <= 4 * EPS
    record("2 boundary values", ok, f"max deviation {worst:.1e} (limit 4 eps)")
    assert ok


def test_3_conformal_equality(record):
    worst = 0.0
    for d in (2, 3):
        k = d ** (d / 2)
        for n in VOLUME_NS:
            f = m.raw(d, n)
            g = fn.grad_power_integral(f, d)
            a = fn.abs_det_functional(f)
            ratio = abs(g.value - k * a.value) / (g.abs_error_estimate + k * a.error)
            worst = max(worst, ratio)
    ok = worst <= 1.0
    record("3 conformal equality", ok, f"max |difference| / combined error = {worst:.2f}")
    assert ok


def test_4_bound_and_decay(record):
    ok, detail = True, []
    for d in (2, 3):
        cap = d ** (d / 2) * OMEGA[d] * (1 + 1e-3)
        grads = [fn.grad_power_integral(m.raw(d, n), d).value for n in range(1, 65)]
        bounded = max(grads) <= cap
        ns = sorted(set(SWEEP_NS) | set(DECAY_NS))
        lps = [fn.lp_norm(m.raw(d, n)).value for n in ns]
        mono = all(b <= a for a, b in zip(lps, lps[1:]))
        fit = cv.extrapolate(DECAY_NS, lps[-len(DECAY_NS):])
        short = cv.extrapolate(SWEEP_NS, lps[:len(SWEEP_NS)])
        ok &= bounded and mono and abs(fit.limit) <= 1e-2
        detail.append(f"d{d}: max grad^d {max(grads):.4f} <= {cap:.4f}, monotone={mono}, "
                      f"L^d limit {fit.limit:.4f} (n<=64 fit {short.limit:.4f})")
    record("4 uniform bound + L^d decay", ok, "; ".join(detail))
    assert ok


def test_5_corollary_limit(record):
    ok, detail = True, []
    for d, target in ((2, 2.0), (3, 3 ** 1.5)):
        rep = cv.sweep(m.scaled(d, 1, 1.0), SWEEP_NS, ["sobolev_energy"])
        vals = rep.values()
        lim = rep.extrapolated_limit
        above = bool(np.all(vals > target)) and bool(np.all(vals > lim))
        ok &= abs(lim - target) <= 0.01 * target and above
        detail.append(f"d{d}: limit {lim:.5f} vs {target:.5f}, min energy {vals.min():.5f}")
    record("5 corollary limit", ok, "; ".join(detail))
    assert ok


def test_6_tartar(record):
    ns = (1, 5, 10, 20)
    errs = []
    for n in ns:
        res = fn.det_functional(m.tartar(n, 0.5))
        errs.append(abs(res.value + (1 - 2.0 ** (-2 * n)) / 4))
    rep = cv.sweep(m.tartar(1, 0.5), ns, ["det"])
    ok = max(errs) <= 1e-8 and abs(rep.extrapolated_limit + 0.25) <= 1e-4
    record("6 tartar", ok, f"max abs err {max(errs):.1e}; limit {rep.extrapolated_limit:.8f}")
    assert ok


def test_7_muller_contrast(record):
    bump = cv.TestField.bump(2, 0.5)
    rep = cv.local_det_pairing(m.raw(2, 1), bump, (16, 32, 64))
    last = rep.rows[-1]
    local = abs(last.results["local_det"].value)
    glob = abs(last.results["global_det"].value)
    envelope = PI / 4 * (8 / 64) ** 2 * bump.sup
    ok = local < envelope and glob > 0.9 * PI
    record("7 muller contrast", ok,
           f"|local| {local:.2e} < envelope {envelope:.2e}; |global| {glob:.4f} > {0.9 * PI:.4f}")
    assert ok


def test_8_concentration(record):
    fracs = [fn.concentration_profile(m.raw(2, n), [1.0, 0.0], [0.5])[0].value
             for n in SWEEP_NS]
    exact = [cap_image_fraction(2, n, 0.5) for n in SWEEP_NS]
    agree = max(abs(a - b) for a, b in zip(fracs, exact))
    ok = fracs[-1] >= 0.95 and all(b >= a for a, b in zip(fracs, fracs[1:]))
    record("8 concentration", ok,
           f"fractions {', '.join(f'{v:.4f}' for v in fracs)}; vs inversion geometry {agree:.1e}")
    assert ok
    assert agree <= 1e-9


def oracle_families(d, n):
    fams = [m.raw(d, n), m.normalize(d, n), m.scaled(d, n, 1.0), m.reflect(m.raw(d, n), 1)]
    if d == 2:
        fams.append(m.tartar(n, 0.5))
    return fams


def test_9_oracle_equivalence(record):
    rng = np.random.default_rng(20190401)
    h = 1e-6
    worst_fd = worst_lu = 0.0
    count = 0
    for d in (2, 3):
        for n in (1, 4, 16, 64):
            for fam in oracle_families(d, n):
                if fam.base == "tartar":
                    pts = h + (fam.a - 2 * h) * rng.random((100, 2))
                else:
                    x = rng.normal(size=(100, d))
                    x /= np.linalg.norm(x, axis=1, keepdims=True)
                    pts = x * (1 - h) * rng.random((100, 1)) ** (1 / d)
                J = m.jacobian(fam, pts)
                dets = m.det_jacobian(fam, pts)
                for k in range(100):
                    fd = m.finite_difference_jacobian(fam, pts[k], h=h)
                    worst_fd = max(worst_fd, np.linalg.norm(fd - J[k]) / np.linalg.norm(J[k]))
                    lu = m.lu_det(J[k])
                    worst_lu = max(worst_lu, abs(dets[k] - lu) / abs(lu))
                count += 1
    ok = worst_fd <= 1e-6 and worst_lu <= 1e-12
    record("9 oracle equivalence", ok,
           f"{count} families x 100 points: FD rel {worst_fd:.1e}, LU rel {worst_lu:.1e}")
    assert ok


def run_verify(dim, threads):
    env = dict(os.environ, WEAKDET_THREADS=str(threads))
    res = subprocess.run([sys.executable, "-m", "weakdet", "verify", "--dim", str(dim)],
                         capture_output=True, text=True, env=env, timeout=600)
    return res.returncode, strip_timestamp(res.stdout)


@pytest.mark.parametrize("dim", [2, 3])
def test_10_determinism(record, dim):
    runs = [run_verify(dim, t) for t in (1, 4, 1)]
    same = all(r == runs[0] for r in runs)
    ok = same and runs[0][0] == 0 and len(runs[0][1]) > 0
    record(f"10 determinism (d={dim})", ok,
           f"verify with WEAKDET_THREADS=1,4,1: {'byte-identical' if same else 'DIFFERENT'}, "
           f"exit {runs[0][0]}")
    assert ok
