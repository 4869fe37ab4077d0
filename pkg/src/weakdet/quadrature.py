"""Deterministic cubature over balls, ball/ball caps and rectangles.

Balls are integrated in polar coordinates centred at a *focus* point, which
may sit on the boundary sphere.  Seen from a boundary point ``p`` the unit
ball is swept by chords ``p + s w`` with ``0 <= s <= 2 cos(theta)``, so the
radial limits stay smooth and a spike of width ``1/n`` at ``p`` becomes a
spike at ``s = 0`` that dyadic grading in ``s`` resolves.  Caps
``B(0,1) & B(q, rho)`` (or the complement) are the same parametrization
about ``q`` with the radial limit clipped at ``rho``; the clip happens at a
known polar angle, so patches are split there and the indicator never
enters the integrand.

:func:`integrate` refines cells of the parameter box adaptively.  Each cell
is integrated with tensor Gauss-Legendre rules of two orders and the
difference (times 2) is the cell error.  Leaves are summed with
:func:`math.fsum` in a fixed lexicographic order, which makes the result
bitwise independent of the evaluation thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import eval_legendre, roots_jacobi

from .maps import ball_volume

THREADS_ENV = "WEAKDET_THREADS"

Integrand = Callable[[np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps
_ON_SPHERE = 1e-12


@dataclass(frozen=True)
class Region:
    """Integration domain.

    ``ball``
        ``B(center, radius)``; ``focus`` (optional) is the point toward which
        the radial grading is done, ``levels`` the number of dyadic levels.
    ``rectangle``
        ``prod [lo_i, hi_i]``.
    ``cap``
        ``B(center, radius) & B(cap_center, cap_radius)``, or with
        ``excise=True`` the ball with that second ball removed.
    """

    kind: str
    dim: int
    center: tuple[float, ...] = ()
    radius: float = 1.0
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    focus: tuple[float, ...] | None = None
    levels: int = 6
    cap_center: tuple[float, ...] | None = None
    cap_radius: float | None = None
    excise: bool = False

    def __post_init__(self):
        if self.kind not in ("ball", "rectangle", "cap"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.kind == "rectangle":
            if len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise ValueError("rectangle corners must match the dimension")
            if not all(a < b for a, b in zip(self.lo, self.hi)):
                raise ValueError(f"need lo < hi componentwise, got {self.lo} / {self.hi}")
            return
        if len(self.center) != self.dim:
            raise ValueError("ball center must match the dimension")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.levels < 0:
            raise ValueError(f"grading levels must be >= 0, got {self.levels}")
        if self.focus is not None:
            if len(self.focus) != self.dim:
                raise ValueError("focus must match the dimension")
            rel = np.subtract(self.focus, self.center) / self.radius
            if np.linalg.norm(rel) > 1.0 + _ON_SPHERE:
                raise ValueError("focus must lie in the closed ball")
        if self.kind == "cap":
            if self.cap_center is None or len(self.cap_center) != self.dim:
                raise ValueError("cap center must match the dimension")
            if self.cap_radius is None or not self.cap_radius > 0:
                raise ValueError(f"cap radius must be positive, got {self.cap_radius}")

    @classmethod
    def ball(cls, dim, center=None, radius=1.0, focus=None, levels=6):
        center = tuple(float(c) for c in (np.zeros(dim) if center is None else center))
        focus = None if focus is None else tuple(float(c) for c in focus)
        return cls("ball", dim, center=center, radius=float(radius), focus=focus,
                   levels=int(levels))

    @classmethod
    def rectangle(cls, lo, hi):
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        return cls("rectangle", len(lo), lo=lo, hi=hi)

    @classmethod
    def cap(cls, ball: "Region", center, radius, excise=False, levels=None):
        if ball.kind != "ball":
            raise ValueError("a cap is cut from a ball region")
        return cls("cap", ball.dim, center=ball.center, radius=ball.radius,
                   cap_center=tuple(float(c) for c in center), cap_radius=float(radius),
                   excise=bool(excise), levels=ball.levels if levels is None else int(levels))

    @property
    def volume(self) -> float:
        if self.kind == "rectangle":
            return float(np.prod(np.subtract(self.hi, self.lo)))
        if self.kind == "ball":
            return ball_volume(self.dim) * self.radius ** self.dim
        raise ValueError("cap volumes are computed by integrating 1")

    def contains(self, x, slack=1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "rectangle":
            return np.all((x >= np.array(self.lo) - slack) & (x <= np.array(self.hi) + slack),
                          axis=1)
        inside = np.linalg.norm(x - np.array(self.center), axis=1) <= self.radius * (1 + slack)
        if self.kind == "cap":
            dist = np.linalg.norm(x - np.array(self.cap_center), axis=1)
            near = dist <= self.cap_radius * (1 + slack)
            far = dist >= self.cap_radius * (1 - slack)
            inside &= far if self.excise else near
        return inside


@dataclass
class CubatureRule:
    nodes: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    def integrate(self, integrand: Integrand) -> float:
        vals = np.asarray(integrand(self.nodes), dtype=float)
        return math.fsum(self.weights * vals)


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    abs_error_estimate: float
    node_count: int
    refinement_depth: int
    converged: bool = True


# ---------------------------------------------------------------- 1d rules

def gauss_legendre01(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (t + 1.0), 0.5 * w


def _tensor(nodes, weights, dim):
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([weights] * dim), indexing="ij")
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


# ----------------------------------------------------------------- patches

def _frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal matrix whose first column is the unit vector ``axis``."""
    d = len(axis)
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = axis - e1
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.eye(d)
    v = v / nv
    return np.eye(d) - 2.0 * np.outer(v, v)


class _BoxPatch:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.span = np.asarray(hi, dtype=float) - self.lo
        self.jac = float(np.prod(self.span))
        self.graded = False

    def map(self, t):
        return self.lo + self.span * t, np.full(len(t), self.jac)


class _PolarPatch:
    """Chords from a pole ``p`` (unit-ball coordinates) restricted to an angle range.

    Angles are measured from ``e = -p/|p|``.  For ``|p| < 1`` the angle
    variable is the polar angle itself; for ``|p| >= 1`` it is ``alpha`` with
    ``sin(alpha) = |p| sin(theta)``, which removes the square-root endpoint
    at tangency.
    """

    def __init__(self, dim, pole, ang0, ang1, lo_kind, hi_kind, rho, center, radius):
        self.dim = dim
        self.pole = np.asarray(pole, dtype=float)
        r0 = float(np.linalg.norm(self.pole))
        if abs(r0 - 1.0) < _ON_SPHERE:
            r0 = 1.0
        self.r0 = r0
        axis = -self.pole / r0 if r0 > 0 else np.eye(dim)[0]
        self.frame = _frame(axis)
        self.alpha = r0 >= 1.0
        self.ang0, self.ang1 = ang0, ang1
        self.lo_kind, self.hi_kind, self.rho = lo_kind, hi_kind, rho
        self.center = np.asarray(center, dtype=float)
        self.radius = radius
        self.graded = lo_kind == "zero"

    def limits(self, ang):
        """Polar angle pieces and base radial limits at parameter angle ``ang``."""
        r0 = self.r0
        if self.alpha:
            if r0 == 1.0:
                sin_t, cos_t, dtheta = np.sin(ang), np.cos(ang), np.ones_like(ang)
            else:
                sin_t = np.sin(ang) / r0
                cos_t = np.sqrt(1.0 - sin_t ** 2)
                dtheta = np.cos(ang) / (r0 * cos_t)
            q = np.cos(ang)
            s1 = r0 * cos_t - q
            if r0 == 1.0:
                s1 = np.zeros_like(ang)
        else:
            sin_t, cos_t, dtheta = np.sin(ang), np.cos(ang), np.ones_like(ang)
            q = np.sqrt(np.maximum(0.0, 1.0 - (r0 * sin_t) ** 2))
            s1 = np.zeros_like(ang)
        s2 = r0 * cos_t + q
        return sin_t, cos_t, dtheta, s1, s2

    def map(self, t):
        d = self.dim
        span = self.ang1 - self.ang0
        ang = self.ang0 + span * t[:, 1]
        sin_t, cos_t, dtheta, s1, s2 = self.limits(ang)
        lo = {"zero": 0.0, "s1": s1, "rho": self.rho}[self.lo_kind]
        hi = {"s2": s2, "rho": self.rho}[self.hi_kind]
        lo = np.broadcast_to(lo, ang.shape)
        hi = np.broadcast_to(hi, ang.shape)
        s = lo + (hi - lo) * t[:, 0]
        if d == 2:
            omega = np.stack([cos_t, sin_t], axis=1)
            w = s * (hi - lo) * span * dtheta
        else:
            phi = 2.0 * np.pi * t[:, 2]
            omega = np.stack([cos_t, sin_t * np.cos(phi), sin_t * np.sin(phi)], axis=1)
            w = s * s * np.abs(sin_t) * (hi - lo) * span * dtheta * 2.0 * np.pi
        x = self.pole + s[:, None] * (omega @ self.frame.T)
        return self.center + self.radius * x, w * self.radius ** d


def _polar_patches(region: Region, pole, rho=None, excise=False):
    d = region.dim
    if d not in (2, 3):
        raise ValueError(f"deterministic ball cubature supports d in {{2, 3}}, got d={d}; "
                         "use mc_integrate for higher dimensions")
    pole = np.asarray(pole, dtype=float)
    r0 = float(np.linalg.norm(pole))
    if abs(r0 - 1.0) < _ON_SPHERE:
        r0 = 1.0
    if r0 >= 1.0:
        top = np.pi / 2
        base_lo = "zero" if r0 == 1.0 else "s1"
    else:
        top = np.pi
        base_lo = "zero"
    cuts = [0.0, top]
    if rho is not None and r0 > 0:
        cos_r = (rho ** 2 + r0 ** 2 - 1.0) / (2.0 * rho * r0)
        if -1.0 < cos_r < 1.0:
            theta_r = math.acos(cos_r)
            cut = math.asin(min(1.0, r0 * math.sin(theta_r))) if r0 >= 1.0 else theta_r
            if 0.0 < cut < top:
                cuts = [0.0, cut, top]
    if d == 2:
        cuts = sorted({-c for c in cuts} | set(cuts))
    args = (region.center, region.radius)
    patches = []
    for a0, a1 in zip(cuts[:-1], cuts[1:]):
        probe = _PolarPatch(d, pole, a0, a1, base_lo, "s2", rho, *args)
        _, _, _, s1, s2 = probe.limits(np.array([0.5 * (a0 + a1)]))
        lo_b = 0.0 if base_lo == "zero" else float(s1[0])
        hi_b = float(s2[0])
        if hi_b <= lo_b:
            continue
        lo_kind, hi_kind = base_lo, "s2"
        if rho is not None:
            if not excise:
                if rho <= lo_b:
                    continue
                if rho < hi_b:
                    hi_kind = "rho"
            else:
                if rho >= hi_b:
                    continue
                if rho > lo_b:
                    lo_kind = "rho"
        patches.append(_PolarPatch(d, pole, a0, a1, lo_kind, hi_kind, rho, *args))
    return patches


def _patches(region: Region):
    if region.kind == "rectangle":
        return [_BoxPatch(region.lo, region.hi)]
    center = np.array(region.center)
    if region.kind == "ball":
        if region.focus is None:
            patches = _polar_patches(region, np.zeros(region.dim))
            for patch in patches:
                patch.graded = False
            return patches
        return _polar_patches(region, (np.array(region.focus) - center) / region.radius)
    pole = (np.array(region.cap_center) - center) / region.radius
    rho = region.cap_radius / region.radius
    return _polar_patches(region, pole, rho=rho, excise=region.excise)


def _initial_cells(patches, dim, levels, angle_cells):
    """Dyadic grading in the radial parameter for patches starting at the pole."""
    los, his, ids = [], [], []
    pdim = dim
    for k, patch in enumerate(patches):
        if isinstance(patch, _BoxPatch):
            los.append(np.zeros(pdim))
            his.append(np.ones(pdim))
            ids.append(k)
            continue
        if patch.graded and levels > 0:
            edges = [0.0] + [2.0 ** -j for j in range(levels, -1, -1)]
        else:
            edges = [0.0, 1.0]
        n_ang = max(1, int(round(angle_cells * (patch.ang1 - patch.ang0) / (np.pi / 2))))
        ang_edges = np.linspace(0.0, 1.0, n_ang + 1)
        phi_edges = np.linspace(0.0, 1.0, 5) if dim == 3 else np.array([0.0, 1.0])
        for u0, u1 in zip(edges[:-1], edges[1:]):
            for v0, v1 in zip(ang_edges[:-1], ang_edges[1:]):
                for w0, w1 in zip(phi_edges[:-1], phi_edges[1:]):
                    lo = [u0, v0, w0][:pdim]
                    hi = [u1, v1, w1][:pdim]
                    los.append(np.array(lo))
                    his.append(np.array(hi))
                    ids.append(k)
    return np.array(los), np.array(his), np.array(ids, dtype=int)


# ----------------------------------------------------------------- engine

def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class _Engine:
    def __init__(self, integrand, patches, pdim, order, threads=None):
        if order < 4:
            raise ValueError(f"cubature order must be >= 4, got {order}")
        self.f = integrand
        self.patches = patches
        self.pdim = pdim
        self.m = order
        t_hi, w_hi = gauss_legendre01(order)
        t_lo, w_lo = gauss_legendre01(order - 2)
        self.w1 = w_hi
        self.hi_pts, self.hi_w = _tensor(t_hi, w_hi, pdim)
        self.lo_pts, self.lo_w = _tensor(t_lo, w_lo, pdim)
        # discrete Legendre transform for the two highest modes
        j = np.array([order - 2, order - 1])
        self.leg = (2 * j[:, None] + 1) * eval_legendre(j[:, None], 2 * t_hi[None] - 1) * w_hi[None]
        self.threads = _thread_count() if threads is None else max(1, int(threads))

    @property
    def nodes_per_cell(self):
        return len(self.hi_w) + len(self.lo_w)

    def _values(self, lo, hi, ids, pts):
        m, npts = len(lo), len(pts)
        span = hi - lo
        params = lo[:, None, :] + span[:, None, :] * pts[None]
        vals = np.empty((m, npts))
        for k in np.unique(ids):
            sel = ids == k
            flat = params[sel].reshape(-1, self.pdim)
            x, w = self.patches[k].map(flat)
            f = np.asarray(self.f(x), dtype=float).reshape(-1)
            if f.shape[0] != len(x):
                raise ValueError("integrand must return one value per point")
            vals[sel] = (f * w).reshape(-1, npts)
        return vals, np.prod(span, axis=1)

    def _chunk(self, lo, hi, ids):
        fh, vol = self._values(lo, hi, ids, self.hi_pts)
        fl, _ = self._values(lo, hi, ids, self.lo_pts)
        q_hi = (fh * self.hi_w).sum(axis=1) * vol
        q_lo = (fl * self.lo_w).sum(axis=1) * vol
        absq = (np.abs(fh) * self.hi_w).sum(axis=1) * vol
        grid = fh.reshape((len(lo),) + (self.m,) * self.pdim)
        tails = np.empty((len(lo), self.pdim))
        for k in range(self.pdim):
            g = grid
            for other in range(self.pdim - 1, -1, -1):
                if other != k:
                    shape = [1] * g.ndim
                    shape[other + 1] = self.m
                    g = (g * self.w1.reshape(shape)).sum(axis=other + 1)
            coef = g @ self.leg.T
            tails[:, k] = np.abs(coef).sum(axis=1)
        if not (np.all(np.isfinite(q_hi)) and np.all(np.isfinite(q_lo))):
            raise FloatingPointError("integrand produced non-finite values")
        return q_hi, np.abs(q_hi - q_lo), absq, np.argmax(tails, axis=1)

    def evaluate(self, lo, hi, ids):
        size = 64
        bounds = list(range(0, len(lo), size)) + [len(lo)]
        pieces = [(lo[a:b], hi[a:b], ids[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        if self.threads > 1 and len(pieces) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                out = list(pool.map(lambda p: self._chunk(*p), pieces))
        else:
            out = [self._chunk(*p) for p in pieces]
        return tuple(np.concatenate([o[i] for o in out]) for i in range(4))


def _adaptive(integrand, patches, pdim, tol, order, levels, angle_cells, max_nodes, threads):
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    eng = _Engine(integrand, patches, pdim, order, threads)
    if not patches:
        return IntegralEstimate(0.0, 0.0, 0, 0, True)
    lo, hi, ids = _initial_cells(patches, pdim, levels, angle_cells)
    depth = np.zeros(len(lo), dtype=int)
    q, err, absq, axis = eng.evaluate(lo, hi, ids)
    evals = len(lo) * eng.nodes_per_cell
    converged = False
    while True:
        floor = 32 * _EPS * math.fsum(absq)
        refinable = 2.0 * math.fsum(err)
        if refinable + floor <= tol:
            converged = True
            break
        if floor > tol or evals >= max_nodes:
            break
        order_idx = np.argsort(-err, kind="stable")
        cum = np.cumsum(2.0 * err[order_idx])
        need = refinable - 0.5 * max(tol - floor, 0.0)
        count = int(np.searchsorted(cum, need) + 1)
        budget = max(1, (max_nodes - evals) // (2 * eng.nodes_per_cell))
        count = min(count, len(order_idx), budget)
        pick = np.sort(order_idx[:count])
        keep = np.ones(len(lo), dtype=bool)
        keep[pick] = False
        plo, phi_, pax = lo[pick], hi[pick], axis[pick]
        mid = 0.5 * (plo[np.arange(count), pax] + phi_[np.arange(count), pax])
        left_hi = phi_.copy()
        left_hi[np.arange(count), pax] = mid
        right_lo = plo.copy()
        right_lo[np.arange(count), pax] = mid
        new_lo = np.concatenate([plo, right_lo])
        new_hi = np.concatenate([left_hi, phi_])
        new_ids = np.concatenate([ids[pick], ids[pick]])
        new_depth = np.concatenate([depth[pick], depth[pick]]) + 1
        nq, nerr, nabs, nax = eng.evaluate(new_lo, new_hi, new_ids)
        evals += len(new_lo) * eng.nodes_per_cell
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        ids = np.concatenate([ids[keep], new_ids])
        depth = np.concatenate([depth[keep], new_depth])
        q = np.concatenate([q[keep], nq])
        err = np.concatenate([err[keep], nerr])
        absq = np.concatenate([absq[keep], nabs])
        axis = np.concatenate([axis[keep], nax])
    keys = [lo[:, k] for k in range(pdim - 1, -1, -1)] + [ids]
    srt = np.lexsort(keys)
    value = math.fsum(q[srt])
    error = 2.0 * math.fsum(err[srt]) + 32 * _EPS * math.fsum(absq[srt])
    return IntegralEstimate(value, error, int(evals), int(depth.max()), converged)


def integrate(integrand: Integrand, region: Region, tol: float = 1e-10, *,
              order: int = 8, max_nodes: int = 4_000_000, angle_cells: int = 2,
              threads: int | None = None) -> IntegralEstimate:
    """Adaptive cubature of ``integrand`` over ``region`` to absolute ``tol``.

    ``integrand`` maps an ``(N, d)`` array of points to ``N`` values.  When the
    node budget runs out (or ``tol`` is below the round-off floor) the best
    estimate is returned with ``converged=False``.  Cells are evaluated on
    ``threads`` workers (default: the ``WEAKDET_THREADS`` environment
    variable); the result does not depend on it.
    """
    if region.kind == "cap":
        rel = (np.array(region.cap_center) - np.array(region.center)) / region.radius
        if np.linalg.norm(rel) + 1.0 <= region.cap_radius / region.radius and not region.excise:
            region = Region.ball(region.dim, region.center, region.radius, focus=region.cap_center
                                 if np.linalg.norm(rel) <= 1.0 + _ON_SPHERE else None,
                                 levels=region.levels)
    return _adaptive(integrand, _patches(region), region.dim, tol, order,
                     region.levels, angle_cells, max_nodes, threads)


# ------------------------------------------------------------- fixed rules

def ball_rule(d: int, radial_order: int, angular_order: int) -> CubatureRule:
    """Polar product rule on the unit ball.

    Gauss-Jacobi in the radius against ``r^(d-1)``; the trapezoid rule on the
    circle for d=2, Gauss-Legendre in ``cos(theta)`` times a trapezoid in
    ``phi`` for d=3.  ``meta['degree']`` is the total polynomial degree that
    is integrated exactly.
    """
    if d not in (2, 3):
        raise ValueError(f"ball_rule supports d in {{2, 3}}, got d={d}; "
                         "use mc_integrate for higher dimensions")
    if radial_order < 2 or angular_order < 2:
        raise ValueError("rule orders must be >= 2")
    t, w = roots_jacobi(radial_order, 0.0, d - 1.0)
    r = 0.5 * (t + 1.0)
    wr = w / 2.0 ** d
    if d == 2:
        th = 2.0 * np.pi * np.arange(angular_order) / angular_order
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        wa = np.full(angular_order, 2.0 * np.pi / angular_order)
        degree = min(2 * radial_order - 1, angular_order - 1)
    else:
        z, wz = np.polynomial.legendre.leggauss(angular_order)
        nphi = 2 * angular_order
        ph = 2.0 * np.pi * np.arange(nphi) / nphi
        zz, pp = np.meshgrid(z, ph, indexing="ij")
        st = np.sqrt(1.0 - zz ** 2)
        dirs = np.stack([zz.ravel(), (st * np.cos(pp)).ravel(), (st * np.sin(pp)).ravel()],
                        axis=1)
        wa = np.outer(wz, np.full(nphi, 2.0 * np.pi / nphi)).ravel()
        degree = min(2 * radial_order - 1, 2 * angular_order - 1)
    nodes = (r[:, None, None] * dirs[None]).reshape(-1, d)
    weights = np.outer(wr, wa).ravel()
    meta = {"kind": "ball", "dim": d, "radial_order": radial_order,
            "angular_order": angular_order, "degree": degree}
    return CubatureRule(nodes, weights, meta)


def _tangent_grading(patches, lo, hi, ids, levels):
    """Split angle cells dyadically toward tangent directions (chord length -> 0).

    With the pole on the sphere the chords shrink to zero length at
    ``|theta| = pi/2``, and the integrand varies there on the radial scale.
    """
    out_lo, out_hi, out_ids = [], [], []
    for a, b, k in zip(lo, hi, ids):
        patch = patches[k]
        top = np.pi / 2
        at0 = a[1] == 0.0 and math.isclose(abs(patch.ang0), top)
        at1 = b[1] == 1.0 and math.isclose(abs(patch.ang1), top)
        edges = [a[1], b[1]]
        width = b[1] - a[1]
        if at0:
            edges += [a[1] + width * 2.0 ** -j for j in range(1, levels + 1)]
        if at1:
            edges += [b[1] - width * 2.0 ** -j for j in range(1, levels + 1)]
        edges = sorted(set(edges))
        for v0, v1 in zip(edges[:-1], edges[1:]):
            c0, c1 = a.copy(), b.copy()
            c0[1], c1[1] = v0, v1
            out_lo.append(c0)
            out_hi.append(c1)
            out_ids.append(k)
    return np.array(out_lo), np.array(out_hi), np.array(out_ids, dtype=int)


def graded_ball_rule(d: int, base_rule_meta: dict, target, levels: int) -> CubatureRule:
    """Unit-ball rule graded dyadically toward a boundary point ``target``.

    Polar coordinates about ``target``; the radial parameter is split at
    ``2^-levels, ..., 1/2`` and every cell carries a Gauss-Legendre product
    rule with the radial/angular orders of ``base_rule_meta``.
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    target = np.asarray(target, dtype=float)
    if len(target) != d:
        raise ValueError("target must match the dimension")
    nt = np.linalg.norm(target)
    if nt == 0:
        raise ValueError("target must be a nonzero (boundary) point")
    region = Region.ball(d, focus=target / nt, levels=levels)
    patches = _patches(region)
    lo, hi, ids = _tangent_grading(patches, *_initial_cells(patches, d, levels, angle_cells=2),
                                   levels)
    mr = int(base_rule_meta.get("radial_order", 8))
    ma = int(base_rule_meta.get("angular_order", 8))
    orders = [mr, ma, ma][:d]
    rules = [gauss_legendre01(m) for m in orders]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    nodes, weights = [], []
    for k in range(len(lo)):
        span = hi[k] - lo[k]
        x, w = patches[ids[k]].map(lo[k] + span * pts)
        nodes.append(x)
        weights.append(w * wts * np.prod(span))
    meta = {"kind": "graded_ball", "dim": d, "radial_order": mr, "angular_order": ma,
            "target": tuple(float(v) for v in target / nt), "levels": levels}
    return CubatureRule(np.concatenate(nodes), np.concatenate(weights), meta)


# ------------------------------------------------------------- Monte Carlo

def mc_integrate(integrand: Integrand, region: Region, samples: int, seed: int,
                 batch: int = 1 << 16) -> IntegralEstimate:
    """Plain Monte Carlo over the bounding box; error is one standard error.

    ``samples`` uniform draws in the box; the integrand is evaluated at the
    draws inside the region and counts as zero elsewhere, so any region kind
    (and any dimension) works.
    """
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    rng = np.random.default_rng(seed)
    d = region.dim
    if region.kind == "rectangle":
        lo, hi = np.array(region.lo), np.array(region.hi)
    else:
        c, r = np.array(region.center), region.radius
        lo, hi = c - r, c + r
    box_vol = float(np.prod(hi - lo))
    s1 = s2 = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        pts = lo + (hi - lo) * rng.random((m, d))
        mask = region.contains(pts, slack=0.0)
        vals = np.asarray(integrand(pts[mask]), dtype=float) * np.ones(int(mask.sum()))
        s1 += math.fsum(vals)
        s2 += math.fsum(vals * vals)
        done += m
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    return IntegralEstimate(box_vol * mean, box_vol * math.sqrt(var / samples), samples, 0, True)
