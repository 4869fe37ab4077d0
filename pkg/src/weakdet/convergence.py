"""Sweeps over the sequence index, weak-convergence pairings and limit fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import functionals as fn
from . import maps
from .functionals import FunctionalResult
from .maps import MapFamily
from .quadrature import Region, integrate

Template = Union[MapFamily, Callable[[int], MapFamily]]

MODEL = "c0 + c1/n"


def member(template: Template, n: int) -> MapFamily:
    if isinstance(template, MapFamily):
        return template.at(n)
    return template(n)


def _describe(template: Template) -> dict:
    if isinstance(template, MapFamily):
        desc = template.describe()
        desc.pop("n", None)
        desc.pop("scale", None)
        return desc
    return {"template": getattr(template, "__name__", repr(template))}


@dataclass(frozen=True)
class Fit:
    limit: float
    slope: float
    residual: float
    n_used: tuple[int, ...]


def extrapolate(ns: Sequence[int], values: Sequence[float]) -> Fit:
    """Least-squares fit of ``c0 + c1/n`` to the larger half of the points.

    ``residual`` is the largest absolute misfit over the points used.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 2:
        raise ValueError("need at least two points to extrapolate")
    order = np.argsort(ns, kind="stable")
    ns, values = ns[order], values[order]
    k = min(len(ns) // 2, len(ns) - 2)
    ns, values = ns[k:], values[k:]
    design = np.stack([np.ones_like(ns), 1.0 / ns], axis=1)
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = float(np.max(np.abs(design @ coef - values)))
    return Fit(float(coef[0]), float(coef[1]), resid, tuple(int(n) for n in ns))


@dataclass
class Row:
    n: int
    results: dict[str, FunctionalResult]
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results.values())


@dataclass
class SequenceReport:
    family: dict
    functionals: list[str]
    rows: list[Row]
    fits: dict[str, Fit]
    model: str = MODEL
    meta: dict = field(default_factory=dict)

    def values(self, name: str | None = None) -> np.ndarray:
        name = name or self.functionals[0]
        return np.array([row.results[name].value for row in self.rows])

    def errors(self, name: str | None = None) -> np.ndarray:
        name = name or self.functionals[0]
        return np.array([row.results[name].error for row in self.rows])

    @property
    def ns(self) -> list[int]:
        return [row.n for row in self.rows]

    @property
    def extrapolated_limit(self) -> float:
        return self.fits[self.functionals[0]].limit

    @property
    def fit_residual(self) -> float:
        return self.fits[self.functionals[0]].residual


def _check_ns(n_list, minimum=3):
    n_list = [int(n) for n in n_list]
    if len(n_list) < minimum:
        raise ValueError(f"need at least {minimum} indices, got {n_list}")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise ValueError(f"indices must be positive and strictly ascending, got {n_list}")
    return n_list


def _fit_rows(rows: list[Row], names: list[str]) -> dict[str, Fit]:
    fits = {}
    for name in names:
        good = [row for row in rows if row.results[name].converged]
        if len(good) >= 2:
            fits[name] = extrapolate([r.n for r in good], [r.results[name].value for r in good])
    return fits


def sweep(template: Template, n_list, functional_set=("abs_det",),
          tol: float = fn.DEFAULT_TOL) -> SequenceReport:
    """Evaluate each functional at every n and extrapolate each to n -> infinity.

    Rows whose cubature did not converge stay in the report but are left out
    of the fit.
    """
    n_list = _check_ns(n_list)
    names = list(functional_set)
    for spec in names:
        fn.parse_functional(spec)
    rows = []
    for n in n_list:
        fam = member(template, n)
        rows.append(Row(n, {spec: fn.evaluate_functional(spec, fam, tol) for spec in names}))
    return SequenceReport(_describe(template), names, rows, _fit_rows(rows, names))


@dataclass
class PointwiseTable:
    points: np.ndarray
    ns: np.ndarray
    norms: np.ndarray
    bounds: np.ndarray
    monotone: np.ndarray
    within_bound: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.monotone) and np.all(self.within_bound))


def pointwise_limit_check(template: Template, sample_points, n_max: int) -> PointwiseTable:
    """``|f_n(x)|`` for ``n = 1..n_max`` with monotonicity and the ``2/(n|x - e_1|)`` bound."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    e1 = np.zeros(pts.shape[1])
    e1[0] = 1.0
    dist = np.linalg.norm(pts - e1, axis=1)
    if np.any(dist < 1e-12):
        raise ValueError("sample points must exclude e_1, where f_n(e_1) does not decay")
    ns = np.arange(1, n_max + 1)
    norms = np.stack([np.linalg.norm(maps.evaluate(member(template, n), pts), axis=1)
                      for n in ns], axis=1)
    slack = 1e-13 * np.maximum(norms[:, :-1], 1.0)
    monotone = np.all(np.diff(norms, axis=1) <= slack, axis=1)
    bounds = 2.0 / (dist * n_max)
    within = norms[:, -1] <= bounds * (1 + 1e-12)
    return PointwiseTable(pts, ns, norms, bounds, monotone, within)


@dataclass(frozen=True)
class TestField:
    """Matrix-valued (or scalar bump) test object for pairings.

    ``constant``: ``params['matrix']``.  ``polynomial``: ``params['coeffs']``
    maps monomial exponent tuples to coefficient matrices.  ``bump``:
    ``(1 - |x/rho|^2)^2`` inside ``B(0, rho)``, zero outside.
    """

    __test__ = False

    kind: str
    dim: int
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "bump"):
            raise ValueError(f"unknown test field kind {self.kind!r}")
        if self.kind == "bump":
            rho = self.params.get("radius", 0.0)
            if not 0 < rho < 1:
                raise ValueError(f"bump support must lie strictly inside B(0,1), got {rho}")
        if self.kind == "constant":
            mat = np.asarray(self.params["matrix"], dtype=float)
            if mat.shape != (self.dim, self.dim):
                raise ValueError(f"constant field must be {self.dim}x{self.dim}")

    @classmethod
    def constant(cls, matrix):
        mat = np.asarray(matrix, dtype=float)
        return cls("constant", mat.shape[0], {"matrix": mat})

    @classmethod
    def polynomial(cls, dim: int, degree: int, seed: int = 0):
        """Random monomial field up to ``degree`` with seeded Gaussian coefficients."""
        if degree < 0:
            raise ValueError("degree must be >= 0")
        rng = np.random.default_rng(seed)
        exps = [e for total in range(degree + 1) for e in _exponents(dim, total)]
        coeffs = {e: rng.standard_normal((dim, dim)) for e in exps}
        return cls("polynomial", dim, {"coeffs": coeffs, "degree": degree, "seed": seed})

    @classmethod
    def bump(cls, dim: int, radius: float = 0.5, amplitude: float = 1.0):
        return cls("bump", dim, {"radius": float(radius), "amplitude": float(amplitude)})

    @property
    def support_radius(self) -> float | None:
        return self.params["radius"] if self.kind == "bump" else None

    def scalar(self, x) -> np.ndarray:
        if self.kind != "bump":
            raise ValueError("only bump fields are scalar")
        x = np.atleast_2d(x)
        rho, amp = self.params["radius"], self.params["amplitude"]
        t = 1.0 - np.sum(x * x, axis=1) / rho ** 2
        return amp * np.where(t > 0, t * t, 0.0)

    @property
    def sup(self) -> float:
        if self.kind == "bump":
            return abs(self.params["amplitude"])
        raise ValueError("sup is only tracked for bump fields")

    def matrix(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        d = self.dim
        if self.kind == "constant":
            return np.broadcast_to(self.params["matrix"], (len(x), d, d))
        if self.kind == "bump":
            return self.scalar(x)[:, None, None] * np.eye(d)
        out = np.zeros((len(x), d, d))
        for exps, mat in self.params["coeffs"].items():
            mono = np.prod(x ** np.asarray(exps), axis=1)
            out += mono[:, None, None] * mat
        return out

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "polynomial":
            out.update(degree=self.params["degree"], seed=self.params["seed"])
        elif self.kind == "bump":
            out.update(radius=self.params["radius"], amplitude=self.params["amplitude"])
        return out


def _exponents(dim, total):
    if dim == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _exponents(dim - 1, total - first):
            yield (first,) + rest


def field_battery(dim: int, seed: int = 0) -> list[TestField]:
    """Fixed battery: identity, a seeded constant matrix, degree 1 and 2 fields, one bump."""
    rng = np.random.default_rng(seed)
    return [
        TestField.constant(np.eye(dim)),
        TestField.constant(rng.standard_normal((dim, dim))),
        TestField.polynomial(dim, 1, seed),
        TestField.polynomial(dim, 2, seed + 1),
        TestField.bump(dim, 0.5),
    ]


def field_dual_norm(field_: TestField, tol: float = 1e-10) -> float:
    """``||Phi||_{L^{d/(d-1)}}`` over the unit ball (Frobenius pointwise)."""
    d = field_.dim
    q = d / (d - 1.0)
    est = integrate(lambda x: maps.frobenius(field_.matrix(x)) ** q, Region.ball(d), tol)
    return est.value ** (1.0 / q)


def weak_pairing(template: Template, field_: TestField, n_list,
                 tol: float = fn.DEFAULT_TOL) -> SequenceReport:
    """``int_{B(0,1)} <grad f_n, Phi>_F`` per n, with the Hoelder bound."""
    n_list = _check_ns(n_list)
    rows = []
    grad_norms = []
    for n in n_list:
        fam = member(template, n)
        if fam.dim != field_.dim:
            raise ValueError("field and family dimensions differ")
        region = fn.default_region(fam)

        def pairing(x, fam=fam):
            return np.sum(maps.jacobian(fam, x) * field_.matrix(x), axis=(1, 2))

        est = integrate(pairing, region, tol)
        grad = fn.grad_lp_norm(fam, region, tol=tol)
        grad_norms.append(grad.value)
        res = FunctionalResult("weak_pairing", est.value, est.abs_error_estimate, n, fam.dim,
                               est.node_count, est.converged)
        rows.append(Row(n, {"weak_pairing": res, "grad_lp": grad}))
    bound = field_dual_norm(field_) * max(grad_norms)
    meta = {"field": field_.describe(), "holder_bound": bound}
    return SequenceReport(_describe(template), ["weak_pairing", "grad_lp"], rows,
                          _fit_rows(rows, ["weak_pairing"]), meta=meta)


def det_envelope(family: MapFamily, support_radius: float, sup_bump: float) -> float:
    """Bound on ``|int bump det grad f_n|`` for a bump supported in ``B(0, rho)``.

    On ``B(0, rho)`` the distance to the pole is at least ``1 - rho``, so
    ``|det| <= (scale * 2 / (n (1 - rho)^2))^d``.
    """
    if family.base != "raw":
        raise ValueError("the envelope is derived for the inversion family")
    d, rho = family.dim, support_radius
    lam = family.scale * 2.0 / (family.n * (1.0 - rho) ** 2)
    return maps.ball_volume(d) * rho ** d * lam ** d * sup_bump


def local_det_pairing(template: Template, bump: TestField, n_list,
                      tol: float = fn.DEFAULT_TOL) -> SequenceReport:
    """Local pairing ``int bump det grad f_n`` next to the global ``int det grad f_n``."""
    if bump.kind != "bump":
        raise ValueError("local pairing needs a bump test field")
    n_list = _check_ns(n_list)
    rho = bump.support_radius
    rows = []
    for n in n_list:
        fam = member(template, n)
        region = Region.ball(fam.dim, radius=rho)
        est = integrate(lambda x, fam=fam: bump.scalar(x) * maps.det_jacobian(fam, x),
                        region, tol)
        local = FunctionalResult("local_det", est.value, est.abs_error_estimate, n, fam.dim,
                                 est.node_count, est.converged)
        glob = fn.det_functional(fam, tol=tol)
        gap = abs(glob.value) - abs(local.value)
        gap_res = FunctionalResult("gap", gap, glob.error + local.error, n, fam.dim,
                                   converged=glob.converged and local.converged)
        extra = {}
        if fam.base == "raw":
            extra["envelope"] = det_envelope(fam, rho, bump.sup)
        rows.append(Row(n, {"local_det": local, "global_det": glob, "gap": gap_res}, extra))
    names = ["local_det", "global_det", "gap"]
    return SequenceReport(_describe(template), names, rows, _fit_rows(rows, names),
                          meta={"field": bump.describe()})


def energy_gap(template: Template, c: float, n_list, tol: float = fn.DEFAULT_TOL
               ) -> SequenceReport:
    """``||s f_n||_{W^{1,d}}^d - d^{d/2} c`` for the family rescaled to image volume ``c``."""
    if not c > 0:
        raise ValueError(f"target volume c must be positive, got {c}")
    n_list = _check_ns(n_list)
    rows = []
    for n in n_list:
        fam = member(template, n)
        if fam.base == "raw" and fam.variant in ("raw", "scaled"):
            scaled = maps.scaled(fam.dim, n, c)
        else:
            scaled = fn.scale_to_volume(fam, c, tol=tol)
        d = fam.dim
        bound = d ** (d / 2) * c
        energy = fn.sobolev_energy(scaled, tol=tol)
        gap = FunctionalResult("energy_gap", energy.value - bound, energy.error, n, d,
                               energy.nodes, energy.converged)
        rows.append(Row(n, {"energy_gap": gap, "sobolev_energy": energy},
                        {"lower_bound": bound, "scale": scaled.scale}))
    names = ["energy_gap", "sobolev_energy"]
    desc = _describe(template)
    desc["c"] = float(c)
    return SequenceReport(desc, names, rows, _fit_rows(rows, names))
