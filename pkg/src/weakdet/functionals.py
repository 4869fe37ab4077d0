"""Integral functionals of a map family: determinant, norms, energy, concentration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import maps
from .maps import MapFamily
from .quadrature import IntegralEstimate, Region, integrate

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class FunctionalResult:
    name: str
    value: float
    error: float
    n: int
    d: int
    nodes: int = 0
    converged: bool = True
    param: float | None = None
    parts: dict = field(default_factory=dict, compare=False)

    @property
    def label(self) -> str:
        return self.name if self.param is None else f"{self.name}:{self.param:g}"


def grading_levels(n: int) -> int:
    """Dyadic levels so the innermost shell is at most ``1/(4n)`` wide."""
    return max(1, math.ceil(math.log2(8 * n)))


def default_region(family: MapFamily) -> Region:
    """Natural domain of a family, graded toward ``e_1`` for the inversion maps."""
    if family.base == "tartar":
        return Region.rectangle([0.0, 0.0], [family.a, family.a])
    if family.base == "raw":
        e1 = np.zeros(family.dim)
        e1[0] = 1.0
        return Region.ball(family.dim, focus=e1, levels=grading_levels(family.n))
    return Region.ball(family.dim)


def _result(name, family, est: IntegralEstimate, value=None, error=None, param=None, parts=None):
    return FunctionalResult(
        name=name,
        value=float(est.value if value is None else value),
        error=float(est.abs_error_estimate if error is None else error),
        n=family.n,
        d=family.dim,
        nodes=est.node_count,
        converged=est.converged,
        param=param,
        parts=parts or {},
    )


def _root(est: IntegralEstimate, p: float):
    """``I^(1/p)`` with the error propagated to first order."""
    val = max(est.value, 0.0)
    if val > 0:
        return val ** (1.0 / p), val ** (1.0 / p - 1.0) * est.abs_error_estimate / p
    return 0.0, est.abs_error_estimate ** (1.0 / p)


def det_functional(family: MapFamily, region: Region | None = None,
                   tol: float = DEFAULT_TOL) -> FunctionalResult:
    """Signed integral of the Jacobian determinant."""
    region = region or default_region(family)
    est = integrate(lambda x: maps.det_jacobian(family, x), region, tol)
    return _result("det", family, est)


def abs_det_functional(family: MapFamily, region: Region | None = None,
                       tol: float = DEFAULT_TOL) -> FunctionalResult:
    region = region or default_region(family)
    est = integrate(lambda x: np.abs(maps.det_jacobian(family, x)), region, tol)
    return _result("abs_det", family, est)


def grad_power_integral(family: MapFamily, p: float, region: Region | None = None,
                        tol: float = DEFAULT_TOL) -> IntegralEstimate:
    """``int |grad f|_F^p``."""
    region = region or default_region(family)
    return integrate(lambda x: maps.frobenius(maps.jacobian(family, x)) ** p, region, tol)


def grad_lp_norm(family: MapFamily, region: Region | None = None, p: float | None = None,
                 tol: float = DEFAULT_TOL) -> FunctionalResult:
    """``(int |grad f|_F^p)^(1/p)``; ``p`` defaults to the dimension."""
    p = float(family.dim if p is None else p)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    est = grad_power_integral(family, p, region, tol)
    val, err = _root(est, p)
    return _result("grad_lp", family, est, val, err, param=p, parts={"integral": est.value})


def lp_norm(family: MapFamily, region: Region | None = None, p: float | None = None,
            tol: float = DEFAULT_TOL) -> FunctionalResult:
    """``(int |f|^p)^(1/p)``."""
    p = float(family.dim if p is None else p)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    region = region or default_region(family)
    est = integrate(lambda x: np.linalg.norm(maps.evaluate(family, x), axis=1) ** p,
                    region, tol)
    val, err = _root(est, p)
    return _result("lp", family, est, val, err, param=p, parts={"integral": est.value})


def sobolev_energy(family: MapFamily, region: Region | None = None,
                   tol: float = DEFAULT_TOL) -> FunctionalResult:
    """``||f||_{W^{1,d}}^d = int |f|^d + int |grad f|_F^d``."""
    d = family.dim
    region = region or default_region(family)
    values = integrate(lambda x: np.linalg.norm(maps.evaluate(family, x), axis=1) ** d,
                       region, tol / 2)
    grads = grad_power_integral(family, d, region, tol / 2)
    est = IntegralEstimate(
        values.value + grads.value,
        values.abs_error_estimate + grads.abs_error_estimate,
        values.node_count + grads.node_count,
        max(values.refinement_depth, grads.refinement_depth),
        values.converged and grads.converged,
    )
    parts = {"lp_part": values.value, "grad_part": grads.value,
             "lp_error": values.abs_error_estimate, "grad_error": grads.abs_error_estimate}
    return _result("sobolev_energy", family, est, parts=parts)


def image_volume_closed_form(d: int, n: int) -> float:
    """Volume ``omega_d (1 - 1/(2n+1))^d`` of the raw image ball."""
    if d < 2 or n < 1:
        raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
    return maps.ball_volume(d) * maps.image_radius(n) ** d


def concentration_profile(family: MapFamily, center, radii, tol: float = DEFAULT_TOL
                          ) -> list[FunctionalResult]:
    """Share of ``int |grad f|_F^d`` lying in ``B(0,1) & B(center, rho)`` for each rho."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii must be positive and strictly ascending, got {radii}")
    d = family.dim
    center = np.asarray(center, dtype=float)
    base = default_region(family)
    if base.kind != "ball":
        raise ValueError("concentration profiles are defined on the unit ball")
    total = grad_power_integral(family, d, base, tol)
    if total.value <= 0:
        raise ValueError("family has no gradient energy")
    out = []
    for rho in radii:
        if rho >= np.linalg.norm(center) + 1.0:
            frac, err, nodes, ok = 1.0, 0.0, 0, True
        else:
            est = grad_power_integral(family, d, Region.cap(base, center, rho), tol)
            frac = est.value / total.value
            err = (est.abs_error_estimate + frac * total.abs_error_estimate) / total.value
            nodes, ok = est.node_count, est.converged and total.converged
        out.append(FunctionalResult("concentration", frac, err, family.n, d, nodes, ok,
                                    param=rho))
    return out


def scale_to_volume(family: MapFamily, c: float, region: Region | None = None,
                    tol: float = DEFAULT_TOL) -> MapFamily:
    """Multiply ``family`` so that ``int |det grad f| = c`` and the signed integral is ``+c``."""
    if not c > 0:
        raise ValueError(f"target volume must be positive, got {c}")
    vol = abs_det_functional(family, region, tol).value
    if not vol > 0:
        raise ValueError("cannot rescale a family with vanishing Jacobian integral")
    signed = det_functional(family, region, tol).value
    s = (c / vol) ** (1.0 / family.dim)
    fam = maps.rescale(family, s, orientation=-1.0 if signed < 0 else 1.0)
    return replace(fam, variant="scaled", target=float(c))


FUNCTIONALS = ("det", "abs_det", "grad_lp", "lp", "sobolev_energy", "image_volume",
               "concentration")


def parse_functional(spec: str) -> tuple[str, float | None]:
    """``'grad_lp:2'`` -> ``('grad_lp', 2.0)``."""
    name, _, arg = spec.partition(":")
    if name not in FUNCTIONALS:
        raise ValueError(f"unknown functional {name!r}; choose from {', '.join(FUNCTIONALS)}")
    return name, (float(arg) if arg else None)


def evaluate_functional(spec: str, family: MapFamily, tol: float = DEFAULT_TOL
                        ) -> FunctionalResult:
    name, arg = parse_functional(spec)
    if name == "det":
        return det_functional(family, tol=tol)
    if name == "abs_det":
        return abs_det_functional(family, tol=tol)
    if name == "grad_lp":
        return grad_lp_norm(family, p=arg, tol=tol)
    if name == "lp":
        return lp_norm(family, p=arg, tol=tol)
    if name == "sobolev_energy":
        return sobolev_energy(family, tol=tol)
    if name == "image_volume":
        if family.base != "raw":
            raise ValueError("the closed-form image volume applies to the raw family only")
        vol = image_volume_closed_form(family.dim, family.n)
        return FunctionalResult("image_volume", vol, 0.0, family.n, family.dim)
    e1 = np.zeros(family.dim)
    e1[0] = 1.0
    return concentration_profile(family, e1, [0.5 if arg is None else arg], tol)[0]
