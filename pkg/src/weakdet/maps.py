"""Closed-form map families with analytic derivatives.

Every family is a base map (the Moebius inversion ``raw``, the Tartar
oscillation, or one of the ``identity``/``zero`` fixtures) followed by a
similarity of the target space::

    f(x) = scale * signs * base(x) + shift

so normalization, reflection and rescaling only touch the post-composed
affine part and the Jacobian stays analytic.  All functions accept a single
point of shape ``(d,)`` or a batch of shape ``(N, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.special import gamma

BASES = ("raw", "tartar", "identity", "zero")
VARIANTS = ("raw", "normalized", "scaled", "reflected", "tartar", "identity", "zero")

DEFAULT_FD_STEP = 1e-6


def ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


def image_radius(n: int) -> float:
    """Radius of the round image ball of the raw map of index n."""
    return 1.0 - 1.0 / (2 * n + 1)


def image_center(n: int) -> float:
    """First coordinate of the image ball center (other coordinates vanish)."""
    return -(1.0 + 1.0 / (2 * n + 1))


@dataclass(frozen=True)
class MapFamily:
    """One member of a parameterized map family.

    ``signs`` and ``shift`` default to the identity similarity.  Instances
    are immutable; use :func:`reflect`, :func:`normalize` or :func:`scaled`
    to derive new members.
    """

    dim: int
    n: int = 1
    base: str = "raw"
    variant: str = "raw"
    scale: float = 1.0
    signs: tuple[float, ...] = field(default=())
    shift: tuple[float, ...] = field(default=())
    a: float = 0.5
    target: float | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dim!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"index n must be an integer >= 1, got {self.n!r}")
        if self.base not in BASES:
            raise ValueError(f"unknown base map {self.base!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.base == "tartar":
            if self.dim != 2:
                raise ValueError("the Tartar family is only defined for d = 2")
            if not 0.0 < self.a < 1.0:
                raise ValueError(f"Tartar side length must lie in (0, 1), got {self.a}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.target is not None and not self.target > 0:
            raise ValueError(f"target volume must be positive, got {self.target}")
        signs = self.signs or (1.0,) * self.dim
        shift = self.shift or (0.0,) * self.dim
        if len(signs) != self.dim or any(s not in (1.0, -1.0) for s in signs):
            raise ValueError(f"signs must be {self.dim} entries of +-1, got {signs}")
        if len(shift) != self.dim:
            raise ValueError(f"shift must have {self.dim} entries, got {shift}")
        object.__setattr__(self, "signs", tuple(float(s) for s in signs))
        object.__setattr__(self, "shift", tuple(float(s) for s in shift))

    @property
    def pole(self) -> np.ndarray:
        """Pole ``a_n = (1 + 1/n, 0, ..., 0)`` of the raw inversion."""
        p = np.zeros(self.dim)
        p[0] = 1.0 + 1.0 / self.n
        return p

    @property
    def orientation(self) -> float:
        """Product of the post-composition signs (+1 or -1)."""
        return float(np.prod(self.signs))

    @property
    def conformal(self) -> bool:
        return self.base in ("raw", "identity")

    def at(self, n: int) -> "MapFamily":
        """Same construction at another index.

        The scale of a ``normalized`` or ``scaled`` member depends on n, so
        those are rebuilt from their recipe rather than copied.
        """
        if self.variant == "normalized":
            fam = normalize(self.dim, n)
        elif self.variant == "scaled" and self.base == "raw":
            fam = scaled(self.dim, n, self.target)
        else:
            return replace(self, n=n)
        for axis, (new, old) in enumerate(zip(fam.signs, self.signs), start=1):
            if new != old:
                fam = reflect(fam, axis)
        return fam

    def describe(self) -> dict:
        out = {"variant": self.variant, "base": self.base, "dim": self.dim, "n": self.n}
        if self.base == "tartar":
            out["a"] = self.a
        if self.target is not None:
            out["c"] = self.target
        if self.scale != 1.0:
            out["scale"] = self.scale
        if self.orientation < 0:
            out["orientation"] = -1
        return out


def raw(dim: int, n: int) -> MapFamily:
    return MapFamily(dim=dim, n=n)


def tartar(n: int, a: float = 0.5) -> MapFamily:
    return MapFamily(dim=2, n=n, base="tartar", variant="tartar", a=a)


def identity(dim: int) -> MapFamily:
    return MapFamily(dim=dim, base="identity", variant="identity")


def zero(dim: int) -> MapFamily:
    return MapFamily(dim=dim, base="zero", variant="zero")


def normalize(dim: int, n: int) -> MapFamily:
    """Raw map translated and dilated so the unit ball maps onto itself.

    ``g_n = (f_n - c_n) / r_n`` with ``c_n = -(1 + 1/(2n+1)) e_1`` and
    ``r_n = 1 - 1/(2n+1)``.  Then ``g_n(e_1) = -e_1``, ``g_n(-e_1) = e_1``
    and ``g_n -> e_1`` away from ``e_1``.
    """
    r = image_radius(n)
    shift = np.zeros(dim)
    shift[0] = -image_center(n) / r
    return MapFamily(dim=dim, n=n, variant="normalized", scale=1.0 / r,
                     shift=tuple(shift))


def reflect(family: MapFamily, axis: int) -> MapFamily:
    """Post-compose with the reflection negating coordinate ``axis`` (1-based)."""
    if int(axis) != axis or not 1 <= axis <= family.dim:
        raise ValueError(f"axis must lie in [1, {family.dim}], got {axis!r}")
    signs = list(family.signs)
    shift = list(family.shift)
    signs[axis - 1] = -signs[axis - 1]
    shift[axis - 1] = -shift[axis - 1]
    variant = family.variant
    if variant in ("raw", "identity"):
        variant = "reflected"
    return replace(family, signs=tuple(signs), shift=tuple(shift), variant=variant)


def rescale(family: MapFamily, s: float, orientation: float = 1.0) -> MapFamily:
    """Multiply a family by ``s > 0``; ``orientation=-1`` also reflects the last axis."""
    if not s > 0:
        raise ValueError(f"scale factor must be positive, got {s}")
    fam = replace(family, scale=float(family.scale * s),
                  shift=tuple(float(s * v) for v in family.shift))
    if orientation < 0:
        fam = reflect(fam, family.dim)
    return fam


def scaled(dim: int, n: int, c: float) -> MapFamily:
    """Raw map multiplied so that its image has volume ``c``.

    The raw determinant is negative, so a reflection of the last axis is
    composed in to make the signed integral ``+c`` as well.  The scale
    factor uses the exact image volume ``omega_d * r_n^d``; see
    :func:`weakdet.functionals.scale_to_volume` for the cubature-based
    version that works for any base.
    """
    if c is None or not c > 0:
        raise ValueError(f"target volume c must be positive, got {c}")
    s = (c / (ball_volume(dim) * image_radius(n) ** dim)) ** (1.0 / dim)
    fam = rescale(raw(dim, n), s, orientation=-1.0)
    return replace(fam, variant="scaled", target=float(c))


def _as_points(family: MapFamily, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.ndim != 2 or pts.shape[1] != family.dim:
        raise ValueError(
            f"point dimension {pts.shape[-1]} does not match family dimension {family.dim}")
    return pts, single


def _raw_parts(family: MapFamily, pts: np.ndarray):
    # x - a_n with the first coordinate as (x_1 - 1) - 1/n: exact at x = e_1
    diff = pts.copy()
    diff[:, 0] = (pts[:, 0] - 1.0) - 1.0 / family.n
    r2 = np.einsum("ij,ij->i", diff, diff)
    lam = (2.0 / family.n) / r2
    return diff, r2, lam


def _base_eval(family: MapFamily, pts: np.ndarray) -> np.ndarray:
    if family.base == "raw":
        diff, r2, _ = _raw_parts(family, pts)
        return (2.0 / family.n) * diff / r2[:, None]
    if family.base == "tartar":
        n = family.n
        x, y = pts[:, 0], pts[:, 1]
        amp = (1.0 - y) ** n / math.sqrt(n)
        return np.stack([amp * np.sin(n * x), amp * np.cos(n * x)], axis=1)
    if family.base == "identity":
        return pts.copy()
    return np.zeros_like(pts)


def _base_jacobian(family: MapFamily, pts: np.ndarray) -> np.ndarray:
    m, d = pts.shape
    if family.base == "raw":
        diff, r2, lam = _raw_parts(family, pts)
        u = diff / np.sqrt(r2)[:, None]
        house = np.eye(d)[None] - 2.0 * u[:, :, None] * u[:, None, :]
        return lam[:, None, None] * house
    if family.base == "tartar":
        n = family.n
        x, y = pts[:, 0], pts[:, 1]
        rn = math.sqrt(n)
        c, s = np.cos(n * x), np.sin(n * x)
        p0 = (1.0 - y) ** n
        p1 = (1.0 - y) ** (n - 1)
        jac = np.empty((m, 2, 2))
        jac[:, 0, 0] = rn * p0 * c
        jac[:, 0, 1] = -rn * p1 * s
        jac[:, 1, 0] = -rn * p0 * s
        jac[:, 1, 1] = -rn * p1 * c
        return jac
    if family.base == "identity":
        return np.broadcast_to(np.eye(d), (m, d, d)).copy()
    return np.zeros((m, d, d))


def _base_det(family: MapFamily, pts: np.ndarray) -> np.ndarray:
    if family.base == "raw":
        _, _, lam = _raw_parts(family, pts)
        return -(lam ** family.dim)
    if family.base == "tartar":
        n = family.n
        return -n * (1.0 - pts[:, 1]) ** (2 * n - 1)
    if family.base == "identity":
        return np.ones(len(pts))
    return np.zeros(len(pts))


def evaluate(family: MapFamily, x) -> np.ndarray:
    """Map value at ``x``; raw is ``(2/n)(x - a_n)/|x - a_n|^2``."""
    pts, single = _as_points(family, x)
    out = family.scale * np.asarray(family.signs) * _base_eval(family, pts)
    out = out + np.asarray(family.shift)
    return out[0] if single else out


def jacobian(family: MapFamily, x) -> np.ndarray:
    """Analytic Jacobian, ``J[i, j] = d f_i / d x_j``.

    For the raw map this is ``lam(x) (I - 2 u u^T)`` with
    ``lam = (2/n)/|x - a_n|^2`` and ``u`` the unit vector along ``x - a_n``.
    """
    pts, single = _as_points(family, x)
    jac = family.scale * np.asarray(family.signs)[None, :, None] * _base_jacobian(family, pts)
    return jac[0] if single else jac


def det_jacobian(family: MapFamily, x) -> np.ndarray | float:
    """Closed-form Jacobian determinant (no matrix factorization)."""
    pts, single = _as_points(family, x)
    val = family.scale ** family.dim * family.orientation * _base_det(family, pts)
    return float(val[0]) if single else val


def conformal_factor(family: MapFamily, x) -> np.ndarray | float:
    """Common singular value of the Jacobian of a conformal family."""
    if not family.conformal:
        raise ValueError(f"{family.variant}/{family.base} is not conformal")
    pts, single = _as_points(family, x)
    if family.base == "raw":
        lam = _raw_parts(family, pts)[2]
    else:
        lam = np.ones(len(pts))
    lam = family.scale * lam
    return float(lam[0]) if single else lam


def det(mats) -> np.ndarray | float:
    """Determinant of one matrix or a stack; closed form up to 3x3, LU beyond."""
    a = np.asarray(mats, dtype=float)
    single = a.ndim == 2
    a = a[None] if single else a
    d = a.shape[-1]
    if a.shape[-2] != d:
        raise ValueError(f"expected square matrices, got shape {a.shape[-2:]}")
    if d == 1:
        out = a[:, 0, 0].copy()
    elif d == 2:
        out = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    elif d == 3:
        out = (a[:, 0, 0] * (a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1])
               - a[:, 0, 1] * (a[:, 1, 0] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 0])
               + a[:, 0, 2] * (a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]))
    else:
        out = np.array([lu_det(m) for m in a])
    return float(out[0]) if single else out


def lu_det(mat) -> float:
    """Determinant from an LU factorization with partial pivoting."""
    lu, piv = scipy.linalg.lu_factor(np.asarray(mat, dtype=float), check_finite=True)
    swaps = np.count_nonzero(piv != np.arange(len(piv)))
    return float((-1.0) ** swaps * np.prod(np.diag(lu)))


def _check_margin(family: MapFamily, pts: np.ndarray, h: float) -> None:
    if family.base == "raw":
        if np.any(np.linalg.norm(pts, axis=1) > 1.0 - h):
            raise ValueError(f"finite differences need points at distance >= h={h} "
                             "inside the unit ball")
    elif family.base == "tartar":
        if np.any(pts < h) or np.any(pts > family.a - h):
            raise ValueError(f"finite differences need points at distance >= h={h} "
                             f"inside [0, {family.a}]^2")


def finite_difference_jacobian(family: MapFamily, x, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference Jacobian with truncation error O(h^2)."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    pts, single = _as_points(family, x)
    _check_margin(family, pts, h)
    d = family.dim
    jac = np.empty((len(pts), d, d))
    for j in range(d):
        step = np.zeros(d)
        step[j] = h
        jac[:, :, j] = (evaluate(family, pts + step) - evaluate(family, pts - step)) / (2 * h)
    return jac[0] if single else jac


def frobenius(mats) -> np.ndarray:
    a = np.asarray(mats, dtype=float)
    return np.sqrt(np.sum(a * a, axis=(-2, -1)))


def conformality_defect(mats) -> np.ndarray | float:
    """Relative distance of ``J^T J`` from ``|det J|^{2/d} I``.

    Zero exactly when all singular values of ``J`` coincide.
    """
    a = np.asarray(mats, dtype=float)
    single = a.ndim == 2
    a = a[None] if single else a
    d = a.shape[-1]
    dets = np.abs(np.atleast_1d(det(a)))
    if np.any(dets == 0) or not np.all(np.isfinite(dets)):
        raise ValueError("conformality defect is undefined for singular matrices")
    level = dets ** (2.0 / d)
    gram = np.swapaxes(a, -1, -2) @ a
    out = frobenius(gram - level[:, None, None] * np.eye(d)) / level
    return float(out[0]) if single else out
