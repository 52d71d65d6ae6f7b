"""Analytic approximate distance fields composed with R-functions.

A field expression is an immutable tree of shape primitives (circle,
segment, sphere, plane) and R-operations (negation, disjunction,
conjunction, equivalence, trimming).  Evaluating the tree at a point gives
an approximate distance to the shape boundary: zero exactly on the
boundary, first-order equal to Euclidean distance near it.  The library
convention is inside-positive for the signed primitives; unsigned
primitives (segments, trimmed carriers, equivalence joins) are
non-negative everywhere.

Gradients are exact: they are propagated forward through the tree
alongside values (dual-number style), never by finite differences.  At the
measure-zero points where an expression is not differentiable (R-operation
corners, creases of unsigned fields) the propagation uses the convention
``d sqrt(u) = 0`` when ``u = 0``, which keeps every output finite.

Evaluation accepts a single point (length-``d`` sequence) or a batch of
points as an ``(n, d)`` array and is vectorised over the batch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .tolerances import (
    DEGENERATE_SEGMENT_LENGTH,
    NORMAL_UNIT_TOL,
)

__all__ = [
    "FieldExpr",
    "Circle",
    "Segment",
    "Sphere",
    "Plane",
    "Negation",
    "Disjunction",
    "Conjunction",
    "Equivalence",
    "Trim",
    "GradientSample",
    "Diagnostic",
    "FieldError",
    "DimensionMismatchError",
    "DegenerateSegmentError",
    "evaluate",
    "gradient",
    "validate",
    "dimension_of",
    "eval_circle",
    "eval_segment",
    "eval_sphere",
    "eval_plane",
    "r_negation",
    "r_disjunction",
    "r_conjunction",
    "r_equivalence_pair",
    "r_equivalence_n",
    "trim",
]


class FieldError(ValueError):
    """Base class for field-expression errors."""


class DimensionMismatchError(FieldError):
    """Point dimension does not match the expression, or leaves mix 2-D and 3-D."""


class DegenerateSegmentError(FieldError):
    """Segment endpoints are closer than the degeneracy threshold."""


@dataclass(frozen=True)
class GradientSample:
    """Field value and spatial gradient at one point (or a batch).

    ``value`` is in meters; ``grad`` is dimensionless near the zero set and
    has length ``d`` (or shape ``(n, d)`` for batch input).
    """

    value: float | np.ndarray
    grad: np.ndarray


@dataclass(frozen=True)
class Diagnostic:
    """One finding from :func:`validate`; ``code`` is a stable identifier."""

    code: str
    message: str
    path: str = ""

    def __str__(self) -> str:
        where = self.path or "root"
        return f"{self.code} at {where}: {self.message}"


def _point_tuple(p, name: str) -> tuple[float, ...]:
    t = tuple(float(c) for c in p)
    if len(t) not in (2, 3):
        raise FieldError(f"{name} must have 2 or 3 coordinates, got {len(t)}")
    if not all(np.isfinite(t)):
        raise FieldError(f"{name} has non-finite coordinates: {t}")
    return t


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or point batch to ``(n, dim)``; flag scalar input."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != dim:
            raise DimensionMismatchError(
                f"point has {pts.shape[0]} coordinates, expression is {dim}-D"
            )
        return pts[None, :], True
    if pts.ndim == 2:
        if pts.shape[1] != dim:
            raise DimensionMismatchError(
                f"points have {pts.shape[1]} coordinates, expression is {dim}-D"
            )
        return pts, False
    raise DimensionMismatchError(f"points must be 1-D or 2-D, got shape {pts.shape}")


def _div_rows(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Row-wise ``num / den`` returning 0 where ``den`` is 0 (sqrt-corner rule)."""
    out = np.zeros_like(num)
    np.divide(num, den[:, None], out=out, where=den[:, None] != 0.0)
    return out


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldExpr:
    """Immutable base node.  Subclasses implement ``_vg`` and ``children``."""

    def children(self) -> tuple["FieldExpr", ...]:
        return ()

    @property
    def dimension(self) -> int:
        """Spatial dimension of the expression (2 or 3)."""
        dims = _leaf_dims(self)
        if len(dims) != 1:
            raise DimensionMismatchError(
                f"expression mixes dimensions {sorted(dims)}"
            )
        return next(iter(dims))

    def eval(self, x) -> float | np.ndarray:
        """Field value at point ``x`` (or at each row of a point batch)."""
        pts, scalar = _as_batch(x, self.dimension)
        v, _ = self._vg(pts, want_grad=False)
        return float(v[0]) if scalar else v

    def gradient(self, x) -> GradientSample:
        """Value and forward-mode spatial gradient at ``x`` (point or batch)."""
        pts, scalar = _as_batch(x, self.dimension)
        v, g = self._vg(pts, want_grad=True)
        if scalar:
            return GradientSample(float(v[0]), g[0].copy())
        return GradientSample(v, g)

    def _vg(self, pts: np.ndarray, want_grad: bool):
        raise NotImplementedError


@dataclass(frozen=True)
class Circle(FieldExpr):
    """2-D circle, inside-positive: ``(R^2 - |x - c|^2) / (2R)``."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _point_tuple(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))
        if len(self.center) != 2:
            raise DimensionMismatchError("circle center must be 2-D")
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise FieldError(f"circle radius must be positive, got {self.radius}")

    @cached_property
    def _c(self) -> np.ndarray:
        return np.array(self.center)

    def _vg(self, pts, want_grad):
        dx = pts - self._c
        r2 = np.einsum("ij,ij->i", dx, dx)
        v = (self.radius * self.radius - r2) / (2.0 * self.radius)
        g = dx / (-self.radius) if want_grad else None
        return v, g


@dataclass(frozen=True)
class Segment(FieldExpr):
    """2-D line segment; unsigned field, zero exactly on the closed segment.

    The carrier is the normalized signed line distance ``f``; the trimming
    field ``t`` is positive between the endpoints, and the combination
    lifts the unwanted half-lines off zero while staying first-order equal
    to unsigned distance near the segment interior.
    """

    p1: tuple[float, float]
    p2: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "p1", _point_tuple(self.p1, "p1"))
        object.__setattr__(self, "p2", _point_tuple(self.p2, "p2"))
        if len(self.p1) != 2 or len(self.p2) != 2:
            raise DimensionMismatchError("segment endpoints must be 2-D")

    @cached_property
    def length(self) -> float:
        return float(np.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]))

    def _require_proper(self):
        if self.length < DEGENERATE_SEGMENT_LENGTH:
            raise DegenerateSegmentError(
                f"segment endpoints coincide within {DEGENERATE_SEGMENT_LENGTH} m"
            )

    def _vg(self, pts, want_grad):
        self._require_proper()
        x1, y1 = self.p1
        x2, y2 = self.p2
        L = self.length
        f = ((pts[:, 0] - x1) * (y2 - y1) - (pts[:, 1] - y1) * (x2 - x1)) / L
        relc = pts - np.array(((x1 + x2) / 2.0, (y1 + y2) / 2.0))
        t = (0.25 * L * L - np.einsum("ij,ij->i", relc, relc)) / L
        aux = np.sqrt(t * t + f ** 4)
        w = 0.5 * (aux - t)
        v = np.sqrt(f * f + w * w)
        if not want_grad:
            return v, None
        gf = np.broadcast_to(np.array(((y2 - y1) / L, -(x2 - x1) / L)), pts.shape)
        gt = relc * (-2.0 / L)
        gaux = _div_rows(t[:, None] * gt + (2.0 * f ** 3)[:, None] * gf, aux)
        gw = 0.5 * (gaux - gt)
        g = _div_rows(f[:, None] * gf + w[:, None] * gw, v)
        return v, g


@dataclass(frozen=True)
class Sphere(FieldExpr):
    """3-D sphere.

    ``normalized=True`` (the default) gives the inside-positive field
    ``(R^2 - |x - c|^2) / (2R)`` with unit gradient on the boundary;
    ``normalized=False`` keeps the raw quadric ``|x - c|^2 - R^2``
    (outside-positive, gradient 2R on the boundary).
    """

    center: tuple[float, float, float]
    radius: float
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "center", _point_tuple(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "normalized", bool(self.normalized))
        if len(self.center) != 3:
            raise DimensionMismatchError("sphere center must be 3-D")
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise FieldError(f"sphere radius must be positive, got {self.radius}")

    @cached_property
    def _c(self) -> np.ndarray:
        return np.array(self.center)

    def _vg(self, pts, want_grad):
        dx = pts - self._c
        r2 = np.einsum("ij,ij->i", dx, dx)
        if self.normalized:
            v = (self.radius * self.radius - r2) / (2.0 * self.radius)
            g = dx / (-self.radius) if want_grad else None
        else:
            v = r2 - self.radius * self.radius
            g = 2.0 * dx if want_grad else None
        return v, g


@dataclass(frozen=True)
class Plane(FieldExpr):
    """Half-space field ``(x - o) . n`` with unit normal; exactly normalized.

    With 2-D ``origin``/``normal`` this is the half-plane used to trim 2-D
    carriers; with 3-D vectors it is the plane primitive.
    """

    origin: tuple[float, ...]
    normal: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", _point_tuple(self.origin, "origin"))
        object.__setattr__(self, "normal", _point_tuple(self.normal, "normal"))
        if len(self.origin) != len(self.normal):
            raise DimensionMismatchError("plane origin and normal dimensions differ")
        norm = float(np.linalg.norm(self.normal))
        if abs(norm - 1.0) > NORMAL_UNIT_TOL:
            raise FieldError(f"plane normal must be unit length, |n| = {norm!r}")

    @cached_property
    def _o(self) -> np.ndarray:
        return np.array(self.origin)

    @cached_property
    def _n(self) -> np.ndarray:
        return np.array(self.normal)

    def _vg(self, pts, want_grad):
        v = (pts - self._o) @ self._n
        g = np.broadcast_to(self._n, pts.shape) if want_grad else None
        return v, g


@dataclass(frozen=True)
class Negation(FieldExpr):
    """R-negation: flips the sign (complement of the region)."""

    child: FieldExpr

    def children(self):
        return (self.child,)

    def _vg(self, pts, want_grad):
        v, g = self.child._vg(pts, want_grad)
        return -v, (-g if want_grad else None)


def _r_binary_values(w1, w2, s: float, sign: float):
    """Shared value rule for R-disjunction (+1) and R-conjunction (-1)."""
    rad = w1 * w1 + w2 * w2 - 2.0 * s * w1 * w2
    if s > 1.0 and np.any(rad < 0.0):
        warnings.warn(
            f"R-function radicand clamped to 0 (s = {s} > 1)", RuntimeWarning,
            stacklevel=3,
        )
    rad = np.maximum(rad, 0.0)
    return (w1 + w2 + sign * np.sqrt(rad)) / (1.0 + s)


def _r_binary_vg(v1, g1, v2, g2, s: float, sign: float, want_grad: bool):
    """Forward-mode rule matching :func:`_r_binary_values` on the value side."""
    v = _r_binary_values(v1, v2, s, sign)
    if not want_grad:
        return v, None
    rad = np.maximum(v1 * v1 + v2 * v2 - 2.0 * s * v1 * v2, 0.0)
    root = np.sqrt(rad)
    drad = (
        2.0 * v1[:, None] * g1
        + 2.0 * v2[:, None] * g2
        - 2.0 * s * (v1[:, None] * g2 + v2[:, None] * g1)
    )
    g = (g1 + g2 + sign * _div_rows(0.5 * drad, root)) / (1.0 + s)
    return v, g


@dataclass(frozen=True)
class Disjunction(FieldExpr):
    """R-disjunction (union): positive iff either child is positive."""

    left: FieldExpr
    right: FieldExpr
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        if not (self.s >= 0.0 and np.isfinite(self.s)):
            raise FieldError(f"s must be >= 0, got {self.s}")

    def children(self):
        return (self.left, self.right)

    def _vg(self, pts, want_grad):
        v1, g1 = self.left._vg(pts, want_grad)
        v2, g2 = self.right._vg(pts, want_grad)
        return _r_binary_vg(v1, g1, v2, g2, self.s, +1.0, want_grad)


@dataclass(frozen=True)
class Conjunction(FieldExpr):
    """R-conjunction (intersection): positive iff both children are positive."""

    left: FieldExpr
    right: FieldExpr
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        if not (self.s >= 0.0 and np.isfinite(self.s)):
            raise FieldError(f"s must be >= 0, got {self.s}")

    def children(self):
        return (self.left, self.right)

    def _vg(self, pts, want_grad):
        v1, g1 = self.left._vg(pts, want_grad)
        v2, g2 = self.right._vg(pts, want_grad)
        return _r_binary_vg(v1, g1, v2, g2, self.s, -1.0, want_grad)


def _equiv_n_values(stacked: np.ndarray, m: int) -> np.ndarray:
    """Order-``m`` equivalence of non-negative values ``stacked`` of shape (k, n).

    Evaluates ``1 / (sum_i phi_i^-m)^(1/m)`` in a scaled form that cannot
    overflow: with ``a = min_i phi_i``, the result is ``a / (sum_i
    (a/phi_i)^m)^(1/m)``.  Zero whenever any input is zero (the limit).
    """
    a = stacked.min(axis=0)
    out = np.zeros_like(a)
    pos = a > 0.0
    if np.any(pos):
        ratios = a[pos] / stacked[:, pos]
        ssum = np.power(ratios, m).sum(axis=0)
        out[pos] = a[pos] * np.power(ssum, -1.0 / m)
    return out


@dataclass(frozen=True)
class Equivalence(FieldExpr):
    """Order-``m`` R-equivalence of two or more pieces (union of zero sets).

    Signed children are passed through absolute value first, so the result
    is non-negative with zero set equal to the union of the children's zero
    sets, and it preserves normalization up to order ``m`` at regular
    boundary points.  Associative: any pairwise nesting gives the same
    field.
    """

    children_: tuple[FieldExpr, ...]
    m: int = 2

    def __post_init__(self):
        object.__setattr__(self, "children_", tuple(self.children_))
        object.__setattr__(self, "m", int(self.m))
        if len(self.children_) < 2:
            raise FieldError("equivalence needs at least 2 children")
        if self.m < 1:
            raise FieldError(f"equivalence order m must be >= 1, got {self.m}")

    def children(self):
        return self.children_

    def _vg(self, pts, want_grad):
        m = self.m
        pairs = [c._vg(pts, want_grad) for c in self.children_]
        U = np.stack([np.abs(v) for v, _ in pairs])  # (k, n)
        v = _equiv_n_values(U, m)
        if not want_grad:
            return v, None
        # d|phi| with sign(0) = 0, the corner convention.
        G = np.stack([np.sign(vi)[:, None] * gi for vi, gi in pairs])  # (k, n, d)
        n = pts.shape[0]
        g = np.zeros_like(pts)
        a = U.min(axis=0)
        pos = a > 0.0
        if np.any(pos):
            Up = U[:, pos]
            Gp = G[:, pos, :]
            ap = a[pos]
            piv = np.argmin(Up, axis=0)
            cols = np.arange(Up.shape[1])
            ga = Gp[piv, cols]  # (np, d)
            ratios = ap / Up  # (k, np), all in (0, 1]
            ssum = np.power(ratios, m).sum(axis=0)  # >= 1
            # d ratio_i = (ga * u_i - a * g_i) / u_i^2
            dr = (ga[None, :, :] * Up[:, :, None] - ap[None, :, None] * Gp) / (
                Up * Up
            )[:, :, None]
            ds = m * (np.power(ratios, m - 1)[:, :, None] * dr).sum(axis=0)
            scale = np.power(ssum, -1.0 / m)
            g[pos] = scale[:, None] * (
                ga - (ap / (m * ssum))[:, None] * ds
            )
        return v, g


def _trim_values(f, t):
    """Trimming rule: carrier ``f`` stays zero only where trimmer ``t >= 0``."""
    aux = np.sqrt(t * t + f ** 4)
    w = 0.5 * (aux - t)
    return np.sqrt(f * f + w * w)


@dataclass(frozen=True)
class Trim(FieldExpr):
    """Trimmed carrier: unsigned field, zero where base = 0 and trimmer >= 0.

    The portion of the base zero set with negative trimmer is lifted off
    zero by |trimmer|, turning full circles/lines into bounded arcs and
    segments.
    """

    base: FieldExpr
    trimmer: FieldExpr

    def children(self):
        return (self.base, self.trimmer)

    def _vg(self, pts, want_grad):
        f, gf = self.base._vg(pts, want_grad)
        t, gt = self.trimmer._vg(pts, want_grad)
        v = _trim_values(f, t)
        if not want_grad:
            return v, None
        aux = np.sqrt(t * t + f ** 4)
        w = 0.5 * (aux - t)
        gaux = _div_rows(t[:, None] * gt + (2.0 * f ** 3)[:, None] * gf, aux)
        gw = 0.5 * (gaux - gt)
        g = _div_rows(f[:, None] * gf + w[:, None] * gw, v)
        return v, g


# ---------------------------------------------------------------------------
# Tree-level operations
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _leaf_dims(expr: FieldExpr) -> frozenset[int]:
    kids = expr.children()
    if kids:
        dims: frozenset[int] = frozenset()
        for c in kids:
            dims |= _leaf_dims(c)
        return dims
    if isinstance(expr, (Circle, Segment)):
        return frozenset((2,))
    if isinstance(expr, Sphere):
        return frozenset((3,))
    if isinstance(expr, Plane):
        return frozenset((len(expr.origin),))
    raise FieldError(f"unknown leaf node {type(expr).__name__}")


def dimension_of(expr: FieldExpr) -> int:
    """Spatial dimension of ``expr``; raises on mixed 2-D/3-D leaves."""
    return expr.dimension


def evaluate(expr: FieldExpr, x) -> float | np.ndarray:
    """Field value of ``expr`` at point or point-batch ``x``."""
    return expr.eval(x)


def gradient(expr: FieldExpr, x) -> GradientSample:
    """Value and exact spatial gradient of ``expr`` at ``x``.

    The value agrees bit-for-bit with :func:`evaluate`; the gradient is the
    forward-mode derivative with the sqrt-corner convention (zero at the
    measure-zero non-differentiable points).
    """
    return expr.gradient(x)


def _walk(expr: FieldExpr, path: str) -> Iterator[tuple[FieldExpr, str]]:
    yield expr, path
    names = {
        Negation: ("child",),
        Disjunction: ("left", "right"),
        Conjunction: ("left", "right"),
        Trim: ("base", "trimmer"),
    }.get(type(expr))
    kids = expr.children()
    for idx, kid in enumerate(kids):
        label = names[idx] if names else f"children[{idx}]"
        sub = f"{path}.{label}" if path else label
        yield from _walk(kid, sub)


def validate(expr: FieldExpr) -> list[Diagnostic]:
    """Well-formedness diagnostics for ``expr``; an empty list means clean.

    Reports mixed 2-D/3-D leaves, degenerate segments, and R-operation
    parameters outside the well-behaved range (s > 1, whose radicand may
    need clamping).  Hard constructor invariants (positive radii, unit
    normals, m >= 1) cannot be violated on constructed trees and are not
    re-reported here.
    """
    diags: list[Diagnostic] = []
    dims: set[int] = set()
    for node, path in _walk(expr, ""):
        if not node.children():
            dims |= set(_leaf_dims(node))
        if isinstance(node, Segment) and node.length < DEGENERATE_SEGMENT_LENGTH:
            diags.append(
                Diagnostic(
                    "degenerate-segment",
                    f"endpoints {node.p1} and {node.p2} coincide",
                    path,
                )
            )
        if isinstance(node, (Disjunction, Conjunction)) and node.s > 1.0:
            diags.append(
                Diagnostic(
                    "s-above-one",
                    f"s = {node.s}: radicand may be clamped to 0",
                    path,
                )
            )
    if len(dims) > 1:
        diags.insert(
            0,
            Diagnostic(
                "dimension-mismatch",
                f"expression mixes {sorted(dims)}-dimensional leaves",
                "",
            ),
        )
    return diags


# ---------------------------------------------------------------------------
# Point-wise operations (the algebra behind the nodes)
# ---------------------------------------------------------------------------

def _scalarize(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def eval_circle(x, center, radius: float) -> float | np.ndarray:
    """Circle field value at ``x``: ``(R^2 - |x - c|^2) / (2R)``."""
    return Circle(tuple(center), radius).eval(x)


def eval_segment(x, p1, p2) -> float | np.ndarray:
    """Segment field value at ``x`` (unsigned; zero on the closed segment)."""
    return Segment(tuple(p1), tuple(p2)).eval(x)


def eval_sphere(x, center, radius: float, normalized: bool = True) -> float | np.ndarray:
    """Sphere field value at ``x``; see :class:`Sphere` for the two forms."""
    return Sphere(tuple(center), radius, normalized).eval(x)


def eval_plane(x, origin, normal) -> float | np.ndarray:
    """Plane field value at ``x``: ``(x - o) . n`` with unit ``n``."""
    return Plane(tuple(origin), tuple(normal)).eval(x)


def r_negation(w):
    """R-negation of a field value."""
    out = -np.asarray(w, dtype=float)
    return _scalarize(out, np.isscalar(w) or np.ndim(w) == 0)


def r_disjunction(w1, w2, s: float = 0.0):
    """R-disjunction of two field values; positive iff either is positive."""
    if not s >= 0.0:
        raise FieldError(f"s must be >= 0, got {s}")
    a = np.asarray(w1, dtype=float)
    b = np.asarray(w2, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    out = _r_binary_values(a, b, float(s), +1.0)
    return _scalarize(out, scalar)


def r_conjunction(w1, w2, s: float = 0.0):
    """R-conjunction of two field values; positive iff both are positive."""
    if not s >= 0.0:
        raise FieldError(f"s must be >= 0, got {s}")
    a = np.asarray(w1, dtype=float)
    b = np.asarray(w2, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    out = _r_binary_values(a, b, float(s), -1.0)
    return _scalarize(out, scalar)


def r_equivalence_pair(phi1, phi2, m: int = 2):
    """Order-``m`` equivalence of two non-negative values (zero if either is zero)."""
    if int(m) < 1:
        raise FieldError(f"m must be >= 1, got {m}")
    a = np.asarray(phi1, dtype=float)
    b = np.asarray(phi2, dtype=float)
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise FieldError("equivalence inputs must be non-negative")
    scalar = a.ndim == 0 and b.ndim == 0
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape)
    both = (a > 0.0) & (b > 0.0)
    m = int(m)
    out[both] = a[both] * b[both] / np.power(
        np.power(a[both], m) + np.power(b[both], m), 1.0 / m
    )
    return _scalarize(out, scalar)


def r_equivalence_n(values, m: int = 2):
    """Order-``m`` equivalence of two or more non-negative values.

    ``values`` may be a sequence of scalars or of broadcastable arrays.
    Returns ``1 / (sum_i phi_i^-m)^(1/m)``, or 0 when any input is zero.
    """
    if int(m) < 1:
        raise FieldError(f"m must be >= 1, got {m}")
    arrays = [np.asarray(v, dtype=float) for v in values]
    if len(arrays) < 2:
        raise FieldError("equivalence needs at least 2 values")
    if any(np.any(a < 0.0) for a in arrays):
        raise FieldError("equivalence inputs must be non-negative")
    scalar = all(a.ndim == 0 for a in arrays)
    stacked = np.stack(np.broadcast_arrays(*arrays)).reshape(len(arrays), -1)
    out = _equiv_n_values(stacked, int(m))
    if scalar:
        return float(out[0])
    return out.reshape(np.broadcast_shapes(*(a.shape for a in arrays)))


def trim(f, t):
    """Trimming of a carrier value ``f`` by a trimmer value ``t``.

    Zero exactly where ``f = 0`` and ``t >= 0``; portions with ``t < 0``
    are lifted to |t|.  Non-negative everywhere.
    """
    a = np.asarray(f, dtype=float)
    b = np.asarray(t, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    out = _trim_values(a, b)
    return _scalarize(out, scalar)
