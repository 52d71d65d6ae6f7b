"""Space-time transfinite interpolation between two distance fields.

A :class:`MorphSchedule` pairs an initial and a final field expression with
a ramp rate ``p``.  The time-varying field is a pointwise blend

    phi(x, t) = w1(x, t) * phi_i(x) + w2(x, t) * phi_f(x)

whose weights are built from R-conjunctions of the member fields with a
monotone ramp ``f(t) = (e^{pt} - 1) / (e^{pt} + 1)``, so the zero set of
``phi(., t)`` deforms continuously from the initial boundary to the final
one.  The weights always sum to one: ``w2`` is computed as ``1 - w1`` so
the partition of unity holds exactly in floating point.

Since ``f`` never quite reaches 1, a schedule is *complete* once
``f(t) >= 1 - MORPH_COMPLETE_EPS``; from then on the final field is
evaluated directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fields import (
    DimensionMismatchError,
    FieldExpr,
    GradientSample,
    _as_batch,
    _r_binary_vg,
)
from .tolerances import BLEND_DEGENERACY_EPS, MORPH_COMPLETE_EPS

__all__ = [
    "MorphSchedule",
    "DegenerateBlendError",
    "ramp",
    "blend_weights",
    "eval_morph",
    "gradient_morph",
]


class DegenerateBlendError(RuntimeError):
    """Blend denominator g1 + g2 vanished at one or more points.

    Carries ``points`` (the offending points), ``t``, and ``mask`` (which
    rows of the evaluated batch were degenerate) so a caller can fall back
    pointwise.
    """

    def __init__(self, points: np.ndarray, t: float, mask: np.ndarray):
        self.points = np.atleast_2d(points)
        self.t = float(t)
        self.mask = mask
        first = self.points[0]
        super().__init__(
            f"degenerate morph blend (g1 + g2 = 0) at x={tuple(first)}, t={t}"
            + (f" and {self.points.shape[0] - 1} more points" if self.points.shape[0] > 1 else "")
        )


def ramp(t, p: float):
    """Monotone ramp ``(e^{pt} - 1) / (e^{pt} + 1)``: 0 at t = 0, -> 1 as t -> inf.

    Evaluated as ``tanh(p t / 2)``, which is the same function and does not
    overflow for large ``t``.  Negative ``t`` clamps to 0 with a warning.
    """
    if not p > 0.0:
        raise ValueError(f"ramp rate p must be positive, got {p}")
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0):
        warnings.warn("ramp time clamped to 0 for negative t", RuntimeWarning, stacklevel=2)
        tt = np.maximum(tt, 0.0)
    out = np.tanh(0.5 * p * tt)
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class MorphSchedule:
    """Initial/final field pair plus ramp parameters defining phi(x, t)."""

    initial: FieldExpr
    final: FieldExpr
    p: float
    s: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t_start", float(self.t_start))
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise ValueError(f"ramp rate p must be positive, got {self.p}")
        if not self.s >= 0.0:
            raise ValueError(f"s must be >= 0, got {self.s}")
        if self.initial.dimension != self.final.dimension:
            raise DimensionMismatchError(
                "initial and final fields have different dimensions"
            )

    @property
    def dimension(self) -> int:
        return self.initial.dimension

    def ramp_value(self, t: float) -> float:
        """Ramp f at time ``t`` (measured from ``t_start``)."""
        return ramp(t - self.t_start, self.p)

    def is_complete(self, t: float) -> bool:
        """True once f(t) is within MORPH_COMPLETE_EPS of 1."""
        return self.ramp_value(t) >= 1.0 - MORPH_COMPLETE_EPS

    # -- batch evaluation -------------------------------------------------

    def _blend_vg(self, pts: np.ndarray, t: float, want_grad: bool):
        fval = self.ramp_value(t)
        vi, gi = self.initial._vg(pts, want_grad)
        vf, gf = self.final._vg(pts, want_grad)
        zeros = np.zeros_like(gi) if want_grad else None
        c1 = np.full_like(vi, -fval)
        c2 = np.full_like(vi, fval - 1.0)
        g1, dg1 = _r_binary_vg(vi, gi, c1, zeros, self.s, -1.0, want_grad)
        g2, dg2 = _r_binary_vg(vf, gf, c2, zeros, self.s, -1.0, want_grad)
        total = g1 + g2
        bad = np.abs(total) < BLEND_DEGENERACY_EPS
        if np.any(bad):
            raise DegenerateBlendError(pts[bad], t, bad)
        w1 = g2 / total
        # phi = vf + w1 * (vi - vf): algebraically w1*vi + (1-w1)*vf, but this
        # form is exact at both endpoints (w1 = 1 gives vi, w1 = 0 gives vf).
        v = vf + w1 * (vi - vf)
        if not want_grad:
            return v, None, (w1, g1, g2)
        dtotal = dg1 + dg2
        dw1 = (dg2 * total[:, None] - g2[:, None] * dtotal) / (total * total)[:, None]
        g = gf + dw1 * (vi - vf)[:, None] + w1[:, None] * (gi - gf)
        return v, g, (w1, g1, g2)

    def values(self, pts, t: float) -> np.ndarray:
        """phi(x, t) at each row of ``pts``."""
        pts, _ = _as_batch(pts, self.dimension)
        if self.is_complete(t):
            v, _ = self.final._vg(pts, want_grad=False)
            return v
        v, _, _ = self._blend_vg(pts, t, want_grad=False)
        return v

    def values_grads(self, pts, t: float) -> tuple[np.ndarray, np.ndarray]:
        """phi(x, t) and its spatial gradient at each row of ``pts``."""
        pts, _ = _as_batch(pts, self.dimension)
        if self.is_complete(t):
            return self.final._vg(pts, want_grad=True)
        v, g, _ = self._blend_vg(pts, t, want_grad=True)
        return v, g


def blend_weights(x, t: float, sched: MorphSchedule):
    """Blend weights (w1, w2, g1, g2) at a single point and time.

    ``w2`` is returned as ``1 - w1`` so that w1 + w2 = 1 exactly.
    """
    pts, _ = _as_batch(x, sched.dimension)
    _, _, (w1, g1, g2) = sched._blend_vg(pts, t, want_grad=False)
    return float(w1[0]), float(1.0 - w1[0]), float(g1[0]), float(g2[0])


def eval_morph(sched: MorphSchedule, x, t: float) -> float | np.ndarray:
    """phi(x, t) for a point or point batch."""
    pts, scalar = _as_batch(x, sched.dimension)
    v = sched.values(pts, t)
    return float(v[0]) if scalar else v


def gradient_morph(sched: MorphSchedule, x, t: float) -> GradientSample:
    """phi(x, t) and its spatial gradient (forward mode, frozen ``t``)."""
    pts, scalar = _as_batch(x, sched.dimension)
    v, g = sched.values_grads(pts, t)
    if scalar:
        return GradientSample(float(v[0]), g[0].copy())
    return GradientSample(v, g)
