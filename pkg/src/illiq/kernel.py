"""Exact calculus for closed univariate convex functions.

Two representations are supported:

* piecewise-linear (``pwl``): strictly increasing breakpoints, nondecreasing
  slopes (one more than breakpoints) whose end entries may be infinite to
  encode a bounded domain, and the function values at the breakpoints;
* smooth named families of the form ``x -> scale * g(x / inner)`` with
  ``g`` one of ``exp`` (e^u - 1), ``entropy`` (u log u - u + 1 on u >= 0),
  ``power`` (max(u, 0)^p / p) and ``power_dual`` (u^p / p on u >= 0).

The set of families is closed under conjugation and positive scaling, so
every operation returns another :class:`PiecewiseConvex`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._kernels import pwl_eval

INF = math.inf
TOL = 1e-10

_CONJ = {"exp": "entropy", "entropy": "exp", "power": "power_dual", "power_dual": "power"}


@dataclass(frozen=True)
class Interval:
    """Closed interval on the extended real line."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __iter__(self):
        yield self.lo
        yield self.hi

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= v <= self.hi + tol

    def distance(self, v: float) -> float:
        if v < self.lo:
            return self.lo - v
        if v > self.hi:
            return v - self.hi
        return 0.0

    def scaled(self, a: float) -> "Interval":
        if a < 0:
            return Interval(a * self.hi, a * self.lo)
        if a == 0:
            return Interval(0.0, 0.0)
        return Interval(a * self.lo, a * self.hi)


def _fmt(v: float):
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return float(v)


def _num(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity", "+infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return -INF
        raise ValueError(f"not a number: {v!r}")
    return float(v)


class PiecewiseConvex:
    """A closed proper convex function of one real variable.

    Instances are immutable; use the classmethod constructors.
    """

    __slots__ = ("kind", "family", "p", "scale", "inner", "bps", "slopes", "vals", "offset")

    def __init__(self):
        raise TypeError("use PiecewiseConvex.pwl(...) or a family constructor")

    # ---- construction -------------------------------------------------

    @classmethod
    def _new(cls):
        return object.__new__(cls)

    @classmethod
    def pwl(cls, breakpoints: Sequence[float], slopes: Sequence[float],
            anchor: tuple[float, float] = (0.0, 0.0)) -> "PiecewiseConvex":
        """Piecewise-linear function through ``anchor = (x0, f(x0))``."""
        b = np.asarray([_num(v) for v in breakpoints], dtype=float)
        s = np.asarray([_num(v) for v in slopes], dtype=float)
        if s.shape[0] != b.shape[0] + 1:
            raise ValueError("need exactly one more slope than breakpoints")
        if not np.all(np.isfinite(b)):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.isnan(s)):
            raise ValueError("slopes must not be NaN")
        if np.any(np.diff(s) < 0):
            raise ValueError("slopes must be nondecreasing (convexity)")
        if s[0] == INF or s[-1] == -INF:
            raise ValueError("infinite end slopes must point outward")
        if s.shape[0] > 2 and not np.all(np.isfinite(s[1:-1])):
            raise ValueError("interior slopes must be finite")
        if b.shape[0] == 0 and not np.isfinite(s[0]):
            raise ValueError("a function without breakpoints needs a finite slope")
        x0, f0 = _num(anchor[0]), _num(anchor[1])
        if math.isnan(f0) or f0 == -INF:
            raise ValueError("anchor value must be finite")

        # merge breakpoints between equal slopes
        keep = np.ones(b.shape[0], dtype=bool)
        for i in range(b.shape[0]):
            if s[i] == s[i + 1]:
                keep[i] = False
        sk = np.concatenate([s[:1], s[1:][keep]]) if b.shape[0] else s
        bk = b[keep]

        f = cls._new()
        f.kind = "pwl"
        f.family = "pwl"
        f.p = f.scale = f.inner = None
        f.bps = bk
        f.slopes = sk
        if f0 == INF:
            raise ValueError("improper function")
        lo, hi = _pwl_domain(bk, sk)
        if not (lo - 1e-12 <= x0 <= hi + 1e-12):
            raise ValueError("anchor outside the closed domain")
        if bk.shape[0] == 0:
            f.vals = np.empty(0)
            f.offset = float(f0 - sk[0] * x0)
        else:
            # values at breakpoints from the anchor by integrating slopes
            k = bk.shape[0]
            j = int(np.searchsorted(bk, x0, side="right"))  # bps <= x0
            vals = np.empty(k)
            if j == 0:
                vals[0] = f0 + (0.0 if x0 == bk[0] else sk[0] * (bk[0] - x0))
                start = 0
            else:
                sl = sk[j] if x0 != bk[j - 1] else 0.0
                vals[j - 1] = f0 + sl * (bk[j - 1] - x0) if sl else f0
                start = j - 1
            for i in range(start + 1, k):
                vals[i] = vals[i - 1] + sk[i] * (bk[i] - bk[i - 1])
            for i in range(start - 1, -1, -1):
                vals[i] = vals[i + 1] - sk[i + 1] * (bk[i + 1] - bk[i])
            f.vals = vals
            f.offset = 0.0
        for arr in (f.bps, f.slopes, f.vals):
            arr.setflags(write=False)
        return f

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "PiecewiseConvex":
        return cls.pwl([], [slope], (0.0, intercept))

    @classmethod
    def absolute(cls) -> "PiecewiseConvex":
        return cls.pwl([0.0], [-1.0, 1.0])

    @classmethod
    def indicator_nonpositive(cls, bound: float = 0.0) -> "PiecewiseConvex":
        """Indicator of the half-line ``(-inf, bound]``."""
        return cls.pwl([bound], [0.0, INF], (bound, 0.0))

    @classmethod
    def indicator_interval(cls, lo: float, hi: float) -> "PiecewiseConvex":
        if lo > hi:
            raise ValueError("empty interval")
        if lo == -INF and hi == INF:
            return cls.linear(0.0)
        if lo == -INF:
            return cls.pwl([hi], [0.0, INF], (hi, 0.0))
        if hi == INF:
            return cls.pwl([lo], [-INF, 0.0], (lo, 0.0))
        if lo == hi:
            return cls.pwl([lo], [-INF, INF], (lo, 0.0))
        return cls.pwl([lo, hi], [-INF, 0.0, INF], (lo, 0.0))

    @classmethod
    def smooth(cls, family: str, p: float | None = None, scale: float = 1.0,
               inner: float = 1.0) -> "PiecewiseConvex":
        if family not in _CONJ:
            raise ValueError(f"unknown family {family!r}")
        if family in ("power", "power_dual"):
            if p is None or not p > 1:
                raise ValueError("power families need p > 1")
            p = float(p)
        else:
            p = None
        if not (scale > 0 and inner > 0 and math.isfinite(scale) and math.isfinite(inner)):
            raise ValueError("scale and inner must be positive and finite")
        f = cls._new()
        f.kind = "smooth"
        f.family = family
        f.p = p
        f.scale = float(scale)
        f.inner = float(inner)
        f.bps = f.slopes = f.vals = None
        f.offset = 0.0
        return f

    @classmethod
    def exponential(cls, alpha: float = 1.0) -> "PiecewiseConvex":
        """``(exp(alpha x) - 1) / alpha``."""
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return cls.smooth("exp", scale=1.0 / alpha, inner=1.0 / alpha)

    @classmethod
    def power(cls, p: float) -> "PiecewiseConvex":
        """``max(x, 0)^p / p``."""
        return cls.smooth("power", p=p)

    # ---- basic queries ----------------------------------------------

    @property
    def is_pwl(self) -> bool:
        return self.kind == "pwl"

    @property
    def domain(self) -> Interval:
        if self.kind == "pwl":
            return Interval(*_pwl_domain(self.bps, self.slopes))
        if self.family in ("exp", "power"):
            return Interval(-INF, INF)
        return Interval(0.0, INF)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return float(self._eval_array(np.asarray([x], dtype=float))[0])
        arr = np.asarray(x, dtype=float)
        return self._eval_array(arr.ravel()).reshape(arr.shape)

    def _eval_array(self, xs: np.ndarray) -> np.ndarray:
        if self.kind == "pwl":
            return pwl_eval(self.bps, self.slopes, self.vals, self.offset,
                            np.ascontiguousarray(xs, dtype=float))
        u = xs / self.inner
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if self.family == "exp":
                g = np.expm1(u)
            elif self.family == "power":
                g = np.maximum(u, 0.0) ** self.p / self.p
            elif self.family == "entropy":
                g = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)) - u + 1.0, 1.0)
                g = np.where(u < 0, INF, g)
            else:
                g = np.where(u >= 0, np.maximum(u, 0.0) ** self.p / self.p, INF)
        return self.scale * g

    def derivative(self, x: float) -> float:
        """Right derivative at ``x`` (``+inf`` at a right domain end)."""
        return self.subdifferential(x).hi

    def subdifferential(self, x: float) -> Interval:
        """``[f'_-(x), f'_+(x)]``; the outer side is infinite at a domain end."""
        x = float(x)
        dom = self.domain
        if not dom.contains(x):
            raise ValueError("outside domain")
        if self.kind == "pwl":
            k = self.bps.shape[0]
            i = int(np.searchsorted(self.bps, x, side="left"))
            if i < k and self.bps[i] == x:
                return Interval(float(self.slopes[i]), float(self.slopes[i + 1]))
            return Interval(float(self.slopes[i]), float(self.slopes[i]))
        u = x / self.inner
        c = self.scale / self.inner
        fam = self.family
        if fam == "exp":
            d = c * math.exp(u) if u < 700 else INF
            return Interval(d, d)
        if fam == "power":
            d = c * max(u, 0.0) ** (self.p - 1.0)
            return Interval(d, d)
        if fam == "entropy":
            if u == 0.0:
                return Interval(-INF, -INF)
            d = c * math.log(u)
            return Interval(d, d)
        if u == 0.0:
            return Interval(-INF, 0.0)
        d = c * u ** (self.p - 1.0)
        return Interval(d, d)

    # ---- calculus ------------------------------------------------------

    def conjugate(self) -> "PiecewiseConvex":
        """Legendre–Fenchel conjugate ``y -> sup_x {xy - f(x)}``."""
        if self.kind == "smooth":
            q = None if self.p is None else self.p / (self.p - 1.0)
            return PiecewiseConvex.smooth(_CONJ[self.family], p=q, scale=self.scale,
                                          inner=self.scale / self.inner)
        b, s = self.bps, self.slopes
        k = b.shape[0]
        if k == 0:
            return PiecewiseConvex.pwl([s[0]], [-INF, INF], (s[0], -self.offset))
        new_b = [float(v) for v in s if math.isfinite(v)]
        new_s = ([-INF] if math.isfinite(s[0]) else []) + [float(v) for v in b] + (
            [INF] if math.isfinite(s[-1]) else [])
        if not new_b:  # dom f = {b0}: f*(y) = b0 y - f(b0)
            return PiecewiseConvex.pwl([], [b[0]], (0.0, -float(self.vals[0])))
        i = next(j for j in range(k + 1) if math.isfinite(s[j]))
        pt = max(i - 1, 0)
        y0 = float(s[i])
        return PiecewiseConvex.pwl(new_b, new_s, (y0, float(b[pt] * y0 - self.vals[pt])))

    def recession(self) -> "PiecewiseConvex":
        """Recession function; positively homogeneous."""
        if self.kind == "smooth":
            if self.family in ("exp", "power"):
                return PiecewiseConvex.indicator_nonpositive()
            return PiecewiseConvex.indicator_interval(0.0, 0.0)
        return PiecewiseConvex.pwl([0.0], [self.slopes[0], self.slopes[-1]], (0.0, 0.0))

    def scale_epi(self, alpha: float) -> "PiecewiseConvex":
        """Epi-multiplication: ``alpha f`` for alpha > 0, the indicator of
        ``cl dom f`` for alpha = 0."""
        alpha = float(alpha)
        if alpha < 0 or math.isnan(alpha):
            raise ValueError("negative scale")
        if alpha == 0.0:
            dom = self.domain
            return PiecewiseConvex.indicator_interval(dom.lo, dom.hi)
        if self.kind == "smooth":
            return PiecewiseConvex.smooth(self.family, self.p, self.scale * alpha, self.inner)
        if self.bps.shape[0] == 0:
            return PiecewiseConvex.pwl([], [alpha * self.slopes[0]], (0.0, alpha * self.offset))
        return PiecewiseConvex.pwl(self.bps, self.slopes * alpha,
                                   (self.bps[0], alpha * self.vals[0]))

    def shifted(self, theta: float) -> "PiecewiseConvex":
        """``x -> f(x + theta)``."""
        theta = float(theta)
        if theta == 0.0:
            return self
        if self.kind == "smooth":
            raise ValueError("argument shifts are only supported for piecewise-linear functions")
        if self.bps.shape[0] == 0:
            return PiecewiseConvex.pwl([], self.slopes, (0.0, self(theta)))
        return PiecewiseConvex.pwl(self.bps - theta, self.slopes, (self.bps[0] - theta, self.vals[0]))

    def affine_pieces(self) -> list[tuple[float, float]]:
        """``(slope, intercept)`` of every finite-slope piece (pwl only)."""
        if self.kind != "pwl":
            raise ValueError("affine pieces exist only for piecewise-linear functions")
        b, s = self.bps, self.slopes
        if b.shape[0] == 0:
            return [(float(s[0]), self.offset)]
        out = []
        for i in range(s.shape[0]):
            if not math.isfinite(s[i]):
                continue
            j = max(i - 1, 0)
            out.append((float(s[i]), float(self.vals[j] - s[i] * b[j])))
        if not out:
            # single-point domain: a flat piece carries the value
            out.append((0.0, float(self.vals[0])))
        return out

    def tangent(self, x: float) -> tuple[float, float]:
        """A supporting line ``(slope, intercept)`` at ``x`` in the domain."""
        sub = self.subdifferential(x)
        g = sub.hi if math.isfinite(sub.hi) else sub.lo
        if not math.isfinite(g):
            raise ValueError("no finite subgradient")
        return g, self(x) - g * x

    def infimum(self) -> float:
        """``inf f`` (``-f*(0)``)."""
        v = self.conjugate()(0.0)
        return -v

    # ---- equality, hashing, serialization ----------------------------

    def __eq__(self, other):
        if not isinstance(other, PiecewiseConvex):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        d = self.to_dict()
        inner = ", ".join(f"{k}={v}" for k, v in d.items() if k != "kind")
        return f"PiecewiseConvex.{d['kind']}({inner})"

    def to_dict(self) -> dict:
        if self.kind == "smooth":
            d = {"kind": self.family, "scale": self.scale, "inner": self.inner}
            if self.p is not None:
                d["p"] = self.p
            return d
        if self.bps.shape[0] == 0:
            anchor = [0.0, self.offset]
        else:
            anchor = [float(self.bps[0]), float(self.vals[0])]
        return {
            "kind": "pwl",
            "breakpoints": [float(v) for v in self.bps],
            "slopes": [_fmt(v) for v in self.slopes],
            "anchor": anchor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseConvex":
        kind = d.get("kind")
        if kind == "pwl":
            return cls.pwl(d["breakpoints"], d["slopes"], tuple(d.get("anchor", (0.0, 0.0))))
        if kind == "indicator_nonpositive":
            return cls.indicator_nonpositive(_num(d.get("bound", 0.0)))
        if kind == "exp" and "alpha" in d:
            return cls.exponential(_num(d["alpha"]))
        if kind == "power" and "scale" not in d:
            return cls.power(_num(d["p"]))
        if kind in _CONJ:
            return cls.smooth(kind, d.get("p"), _num(d.get("scale", 1.0)), _num(d.get("inner", 1.0)))
        raise ValueError(f"unknown function kind {kind!r}")


def _pwl_domain(b, s) -> tuple[float, float]:
    lo = float(b[0]) if s[0] == -INF else -INF
    hi = float(b[-1]) if s[-1] == INF else INF
    return lo, hi


# module-level functional forms --------------------------------------------

def eval(f: PiecewiseConvex, x: float) -> float:  # noqa: A001 - mirrors the calculus vocabulary
    return f(x)


def conjugate(f: PiecewiseConvex) -> PiecewiseConvex:
    return f.conjugate()


def recession(f: PiecewiseConvex) -> PiecewiseConvex:
    return f.recession()


def subdifferential(f: PiecewiseConvex, x: float) -> Interval:
    return f.subdifferential(x)


def scale_epi(f: PiecewiseConvex, alpha: float) -> PiecewiseConvex:
    return f.scale_epi(alpha)


def scaled_conjugate(f: PiecewiseConvex, q: float) -> PiecewiseConvex:
    """Conjugate of the epi-multiple ``(q f)``: ``q f*(./q)`` or the support
    function of ``dom f`` when ``q = 0``."""
    return f.scale_epi(q).conjugate()


def sample_points(f: PiecewiseConvex, n: int, rng: np.random.Generator,
                  spread: float = 5.0) -> np.ndarray:
    """Random points in ``dom f`` including every breakpoint."""
    dom = f.domain
    lo = dom.lo if math.isfinite(dom.lo) else None
    hi = dom.hi if math.isfinite(dom.hi) else None
    if f.is_pwl and f.bps.shape[0]:
        centre_lo, centre_hi = float(f.bps[0]), float(f.bps[-1])
    else:
        centre_lo = centre_hi = 0.0 if lo is None else lo
    a = lo if lo is not None else centre_lo - spread
    b = hi if hi is not None else centre_hi + spread
    if a == b:
        pts = np.full(n, a)
    else:
        pts = rng.uniform(a, b, size=n)
    extra: Iterable[float] = f.bps if f.is_pwl else []
    return np.concatenate([pts, np.asarray(list(extra), dtype=float)])
