"""Independent marking, thinning, random translation and superposition.

The operations act on concrete :class:`~ppx.pointproc.PointPattern` values
(``mark``, ``thin``, ``translate``, ``superpose``) and are also available
lifted to processes (``Marked``, ``Thinned``, ``Translated``, ``Superposed``)
so that Monte Carlo estimators can sample the transformed process directly.
The ``*_transform`` helpers give the test function that the base process
sees, for analytic cross-checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator
from scipy.special import ndtr

from . import pointproc as pp
from .errors import DuplicatePointError, SpecError
from .laws import Beta, LocationFn, ScalarLaw
from .rng import generator


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# marking


class MarkSampler(_Frozen):
    """I.i.d. marks; the optional ``location`` factor scales each mark by ``f(x)``."""

    law: ScalarLaw
    dim: int = Field(1, ge=1)
    location: LocationFn | None = None

    def draw(self, pts, rng) -> np.ndarray:
        n = len(pts)
        m = self.law.sample(rng, (n, self.dim))
        if self.location is not None and n:
            m = m * self.location(pts)[:, None]
        return m


@dataclass(frozen=True)
class MarkedPointPattern:
    base: pp.PointPattern
    marks: np.ndarray

    def __post_init__(self):
        marks = np.array(self.marks, dtype=float)
        if marks.ndim == 1:
            marks = marks[:, None]
        if marks.ndim != 2 or len(marks) != len(self.base):
            raise SpecError("need one mark vector per point")
        marks.flags.writeable = False
        object.__setattr__(self, "marks", marks)

    def __len__(self):
        return len(self.base)


def mark(pattern: pp.PointPattern, sampler: MarkSampler, seed: int) -> MarkedPointPattern:
    marks = sampler.draw(pattern.points, generator(seed))
    return MarkedPointPattern(pattern, marks)


# ---------------------------------------------------------------------------
# thinning


def _check_prob(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise SpecError("retention probabilities must lie in [0, 1]")
    return p


class PConst(_Frozen):
    kind: Literal["p_const"] = "p_const"
    p: float = Field(ge=0, le=1)

    def retention(self, pts, window, rng):
        return np.full(len(pts), self.p)

    def prob(self, x):
        return np.full(len(x), self.p)


class PLocation(_Frozen):
    kind: Literal["p_location"] = "p_location"
    fn: LocationFn

    def retention(self, pts, window, rng):
        return self.prob(pts)

    def prob(self, x):
        return _check_prob(self.fn(x))


class PRandomField(_Frozen):
    """Piecewise-constant random retention field on a grid over the window."""

    kind: Literal["p_random_field"] = "p_random_field"
    cells: tuple[int, ...]
    law: ScalarLaw = Beta(a=2.0, b=2.0)

    @field_validator("cells")
    @classmethod
    def _check(cls, v):
        if not v or any(c < 1 for c in v):
            raise ValueError("cells must be positive per axis")
        return v

    def field(self, rng) -> np.ndarray:
        return _check_prob(self.law.sample(rng, int(np.prod(self.cells)))).reshape(self.cells)

    def retention(self, pts, window, rng):
        if len(self.cells) != window.dim:
            raise SpecError("random-field grid must match window dimension")
        values = self.field(rng)
        if len(pts) == 0:
            return np.zeros(0)
        cells = np.asarray(self.cells)
        idx = np.floor((pts - window.lo) / window.widths * cells).astype(int)
        idx = np.clip(idx, 0, cells - 1)
        return values[tuple(idx.T)]


ThinningRule = Annotated[Union[PConst, PLocation, PRandomField], Field(discriminator="kind")]


def _apply_thinning(pts, window, rule, rng):
    probs = rule.retention(pts, window, rng)
    keep = rng.random(len(pts)) < probs
    return pts[keep]


def thin(pattern: pp.PointPattern, rule, seed: int) -> pp.PointPattern:
    pts = _apply_thinning(pattern.points, pattern.window, rule, generator(seed))
    return pp.PointPattern(pts, pattern.window, seed=int(seed), spec_id=pattern.spec_id)


# ---------------------------------------------------------------------------
# translation


class _Shift(_Frozen):
    location: LocationFn | None = None

    def draw(self, pts, rng) -> np.ndarray:
        n, d = pts.shape
        t = self._raw(rng, n, d)
        if self.location is not None and n:
            t = t * self.location(pts)[:, None]
        return t


class ZeroShift(_Shift):
    kind: Literal["zero"] = "zero"

    def _raw(self, rng, n, d):
        return np.zeros((n, d))


class GaussianShift(_Shift):
    kind: Literal["gaussian"] = "gaussian"
    sigma: float = Field(gt=0)

    def _raw(self, rng, n, d):
        return self.sigma * rng.standard_normal((n, d))


class UniformBallShift(_Shift):
    kind: Literal["uniform_ball"] = "uniform_ball"
    radius: float = Field(gt=0)

    def _raw(self, rng, n, d):
        return pp.UniformBall(radius=self.radius).sample(rng, n, d)


class UniformCellShift(_Shift):
    """Uniform displacement inside the Voronoi cell of the origin of lattice ``generator``."""

    kind: Literal["uniform_cell"] = "uniform_cell"
    generator: tuple[tuple[float, ...], ...]

    def _raw(self, rng, n, d):
        return pp.voronoi_offsets(np.asarray(self.generator), n, rng)


TranslationSampler = Annotated[
    Union[ZeroShift, GaussianShift, UniformBallShift, UniformCellShift], Field(discriminator="kind")
]


def _shift(pts, window, sampler, rng):
    out = pts + sampler.draw(pts, rng)
    return window.wrap(out)


def translate(pattern: pp.PointPattern, sampler, seed: int) -> pp.PointPattern:
    """Shift every point independently. On a euclidean window, points that leave
    are kept and the returned window grows to cover them."""
    pts = _shift(pattern.points, pattern.window, sampler, generator(seed))
    window = pattern.window
    if window.metric == "euclidean" and len(pts) and not np.all(window.contains(pts)):
        lo = np.minimum(window.lo, pts.min(axis=0))
        hi = np.maximum(window.hi, pts.max(axis=0))
        window = pp.Window(lower=tuple(map(float, lo)), upper=tuple(map(float, hi)))
    return pp.PointPattern(pts, window, seed=int(seed), spec_id=pattern.spec_id)


# ---------------------------------------------------------------------------
# superposition


def superpose(patterns) -> pp.PointPattern:
    patterns = list(patterns)
    if not patterns:
        raise SpecError("nothing to superpose")
    window = patterns[0].window
    if any(p.window != window for p in patterns[1:]):
        raise SpecError("superposed patterns must share one window")
    pts = np.concatenate([p.points for p in patterns], axis=0)
    if len(pts) > 1 and len(np.unique(pts, axis=0)) != len(pts):
        raise DuplicatePointError("superposition produced coincident points")
    return pp.PointPattern(pts, window)


# ---------------------------------------------------------------------------
# lifted processes


class Marked(_Frozen):
    kind: Literal["marked"] = "marked"
    base: "Process"
    sampler: MarkSampler

    def draw(self, window, rng):
        return self.base.draw(window, rng)

    def draw_marked(self, window, rng):
        pts = self.base.draw(window, rng)
        return pts, self.sampler.draw(pts, rng)

    def mean_count(self, window):
        return self.base.mean_count(window)


class Thinned(_Frozen):
    kind: Literal["thinned"] = "thinned"
    base: "Process"
    rule: ThinningRule

    def draw(self, window, rng):
        return _apply_thinning(self.base.draw(window, rng), window, self.rule, rng)

    def mean_count(self, window):
        return self.base.mean_count(window)  # upper bound


class Translated(_Frozen):
    kind: Literal["translated"] = "translated"
    base: "Process"
    sampler: TranslationSampler

    def draw(self, window, rng):
        return _shift(self.base.draw(window, rng), window, self.sampler, rng)

    def mean_count(self, window):
        return self.base.mean_count(window)


class Superposed(_Frozen):
    kind: Literal["superposed"] = "superposed"
    components: tuple["Process", ...]

    def draw(self, window, rng):
        parts = [c.draw(window, rng) for c in self.components]
        if not parts:
            return np.zeros((0, window.dim))
        return np.concatenate(parts, axis=0)

    def mean_count(self, window):
        return sum(c.mean_count(window) for c in self.components)


Process = Annotated[
    Union[
        pp.StationaryPoisson,
        pp.MixedPoisson,
        pp.CoxGrid,
        pp.Cluster,
        pp.PerturbedLattice,
        pp.MixedBinomial,
        pp.Lattice,
        Marked,
        Thinned,
        Translated,
        Superposed,
    ],
    Field(discriminator="kind"),
]
for _cls in (Marked, Thinned, Translated, Superposed):
    _cls.model_rebuild()
process_adapter = TypeAdapter(Process)


def parse_process(obj) -> Process:
    """Any process spec, lifted ones included, from a dict or JSON string."""
    if isinstance(obj, (str, bytes)):
        return process_adapter.validate_json(obj)
    return process_adapter.validate_python(obj)


def lift(spec, op: dict | BaseModel):
    """Wrap ``spec`` in one operation given as ``{"op": "thin", "rule": {...}}`` etc."""
    if isinstance(op, BaseModel):
        op = op.model_dump(mode="json", by_alias=True)
    op = dict(op)
    name = op.pop("op", None)
    if name == "mark":
        return Marked(base=spec, **op)
    if name == "thin":
        return Thinned(base=spec, **op)
    if name == "translate":
        return Translated(base=spec, **op)
    if name == "superpose":
        return Superposed(components=(spec, *op.get("with", ())))
    raise SpecError(f"unknown operation {name!r}")


# ---------------------------------------------------------------------------
# transformed test functions


class Transformed:
    """A test function seen by the base process after an operation.

    ``factory`` maps a (window-bound) base function to the transformed one.
    """

    needs_marks = False

    def __init__(self, factory, base, rtol=None):
        self._factory = factory
        self._base = base
        self._fn = factory(base)
        self.rtol = rtol

    def bind(self, window):
        if not hasattr(self._base, "bind"):
            return self
        return Transformed(self._factory, self._base.bind(window), self.rtol)

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def total(self, pts, marks=None):
        return float(np.sum(self(pts))) if len(pts) else 0.0

    def breaks(self, dim):
        return self._base.breaks(dim) if hasattr(self._base, "breaks") else None


def thinning_transform(u, rule) -> Transformed:
    """``u_p(x) = -log(exp(-u(x)) p(x) + 1 - p(x))`` for a deterministic retention rule."""
    if isinstance(rule, PRandomField):
        raise SpecError("random-field thinning has no deterministic transform")
    return Transformed(lambda v: lambda x: -np.log1p(rule.prob(x) * np.expm1(-v(x))), u)


def marking_transform(u, sampler: MarkSampler) -> Transformed:
    """``u~(x) = -log E[exp(-m v(x))]`` for ``u(m, x) = m * v(x)`` and location-free marks."""
    if sampler.location is not None:
        raise SpecError("closed-form marking transform needs location-independent marks")
    base = getattr(u, "base", u)
    return Transformed(lambda v: lambda x: -np.log(sampler.law.laplace(v(x))), base)


def _gaussian_box_mass(x, sigma, lo, hi):
    """``P(x + sigma Z in [lo, hi])`` for standard normal ``Z``, per row of ``x``."""
    return np.prod(ndtr((hi - x) / sigma) - ndtr((lo - x) / sigma), axis=1)


def translation_transform(u, sampler, nodes: int = 16) -> Transformed:
    """``u_t(x) = -log E[exp(-u(x + t))]`` for Gaussian shifts.

    Exact for box indicators. Other smooth, unrestricted functions use tensor
    Gauss-Hermite with ``nodes`` per axis, accurate to about 1e-5 relative
    once integrated, which is the tolerance they report.
    """
    if isinstance(sampler, ZeroShift):
        return Transformed(lambda v: v, u)
    if not isinstance(sampler, GaussianShift) or sampler.location is not None:
        raise SpecError("translation transform implemented for location-free gaussian shifts")
    sigma = sampler.sigma

    def factory(v):
        region = getattr(v, "region", None)
        if getattr(v, "kind", None) == "indicator_scaled" and region is not None:
            lo, hi = np.asarray(region[0]), np.asarray(region[1])
            return lambda x: -np.log1p(np.expm1(-v.c) * _gaussian_box_mass(x, sigma, lo, hi))
        if region is not None:
            # jumps at the region edge spread over every node and defeat the cubature
            raise SpecError("translation transform of a region-restricted function; use lf_translated_ppp")
        gx, gw = np.polynomial.hermite_e.hermegauss(nodes)
        gw = gw / gw.sum()

        def fn(x):
            acc = np.zeros(len(x))
            for idx in itertools.product(range(nodes), repeat=x.shape[1]):
                acc += np.prod(gw[list(idx)]) * np.exp(-v(x + sigma * gx[list(idx)]))
            return -np.log(acc)

        return fn

    exact = getattr(u, "kind", None) == "indicator_scaled"
    return _SmoothTransformed(factory, u, None if exact else 1e-5)


class _SmoothTransformed(Transformed):
    # convolution smooths the base function, so its kinks are no longer breaks
    def bind(self, window):
        return _SmoothTransformed(self._factory, self._base.bind(window), self.rtol)

    def breaks(self, dim):
        return None


def lf_translated_ppp(intensity: float, u, window: pp.Window, sigma: float, reach: float = 8.0) -> float:
    """Laplace functional of a Poisson process on ``window`` after i.i.d. Gaussian shifts.

    Displaced Poisson points form a Poisson process with intensity
    ``intensity * P(y - t in window)``; the integral runs over the window
    dilated by ``reach * sigma``. A cross-check for ``translation_transform``.
    """
    from .ordering import _window_integral

    if hasattr(u, "bind"):
        u = u.bind(window)
    lo, hi = window.lo, window.hi
    outer = window.dilate(reach * sigma)
    g = lambda y: -np.expm1(-u(y)) * _gaussian_box_mass(y, sigma, lo, hi)
    return float(np.exp(-intensity * _window_integral(g, u, outer)))
