"""Point-process types and samplers.

Process specs are frozen pydantic models with a ``kind`` discriminator so
they round-trip through JSON configs. Each spec knows how to draw a raw
``(n, d)`` coordinate array from a generator (``draw``); ``sample`` wraps
that into a validated, immutable :class:`PointPattern`.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator
from scipy import optimize, stats

from . import rng as _rng
from .errors import CapExceededError, SpecError
from .laws import ScalarLaw

DEFAULT_MAX_POINTS = 10**7

# quantile of the daughter-offset norm used to dilate the parent window
CLUSTER_EDGE_QUANTILE = 0.99999


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# windows


class Window(_Frozen):
    lower: tuple[float, ...] = (0.0, 0.0)
    upper: tuple[float, ...] = (1.0, 1.0)
    metric: Literal["euclidean", "toroidal"] = "euclidean"

    @model_validator(mode="after")
    def _check(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if len(self.lower) not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not all(lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need lower[i] < upper[i] on every axis")
        if not all(math.isfinite(v) for v in self.lower + self.upper):
            raise ValueError("window bounds must be finite")
        return self

    @classmethod
    def square(cls, side: float, dim: int = 2, centered: bool = False, metric="euclidean"):
        lo = -side / 2 if centered else 0.0
        return cls(lower=(lo,) * dim, upper=(lo + side,) * dim, metric=metric)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        if self.metric == "toroidal":
            return np.all((pts >= self.lo) & (pts < self.hi), axis=1)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def wrap(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.metric != "toroidal":
            return pts
        out = self.lo + np.mod(pts - self.lo, self.widths)
        # mod can round up to exactly the width
        return np.where(out >= self.hi, self.lo, out)

    def displacement(self, a, b) -> np.ndarray:
        """``b - a`` under the window metric (minimum image on a torus); broadcasts."""
        diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        if self.metric == "toroidal":
            w = self.widths
            diff = diff - w * np.round(diff / w)
        return diff

    def distance(self, a, b) -> np.ndarray:
        return np.linalg.norm(self.displacement(a, b), axis=-1)

    def dilate(self, r: float) -> "Window":
        return Window(
            lower=tuple(float(v) for v in self.lo - r),
            upper=tuple(float(v) for v in self.hi + r),
            metric="euclidean",
        )

    def draw_uniform(self, rng, n: int) -> np.ndarray:
        return self.lo + rng.random((n, self.dim)) * self.widths


# ---------------------------------------------------------------------------
# count distributions


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
        raise SpecError("pgf argument t must lie in [0, 1]")
    return t


class Fixed(_Frozen):
    kind: Literal["fixed"] = "fixed"
    n: int = Field(ge=0)

    def mean(self) -> float:
        return float(self.n)

    def pgf(self, t):
        return _check_t(t) ** self.n

    def pmf(self, k):
        return (np.asarray(k) == self.n).astype(float)

    def sf(self, k):
        return (self.n > np.asarray(k)).astype(float)

    def sample(self, rng, size=None):
        return np.full(size, self.n, dtype=np.int64) if size is not None else self.n

    @property
    def max_value(self):
        return self.n


class Binomial(_Frozen):
    kind: Literal["binomial"] = "binomial"
    L: int = Field(ge=0)
    p: float = Field(ge=0, le=1)

    def mean(self) -> float:
        return self.L * self.p

    def pgf(self, t):
        return (1.0 - self.p + self.p * _check_t(t)) ** self.L

    def pmf(self, k):
        return stats.binom.pmf(k, self.L, self.p)

    def sf(self, k):
        return stats.binom.sf(k, self.L, self.p)

    def sample(self, rng, size=None):
        return rng.binomial(self.L, self.p, size)

    @property
    def max_value(self):
        return self.L


class Poisson(_Frozen):
    kind: Literal["poisson"] = "poisson"
    mu: float = Field(ge=0)

    def mean(self) -> float:
        return self.mu

    def pgf(self, t):
        return np.exp(-self.mu * (1.0 - _check_t(t)))

    def pmf(self, k):
        return stats.poisson.pmf(k, self.mu)

    def sf(self, k):
        return stats.poisson.sf(k, self.mu)

    def sample(self, rng, size=None):
        return rng.poisson(self.mu, size)

    @property
    def max_value(self):
        return None


class NegativeBinomial(_Frozen):
    """Failures before the ``r``-th success, success probability ``p``."""

    kind: Literal["negative_binomial"] = "negative_binomial"
    r: float = Field(gt=0)
    p: float = Field(gt=0, le=1)

    def mean(self) -> float:
        return self.r * (1.0 - self.p) / self.p

    def pgf(self, t):
        return (self.p / (1.0 - (1.0 - self.p) * _check_t(t))) ** self.r

    def pmf(self, k):
        return stats.nbinom.pmf(k, self.r, self.p)

    def sf(self, k):
        return stats.nbinom.sf(k, self.r, self.p)

    def sample(self, rng, size=None):
        return rng.negative_binomial(self.r, self.p, size)

    @property
    def max_value(self):
        return None


class TwoPoint(_Frozen):
    """``P{v0} = q``, ``P{v1} = 1 - q``."""

    kind: Literal["two_point"] = "two_point"
    v0: int = Field(ge=0)
    v1: int = Field(ge=0)
    q: float = Field(ge=0, le=1)

    def mean(self) -> float:
        return self.q * self.v0 + (1.0 - self.q) * self.v1

    def pgf(self, t):
        t = _check_t(t)
        return self.q * t**self.v0 + (1.0 - self.q) * t**self.v1

    def pmf(self, k):
        k = np.asarray(k)
        return self.q * (k == self.v0) + (1.0 - self.q) * (k == self.v1)

    def sf(self, k):
        k = np.asarray(k)
        return self.q * (self.v0 > k) + (1.0 - self.q) * (self.v1 > k)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.where(u < self.q, self.v0, self.v1).astype(np.int64) if size is not None else (
            self.v0 if u < self.q else self.v1
        )

    @property
    def max_value(self):
        return max(self.v0, self.v1)


class Empirical(_Frozen):
    """Explicit pmf table over ``0, 1, ..., len(pmf) - 1``."""

    kind: Literal["empirical"] = "empirical"
    pmf_table: tuple[float, ...] = Field(alias="pmf")

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    @field_validator("pmf_table")
    @classmethod
    def _check(cls, v):
        if not v or any(p < 0 for p in v):
            raise ValueError("pmf must be a non-empty table of non-negative values")
        if abs(math.fsum(v) - 1.0) > 1e-12:
            raise ValueError("pmf must sum to 1")
        return v

    def mean(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.pmf_table))

    def pgf(self, t):
        t = _check_t(t)
        return sum(p * t**k for k, p in enumerate(self.pmf_table))

    def pmf(self, k):
        k = np.asarray(k)
        table = np.asarray(self.pmf_table)
        ok = (k >= 0) & (k < len(table))
        return np.where(ok, table[np.clip(k, 0, len(table) - 1)], 0.0)

    def sf(self, k):
        cdf = np.cumsum(self.pmf_table)
        k = np.asarray(k)
        return np.where(k < 0, 1.0, 1.0 - cdf[np.clip(k, 0, len(cdf) - 1)])

    def sample(self, rng, size=None):
        return rng.choice(len(self.pmf_table), size=size, p=np.asarray(self.pmf_table))

    @property
    def max_value(self):
        return len(self.pmf_table) - 1


CountDistribution = Annotated[
    Union[Fixed, Binomial, Poisson, NegativeBinomial, TwoPoint, Empirical],
    Field(discriminator="kind"),
]
count_adapter = TypeAdapter(CountDistribution)


# ---------------------------------------------------------------------------
# cluster representative


class UniformBall(_Frozen):
    kind: Literal["uniform_ball"] = "uniform_ball"
    radius: float = Field(gt=0)

    def sample(self, rng, n, d):
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(n) ** (1.0 / d)
        return g * r[:, None]

    def norm_quantile(self, q, d):
        return self.radius


class Gaussian(_Frozen):
    kind: Literal["gaussian"] = "gaussian"
    sigma: float | tuple[float, ...]

    @field_validator("sigma")
    @classmethod
    def _check(cls, v):
        vals = v if isinstance(v, tuple) else (v,)
        if not all(s > 0 for s in vals):
            raise ValueError("sigma must be positive")
        return v

    def _sigmas(self, d):
        if isinstance(self.sigma, tuple):
            if len(self.sigma) != d:
                raise SpecError("per-axis sigma length does not match dimension")
            return np.asarray(self.sigma)
        return np.full(d, self.sigma)

    def sample(self, rng, n, d):
        return rng.standard_normal((n, d)) * self._sigmas(d)

    def norm_quantile(self, q, d):
        return float(self._sigmas(d).max() * math.sqrt(stats.chi2.ppf(q, d)))


Offset = Annotated[Union[UniformBall, Gaussian], Field(discriminator="kind")]


class ClusterSpec(_Frozen):
    count: CountDistribution
    offset: Offset


# ---------------------------------------------------------------------------
# process specs


class StationaryPoisson(_Frozen):
    kind: Literal["stationary_poisson"] = "stationary_poisson"
    intensity: float = Field(ge=0)

    def mean_count(self, window: Window) -> float:
        return self.intensity * window.volume()

    def density(self) -> float:
        return self.intensity

    def draw(self, window: Window, rng) -> np.ndarray:
        n = rng.poisson(self.intensity * window.volume())
        return window.draw_uniform(rng, n)


class MixedPoisson(_Frozen):
    """Poisson process whose intensity is drawn once from a finite table."""

    kind: Literal["mixed_poisson"] = "mixed_poisson"
    table: tuple[tuple[float, float], ...]

    @field_validator("table")
    @classmethod
    def _check(cls, v):
        if not v:
            raise ValueError("mixing table must be non-empty")
        if any(lam < 0 or q < 0 for lam, q in v):
            raise ValueError("mixing intensities and weights must be non-negative")
        if abs(math.fsum(q for _, q in v) - 1.0) > 1e-12:
            raise ValueError("mixing weights must sum to 1")
        return v

    @classmethod
    def two_point(cls, intensity: float, spread: float = 0.5):
        """Equal-weight mix of ``(1 -+ spread) * intensity``; mean ``intensity``."""
        return cls(table=(((1 - spread) * intensity, 0.5), ((1 + spread) * intensity, 0.5)))

    def density(self) -> float:
        return math.fsum(lam * q for lam, q in self.table)

    def mean_count(self, window: Window) -> float:
        return self.density() * window.volume()

    def draw(self, window: Window, rng) -> np.ndarray:
        k = rng.choice(len(self.table), p=np.asarray([q for _, q in self.table]))
        n = rng.poisson(self.table[k][0] * window.volume())
        return window.draw_uniform(rng, n)


class CoxGrid(_Frozen):
    """Cox process driven by a piecewise-constant field with i.i.d. cell values."""

    kind: Literal["cox_grid"] = "cox_grid"
    cells: tuple[int, ...]
    cell_intensity: ScalarLaw

    @field_validator("cells")
    @classmethod
    def _check(cls, v):
        if not v or any(c < 1 for c in v):
            raise ValueError("cells must be positive per axis")
        return v

    def density(self) -> float:
        return self.cell_intensity.mean()

    def mean_count(self, window: Window) -> float:
        return self.density() * window.volume()

    def cell_boxes(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        if len(self.cells) != window.dim:
            raise SpecError("cox_grid cells must match window dimension")
        width = window.widths / np.asarray(self.cells)
        idx = np.array(list(itertools.product(*[range(c) for c in self.cells])), dtype=float)
        lo = window.lo + idx * width
        return lo, lo + width

    def draw(self, window: Window, rng) -> np.ndarray:
        lo, hi = self.cell_boxes(window)
        vol = float(np.prod(hi[0] - lo[0]))
        lam = self.cell_intensity.sample(rng, len(lo))
        counts = rng.poisson(lam * vol)
        base = np.repeat(lo, counts, axis=0)
        return base + rng.random(base.shape) * (hi[0] - lo[0])


class MixedBinomial(_Frozen):
    kind: Literal["mixed_binomial"] = "mixed_binomial"
    count: CountDistribution

    def mean_count(self, window: Window) -> float:
        return self.count.mean()

    def density(self):
        return None

    def draw(self, window: Window, rng) -> np.ndarray:
        return window.draw_uniform(rng, int(self.count.sample(rng)))


def _matrix(v):
    g = np.asarray(v, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] not in (1, 2, 3):
        raise ValueError("generator must be a square d x d matrix, d in 1..3")
    if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) < 1e-12:
        raise ValueError("generator matrix must be invertible")
    return v


class Lattice(_Frozen):
    kind: Literal["lattice"] = "lattice"
    generator: tuple[tuple[float, ...], ...]

    @field_validator("generator")
    @classmethod
    def _check(cls, v):
        return _matrix(v)

    @property
    def G(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=float)

    def density(self) -> float:
        return 1.0 / abs(np.linalg.det(self.G))

    def mean_count(self, window: Window) -> float:
        return float(len(self.draw(window, None)))

    def draw(self, window: Window, rng) -> np.ndarray:
        if window.metric == "toroidal":
            return _torus_lattice(self.G, window)
        pts = lattice_points(self.G, window)
        return pts[window.contains(pts)]


class PerturbedLattice(_Frozen):
    """Each lattice point replaced by a random number of uniform replicas in its Voronoi cell."""

    kind: Literal["perturbed_lattice"] = "perturbed_lattice"
    generator: tuple[tuple[float, ...], ...]
    replicas: CountDistribution

    @field_validator("generator")
    @classmethod
    def _check(cls, v):
        return _matrix(v)

    @property
    def G(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=float)

    def density(self) -> float:
        return self.replicas.mean() / abs(np.linalg.det(self.G))

    def mean_count(self, window: Window) -> float:
        return self.density() * window.volume()

    def draw(self, window: Window, rng) -> np.ndarray:
        G = self.G
        if window.metric == "toroidal":
            parents = _torus_lattice(G, window)
        else:
            parents = lattice_points(G, window)
        counts = self.replicas.sample(rng, len(parents))
        base = np.repeat(parents, counts, axis=0)
        pts = base + voronoi_offsets(G, len(base), rng)
        if window.metric == "toroidal":
            return window.wrap(pts)
        return pts[window.contains(pts)]


class Cluster(_Frozen):
    """Homogeneous independent cluster process."""

    kind: Literal["cluster"] = "cluster"
    parent: "ProcessSpec"
    representative: ClusterSpec

    def density(self):
        pd = self.parent.density()
        return None if pd is None else pd * self.representative.count.mean()

    def mean_count(self, window: Window) -> float:
        dens = self.density()
        if dens is None:
            raise SpecError("cluster parent must have a constant intensity")
        return dens * window.volume()

    def parent_window(self, window: Window) -> Window:
        if window.metric == "toroidal":
            return window
        r = self.representative.offset.norm_quantile(CLUSTER_EDGE_QUANTILE, window.dim)
        return window.dilate(r)

    def draw(self, window: Window, rng) -> np.ndarray:
        parents = self.parent.draw(self.parent_window(window), rng)
        counts = self.representative.count.sample(rng, len(parents))
        base = np.repeat(parents, counts, axis=0)
        pts = base + self.representative.offset.sample(rng, len(base), window.dim)
        if window.metric == "toroidal":
            return window.wrap(pts)
        return pts[window.contains(pts)]


ProcessSpec = Annotated[
    Union[StationaryPoisson, MixedPoisson, CoxGrid, Cluster, PerturbedLattice, MixedBinomial, Lattice],
    Field(discriminator="kind"),
]
Cluster.model_rebuild()
spec_adapter = TypeAdapter(ProcessSpec)


def parse_spec(obj) -> ProcessSpec:
    """Validate a JSON-like dict (or JSON string) into a process spec."""
    if isinstance(obj, str):
        return spec_adapter.validate_json(obj)
    return spec_adapter.validate_python(obj)


def spec_to_dict(spec) -> dict:
    return spec.model_dump(mode="json", by_alias=True)


def spec_id(spec) -> str:
    blob = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# lattice geometry


@lru_cache(maxsize=64)
def _cell_geometry(key: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    G = np.asarray(key, dtype=float)
    d = G.shape[0]
    Ginv = np.linalg.inv(G)
    # covering radius <= half the longest diagonal of the fundamental parallelepiped
    rho = 0.5 * np.linalg.norm(G, axis=0).sum()
    reach = np.ceil(2 * rho * np.linalg.norm(Ginv, axis=1)).astype(int)
    ks = np.array(list(itertools.product(*[range(-k, k + 1) for k in reach])), dtype=float)
    vs = ks @ G.T
    norms = np.linalg.norm(vs, axis=1)
    keep = (norms > 0) & (norms <= 2 * rho * (1 + 1e-9))
    vs = vs[keep]
    half = 0.5 * np.sum(vs**2, axis=1)
    extent = np.empty(d)
    for j in range(d):
        c = np.zeros(d)
        c[j] = -1.0
        res = optimize.linprog(c, A_ub=vs, b_ub=half, bounds=[(None, None)] * d, method="highs")
        extent[j] = -res.fun
    return vs, half, extent


def cell_geometry(G) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Voronoi-relevant candidate vectors, their half squared norms, and per-axis half-extents
    of the Voronoi cell at the origin."""
    return _cell_geometry(tuple(map(tuple, np.asarray(G, dtype=float))))


def in_origin_cell(G, offsets) -> np.ndarray:
    """Strict membership of offsets in the open Voronoi cell of the origin (ties rejected)."""
    vs, half, _ = cell_geometry(G)
    return np.all(np.asarray(offsets) @ vs.T < half, axis=1)


def voronoi_offsets(G, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. uniform points in the Voronoi cell of the origin, by rejection from its
    bounding box."""
    G = np.asarray(G, dtype=float)
    d = G.shape[0]
    vs, half, ext = cell_geometry(G)
    out = np.empty((n, d))
    filled = 0
    accept = abs(np.linalg.det(G)) / np.prod(2 * ext)
    while filled < n:
        need = n - filled
        batch = int(need / accept * 1.1) + 8
        cand = (2 * rng.random((batch, d)) - 1) * ext
        ok = cand[np.all(cand @ vs.T < half, axis=1)][:need]
        out[filled : filled + len(ok)] = ok
        filled += len(ok)
    return out


def lattice_points(G, window: Window) -> np.ndarray:
    """Lattice points ``G u`` whose Voronoi cells can meet the window.

    Integer ``u`` are enumerated over the preimage of the window padded by the
    cell's half-extent, then filtered to points whose cell bounding box
    intersects the window.
    """
    G = np.asarray(G, dtype=float)
    out = _lattice_points(tuple(map(tuple, G.tolist())), window)
    return out.copy()


@lru_cache(maxsize=64)
def _lattice_points(key: tuple, window: Window) -> np.ndarray:
    G = np.asarray(key, dtype=float)
    if G.shape != (window.dim, window.dim):
        raise SpecError("generator dimension does not match window")
    if abs(np.linalg.det(G)) < 1e-12:
        raise SpecError("generator matrix must be invertible")
    _, _, ext = cell_geometry(G)
    lo = window.lo - ext
    hi = window.hi + ext
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    pre = corners @ np.linalg.inv(G).T
    umin = np.floor(pre.min(axis=0)).astype(int) - 1
    umax = np.ceil(pre.max(axis=0)).astype(int) + 1
    us = np.array(list(itertools.product(*[range(a, b + 1) for a, b in zip(umin, umax)])), dtype=float)
    pts = us @ G.T
    keep = np.all((pts >= lo) & (pts <= hi), axis=1)
    return pts[keep]


def _torus_lattice(G, window: Window) -> np.ndarray:
    Ginv = np.linalg.inv(G)
    for i in range(window.dim):
        e = np.zeros(window.dim)
        e[i] = window.widths[i]
        k = Ginv @ e
        if np.max(np.abs(k - np.round(k))) > 1e-9:
            raise SpecError("toroidal window sides must be lattice vectors of the generator")
    pts = lattice_points(G, Window(lower=window.lower, upper=window.upper))
    return pts[window.contains(pts)]


# ---------------------------------------------------------------------------
# point patterns


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite, simple realization inside a window. Immutable."""

    points: np.ndarray
    window: Window
    seed: int | None = None
    spec_id: str | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True).reshape(-1, self.window.dim)
        if not np.all(np.isfinite(pts)):
            raise SpecError("point coordinates must be finite")
        if not np.all(self.window.contains(pts)):
            raise SpecError("pattern has points outside its window")
        if len(pts) > 1 and len(np.unique(pts, axis=0)) != len(pts):
            raise SpecError("pattern is not simple: duplicate points")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.points, other.points)

    __hash__ = None


def intensity_measure(spec, window: Window) -> float:
    """Exact expected number of points of ``spec`` in ``window``."""
    return float(spec.mean_count(window))


def _check_cap(spec, window: Window, max_points: float) -> None:
    expected = intensity_measure(spec, window)
    if isinstance(spec, Cluster):
        pw = spec.parent_window(window)
        expected = max(expected, intensity_measure(spec.parent, pw) * (1 + spec.representative.count.mean()))
    if expected > max_points:
        raise CapExceededError(
            f"expected {expected:.6g} points exceeds the cap of {max_points:.6g}"
        )


def sample(spec, window: Window, seed: int, max_points: float = DEFAULT_MAX_POINTS) -> PointPattern:
    """Draw one realization of ``spec`` in ``window``; deterministic in ``seed``."""
    _check_cap(spec, window, max_points)
    pts = spec.draw(window, _rng.generator(seed))
    return PointPattern(pts, window, seed=int(seed), spec_id=spec_id(spec))
