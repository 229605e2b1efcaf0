"""Laplace functionals, Campbell means and order checks.

Monte Carlo estimates draw one realization per replication and evaluate
every test function of a family on it, so a family costs one sampling pass.
Replication ``r`` of process ``P`` always uses the stream
``(seed, "lf", spec_id(P), r)``: identical processes get identical streams,
structurally different ones get independent streams.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Annotated, ClassVar, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from . import pointproc as pp
from .errors import SpecError
from .quadrature import RTOL, integrate
from .rng import mean_se, replicate

DEFAULT_Z = 2.0


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# test functions


def _norm(x, center):
    x = np.asarray(x, dtype=float)
    if center is not None:
        x = x - np.asarray(center, dtype=float)
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def _in_region(x, region):
    lo, hi = region
    inside = np.ones(len(x), dtype=bool)
    for i in range(x.shape[1]):
        inside &= (x[:, i] >= lo[i]) & (x[:, i] <= hi[i])
    return inside


class _TestFunctionBase(_Frozen):
    needs_marks: ClassVar[bool] = False

    def total(self, pts, marks=None) -> float:
        """``sum_{x in pts} u(x)``."""
        if len(pts) == 0:
            return 0.0
        return float(np.sum(self(pts)))

    def describe(self) -> str:
        fields = self.model_dump(mode="json", exclude={"kind"})
        args = ",".join(f"{k}={_fmt(v)}" for k, v in fields.items() if v is not None)
        return f"{self.kind}({args})"


def _fmt(v):
    if isinstance(v, list):
        return "[" + ";".join(_fmt(x) for x in v) + "]"
    return f"{v:g}" if isinstance(v, float) else str(v)


class IndicatorScaled(_TestFunctionBase):
    """``c * 1{x in region}``; ``region=None`` means the evaluation window."""

    kind: Literal["indicator_scaled"] = "indicator_scaled"
    c: float = Field(ge=0)
    region: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def bind(self, window: pp.Window):
        if self.region is not None:
            return self
        return self.model_copy(update={"region": (window.lower, window.upper)})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.region is None:
            return np.full(len(x), self.c)
        return self.c * _in_region(x, self.region)

    def breaks(self, dim):
        if self.region is None:
            return None
        return [[self.region[0][i], self.region[1][i]] for i in range(dim)]


class ExpDecay(_TestFunctionBase):
    """``c * exp(-beta * ||x - center||)``."""

    kind: Literal["exp_decay"] = "exp_decay"
    c: float = Field(ge=0)
    beta: float = Field(gt=0)
    center: tuple[float, ...] | None = None

    def bind(self, window):
        return self

    def __call__(self, x):
        return self.c * np.exp(-self.beta * _norm(x, self.center))

    def breaks(self, dim):
        c = self.center or (0.0,) * dim
        return [[c[i]] for i in range(dim)]


class PathlossShaped(_TestFunctionBase):
    """``T / (a + b * ||x - center||^delta)`` restricted to ``region``."""

    kind: Literal["pathloss_shaped"] = "pathloss_shaped"
    T: float = Field(ge=0)
    a: float = Field(1.0, ge=0)
    b: float = Field(1.0, gt=0)
    delta: float = Field(4.0, gt=0)
    region: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    center: tuple[float, ...] | None = None

    def bind(self, window: pp.Window):
        if self.region is not None:
            return self
        return self.model_copy(update={"region": (window.lower, window.upper)})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = _norm(x, self.center)
        with np.errstate(divide="ignore"):
            val = self.T / (self.a + self.b * r**self.delta)
        if self.region is not None:
            val = np.where(_in_region(x, self.region), val, 0.0)
        return val

    def breaks(self, dim):
        c = self.center or (0.0,) * dim
        out = [[c[i]] for i in range(dim)]
        if self.region is not None:
            for i in range(dim):
                out[i] += [self.region[0][i], self.region[1][i]]
        return out


TestFunction = Annotated[Union[IndicatorScaled, ExpDecay, PathlossShaped], Field(discriminator="kind")]
test_function_adapter = TypeAdapter(TestFunction)


class MarkScaled(_TestFunctionBase):
    """Separable marked test function ``u(m, x) = m[component] * v(x)``."""

    kind: Literal["mark_scaled"] = "mark_scaled"
    base: TestFunction
    component: int = 0
    needs_marks: ClassVar[bool] = True

    def bind(self, window):
        return self.model_copy(update={"base": self.base.bind(window)})

    def total(self, pts, marks=None) -> float:
        if len(pts) == 0:
            return 0.0
        if marks is None:
            raise SpecError("mark_scaled test function needs a marked process")
        return float(np.sum(np.asarray(marks)[:, self.component] * self.base(pts)))

    def describe(self) -> str:
        return f"mark_scaled({self.base.describe()})"


def default_family() -> list:
    """The nine default test functions: flat, smooth-decay and interference-shaped."""
    return [
        IndicatorScaled(c=0.5),
        IndicatorScaled(c=1.0),
        IndicatorScaled(c=2.0),
        ExpDecay(c=1.0, beta=0.5),
        ExpDecay(c=1.0, beta=1.0),
        ExpDecay(c=2.0, beta=1.0),
        PathlossShaped(T=1.0, a=1.0, b=1.0, delta=4.0),
        PathlossShaped(T=5.0, a=1.0, b=1.0, delta=4.0),
        PathlossShaped(T=1.0, a=1.0, b=1.0, delta=3.0),
    ]


# ---------------------------------------------------------------------------
# estimates and reports


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    replications: int


@dataclass(frozen=True)
class LfEstimate(Estimate):
    def __post_init__(self):
        if not (0.0 <= self.mean <= 1.0):
            raise ValueError(f"Laplace functional estimate {self.mean} outside [0, 1]")


VERDICTS = ("ordered", "reversed", "inconclusive")


@dataclass
class OrderReport:
    """Pointwise comparison ``lhs >= rhs`` over a grid of arguments.

    For Laplace functionals, ``lhs >= rhs`` everywhere means the lhs process
    is smaller in the LF order.
    """

    grid: list[str]
    lhs_mean: np.ndarray
    lhs_se: np.ndarray
    rhs_mean: np.ndarray
    rhs_se: np.ndarray
    z: float = DEFAULT_Z
    lhs_label: str = "lhs"
    rhs_label: str = "rhs"
    verdicts: list[str] = field(init=False)
    overall: str = field(init=False)

    def __post_init__(self):
        self.lhs_mean = np.asarray(self.lhs_mean, dtype=float)
        self.rhs_mean = np.asarray(self.rhs_mean, dtype=float)
        self.lhs_se = np.asarray(self.lhs_se, dtype=float)
        self.rhs_se = np.asarray(self.rhs_se, dtype=float)
        diff = self.lhs_mean - self.rhs_mean
        band = self.z * np.hypot(self.lhs_se, self.rhs_se)
        self.verdicts = [
            "ordered" if d > b else "reversed" if d < -b else "inconclusive"
            for d, b in zip(diff, band)
        ]
        self.overall = overall_verdict(self.verdicts, diff)

    @property
    def diff(self) -> np.ndarray:
        return self.lhs_mean - self.rhs_mean

    @property
    def n_decisive(self) -> int:
        return sum(v == "ordered" for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs_label,
            "rhs": self.rhs_label,
            "z": self.z,
            "overall": self.overall,
            "points": [
                {
                    "argument": g,
                    "lhs_mean": float(a),
                    "lhs_se": float(sa),
                    "rhs_mean": float(b),
                    "rhs_se": float(sb),
                    "verdict": v,
                }
                for g, a, sa, b, sb, v in zip(
                    self.grid, self.lhs_mean, self.lhs_se, self.rhs_mean, self.rhs_se, self.verdicts
                )
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["argument", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "verdict"])
        for p in self.to_dict()["points"]:
            w.writerow(
                [p["argument"]]
                + ["%.12g" % p[k] for k in ("lhs_mean", "lhs_se", "rhs_mean", "rhs_se")]
                + [p["verdict"]]
            )
        return buf.getvalue()


def overall_verdict(verdicts: Sequence[str], diff: Sequence[float]) -> str:
    """Aggregate pointwise verdicts.

    ``reversed`` if any point is decisively reversed; ``ordered-degenerate``
    when no point is decisive (data consistent with equality); ``ordered``
    when at least one point is decisively ordered and every undecided point
    leans the same way; otherwise ``inconclusive``.
    """
    if "reversed" in verdicts:
        return "reversed"
    if "ordered" not in verdicts:
        return "ordered-degenerate"
    if all(v == "ordered" or d >= 0 for v, d in zip(verdicts, diff)):
        return "ordered"
    return "inconclusive"


# ---------------------------------------------------------------------------
# Monte Carlo Laplace functionals


def _draw(process, window, rng, marked):
    if marked:
        return process.draw_marked(window, rng)
    return process.draw(window, rng), None


def lf_mc_family(process, family, window: pp.Window, reps: int, seed: int, threads=None) -> list[LfEstimate]:
    """Monte Carlo Laplace functional of ``process`` at every test function of ``family``."""
    if reps < 2:
        raise SpecError("need at least 2 replications")
    if not family:
        raise SpecError("empty test-function family")
    bound = [u.bind(window) for u in family]
    marked = any(u.needs_marks for u in bound)
    k = len(bound)

    def one(rng):
        pts, marks = _draw(process, window, rng, marked)
        return np.exp(-np.array([u.total(pts, marks) for u in bound]))

    vals = replicate(one, reps, seed, "lf", pp.spec_id(process), threads=threads, width=k)
    mean, se = mean_se(vals)
    return [LfEstimate(float(np.clip(m, 0, 1)), float(s), reps) for m, s in zip(mean, se)]


def lf_mc(process, u, window: pp.Window, reps: int, seed: int, threads=None) -> LfEstimate:
    """Monte Carlo estimate of ``E[exp(-sum_x u(x))]``."""
    return lf_mc_family(process, [u], window, reps, seed, threads)[0]


def aggregate_mc(process, u, window: pp.Window, reps: int, seed: int, threads=None) -> np.ndarray:
    """Per-replication aggregate ``sum_x u(x)``, on the same streams as :func:`lf_mc`."""
    u = u.bind(window)

    def one(rng):
        pts, marks = _draw(process, window, rng, u.needs_marks)
        return u.total(pts, marks)

    return replicate(one, reps, seed, "lf", pp.spec_id(process), threads=threads)


# ---------------------------------------------------------------------------
# analytic values


def _window_integral(g, u, window: pp.Window, lower=None, upper=None) -> float:
    lower = window.lo if lower is None else np.asarray(lower, dtype=float)
    upper = window.hi if upper is None else np.asarray(upper, dtype=float)
    breaks = u.breaks(window.dim) if hasattr(u, "breaks") else None
    # approximate transforms carry their own attainable tolerance
    rtol = getattr(u, "rtol", None) or RTOL
    return integrate(g, lower, upper, breaks=breaks, rtol=rtol)


def void_integral(u, window: pp.Window, lower=None, upper=None) -> float:
    """``integral (1 - exp(-u(x))) dx`` over the window (or a sub-box)."""
    return _window_integral(lambda x: -np.expm1(-u(x)), u, window, lower, upper)


def lf_ppp_analytic(intensity: float, u, window: pp.Window) -> float:
    """Laplace functional of a homogeneous Poisson process restricted to ``window``."""
    if intensity < 0:
        raise SpecError("intensity must be non-negative")
    if intensity == 0:
        return 1.0
    if hasattr(u, "bind"):
        u = u.bind(window)
    return math.exp(-intensity * void_integral(u, window))


def lf_analytic(spec, u, window: pp.Window) -> float:
    """Exact Laplace functional where the process class admits one.

    Raises ``NotImplementedError`` for classes without a closed form here
    (clusters, non-box lattice cells, lifted operations).
    """
    if hasattr(u, "bind"):
        u = u.bind(window)
    if getattr(u, "needs_marks", False):
        raise NotImplementedError("marked test functions have no generic closed form")
    if isinstance(spec, pp.StationaryPoisson):
        return lf_ppp_analytic(spec.intensity, u, window)
    if isinstance(spec, pp.MixedPoisson):
        a = void_integral(u, window)
        return math.fsum(q * math.exp(-lam * a) for lam, q in spec.table)
    if isinstance(spec, pp.CoxGrid):
        lo, hi = spec.cell_boxes(window)
        out = 1.0
        for a, b in zip(lo, hi):
            out *= float(spec.cell_intensity.laplace(void_integral(u, window, a, b)))
        return out
    if isinstance(spec, pp.MixedBinomial):
        t = 1.0 - void_integral(u, window) / window.volume()
        return float(spec.count.pgf(min(max(t, 0.0), 1.0)))
    if isinstance(spec, pp.Lattice):
        return math.exp(-u.total(spec.draw(window, None)))
    if isinstance(spec, pp.PerturbedLattice):
        return _perturbed_lattice_lf(spec, u, window)
    raise NotImplementedError(f"no closed-form Laplace functional for {type(spec).__name__}")


def _perturbed_lattice_lf(spec, u, window):
    G = spec.G
    if window.metric != "euclidean" or np.count_nonzero(G - np.diag(np.diag(G))):
        raise NotImplementedError("per-cell oracle needs a diagonal generator and a euclidean window")
    half = 0.5 * np.abs(np.diag(G))
    vol = float(np.prod(2 * half))
    out = 1.0
    for p in pp.lattice_points(G, window):
        lo = np.maximum(p - half, window.lo)
        hi = np.minimum(p + half, window.hi)
        if np.any(hi <= lo):
            continue
        t = 1.0 - void_integral(u, window, lo, hi) / vol
        out *= float(spec.replicas.pgf(min(max(t, 0.0), 1.0)))
    return out


# ---------------------------------------------------------------------------
# Campbell means


def campbell_mean(spec, u, window: pp.Window) -> float:
    """``E[sum_x u(x)]`` over points in the window, from the intensity measure."""
    if hasattr(u, "bind"):
        u = u.bind(window)
    if isinstance(spec, pp.Lattice):
        return u.total(spec.draw(window, None))
    if isinstance(spec, pp.MixedBinomial):
        dens = spec.count.mean() / window.volume()
    else:
        dens = spec.density()
    if dens is None:
        raise NotImplementedError(f"no constant intensity for {type(spec).__name__}")
    if dens == 0:
        return 0.0
    return dens * _window_integral(u, u, window)


def campbell_mean_mc(process, u, window: pp.Window, reps: int, seed: int, threads=None) -> Estimate:
    vals = aggregate_mc(process, u, window, reps, seed, threads)
    mean, se = mean_se(vals)
    return Estimate(float(mean), float(se), reps)


# ---------------------------------------------------------------------------
# scalar LT order


def pgf(dist, t):
    """``E[t^N]`` for ``t`` in [0, 1]."""
    return dist.pgf(t)


def lt_order_check(d1, d2, t_grid, labels=("lhs", "rhs")) -> OrderReport:
    """Exact check of ``d1 <=_Lt d2`` via ``pgf(d1, t) >= pgf(d2, t)`` on ``t_grid``."""
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise SpecError("empty t grid")
    a = np.array([float(d1.pgf(t)) for t in t_grid])
    b = np.array([float(d2.pgf(t)) for t in t_grid])
    zero = np.zeros_like(a)
    return OrderReport([f"t={t:g}" for t in t_grid], a, zero, b, zero, lhs_label=labels[0], rhs_label=labels[1])


def lt_order_check_laws(law1, law2, s_grid, labels=("lhs", "rhs")) -> OrderReport:
    """Exact check of ``law1 <=_Lt law2`` for continuous laws via their Laplace transforms."""
    s_grid = [float(s) for s in s_grid]
    if not s_grid:
        raise SpecError("empty s grid")
    a = np.array([float(law1.laplace(s)) for s in s_grid])
    b = np.array([float(law2.laplace(s)) for s in s_grid])
    zero = np.zeros_like(a)
    return OrderReport([f"s={s:g}" for s in s_grid], a, zero, b, zero, lhs_label=labels[0], rhs_label=labels[1])


def lf_order_check(
    spec1,
    spec2,
    family,
    window: pp.Window,
    reps: int,
    seed: int,
    z: float = DEFAULT_Z,
    threads=None,
    labels=("lhs", "rhs"),
) -> OrderReport:
    """Empirical check of ``spec1 <=_Lf spec2``: ``L1(u) >= L2(u)`` for each ``u`` in ``family``."""
    if not family:
        raise SpecError("empty test-function family")
    e1 = lf_mc_family(spec1, family, window, reps, seed, threads)
    e2 = lf_mc_family(spec2, family, window, reps, seed, threads)
    return OrderReport(
        [u.describe() for u in family],
        [e.mean for e in e1],
        [e.std_error for e in e1],
        [e.mean for e in e2],
        [e.std_error for e in e2],
        z=z,
        lhs_label=labels[0],
        rhs_label=labels[1],
    )
