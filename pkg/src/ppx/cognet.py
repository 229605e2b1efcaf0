"""Underlay cognitive radio: randomized secondary-user (SU) selection.

A base station picks ``N`` active SUs out of ``L``; the active set is a
mixed binomial process on the region ``B``. Schemes with the same mean
``mu`` give the same mean interference at the primary user (PU) and the same
mean SU sum rate, while the LT order of ``N`` orders the interference
distribution and hence every completely monotone PU metric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import pointproc as pp
from .errors import SpecError
from .laws import Exponential, ScalarLaw
from .netsim import FadingModel, PathLoss
from .ordering import Estimate, OrderReport
from .quadrature import integrate
from .rng import generator, mean_se, replicate

DEFAULT_GUARD = 0.1
_MAX_REDRAWS = 10_000


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SelectionScheme(_Frozen):
    """How many of the ``L`` SUs are active; the mean is ``mu`` exactly.

    ``bernoulli`` selects each SU with probability ``mu / L``;
    ``negative_binomial`` fixes ``p`` and solves ``r = mu p / (1 - p)``;
    ``two_point_extreme`` is ``N in {0, 2 mu}`` with probability one half each.
    """

    kind: Literal["bernoulli", "negative_binomial", "poisson", "two_point_extreme", "fixed"]
    L: int = Field(ge=1)
    mu: float = Field(gt=0)
    p: float = Field(0.5, gt=0, lt=1)

    @model_validator(mode="after")
    def _check(self):
        if self.mu > self.L:
            raise ValueError(f"mean {self.mu} exceeds the {self.L} available SUs")
        if self.kind == "fixed" and self.mu != int(self.mu):
            raise ValueError("fixed selection needs an integer mean")
        if self.kind == "two_point_extreme":
            if 2 * self.mu != int(2 * self.mu):
                raise ValueError("two-point selection needs 2 * mu integer")
            if 2 * self.mu > self.L:
                raise ValueError("two-point selection needs 2 * mu <= L")
        return self

    @property
    def label(self) -> str:
        return self.kind

    def distribution(self):
        """Untruncated count law."""
        if self.kind == "bernoulli":
            return pp.Binomial(L=self.L, p=self.mu / self.L)
        if self.kind == "negative_binomial":
            return pp.NegativeBinomial(r=self.mu * self.p / (1 - self.p), p=self.p)
        if self.kind == "poisson":
            return pp.Poisson(mu=self.mu)
        if self.kind == "two_point_extreme":
            return pp.TwoPoint(v0=0, v1=int(2 * self.mu), q=0.5)
        return pp.Fixed(n=int(self.mu))

    def truncation_probability(self) -> float:
        """``P(N > L)``: the mass removed by redrawing."""
        return float(self.distribution().sf(self.L))

    def truncated_mean(self) -> float:
        d = self.distribution()
        k = np.arange(self.L + 1)
        pmf = d.pmf(k)
        return float(math.fsum(k * pmf) / math.fsum(pmf))

    def sample_count(self, rng) -> int:
        d = self.distribution()
        for _ in range(_MAX_REDRAWS):
            n = int(d.sample(rng))
            if n <= self.L:
                return n
        raise SpecError(f"{self.kind} selection keeps exceeding L={self.L}")

    def process(self) -> pp.MixedBinomial:
        """The active-SU process, with the count law truncated to ``N <= L``."""
        d = self.distribution()
        if self.truncation_probability() == 0.0:
            return pp.MixedBinomial(count=d)
        pmf = d.pmf(np.arange(self.L + 1))
        pmf = pmf / math.fsum(pmf)
        pmf[-1] = 1.0 - math.fsum(pmf[:-1])
        return pp.MixedBinomial(count=pp.Empirical(pmf=tuple(float(v) for v in pmf)))


class CognitiveConfig(_Frozen):
    region: pp.Window = pp.Window.square(10.0, centered=True)
    pu: tuple[float, ...] = (0.0, 0.0)
    z: tuple[float, ...] = (2.5, 0.0)
    pathloss: PathLoss = PathLoss()
    fading: FadingModel = FadingModel()
    pu_fading: ScalarLaw = Exponential()
    noise: float = Field(5e-5, ge=0)
    gamma_i: float = Field(1.0, gt=0)
    guard: float | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _check(self):
        d = self.region.dim
        self.pathloss.check_dim(d)
        if len(self.pu) != d or len(self.z) != d:
            raise ValueError("pu and z must match the region dimension")
        if self.pathloss.a == 0 and self.guard_radius == 0:
            raise ValueError("singular path loss needs a positive guard radius around the PU")
        return self

    @property
    def guard_radius(self) -> float:
        """SUs are never placed within this distance of the PU."""
        if self.guard is not None:
            return self.guard
        return DEFAULT_GUARD if self.pathloss.a == 0 else 0.0


def _draw_sus(scheme: SelectionScheme, config: CognitiveConfig, rng) -> np.ndarray:
    n = scheme.sample_count(rng)
    pts = config.region.draw_uniform(rng, n)
    rho = config.guard_radius
    if rho > 0:
        pu = np.asarray(config.pu)
        bad = np.linalg.norm(pts - pu, axis=1) < rho
        while np.any(bad):
            pts[bad] = config.region.draw_uniform(rng, int(bad.sum()))
            bad = np.linalg.norm(pts - pu, axis=1) < rho
    return pts


# ---------------------------------------------------------------------------
# single-shot quantities


def select(scheme: SelectionScheme, window: pp.Window, seed: int) -> pp.PointPattern:
    """Active SUs: ``N`` from the scheme, placed uniformly in ``window``."""
    rng = generator(seed)
    pts = window.draw_uniform(rng, scheme.sample_count(rng))
    return pp.PointPattern(pts, window, seed=int(seed), spec_id=pp.spec_id(scheme.process()))


def _interference(pts, pu, h, pathloss):
    if len(pts) == 0:
        return 0.0
    return float(np.sum(h * pathloss.g(np.linalg.norm(pts - np.asarray(pu, dtype=float), axis=1))))


def _rate(pts, z, pu, h_s, h_i, pathloss, noise):
    if len(pts) == 0:
        return 0.0
    signal = h_s * pathloss.g(np.linalg.norm(pts - np.asarray(z, dtype=float), axis=1))
    denom = noise + h_i * pathloss.g(np.linalg.norm(pts - np.asarray(pu, dtype=float), axis=1))
    if np.any(denom <= 0):
        raise SpecError("noise plus PU interference must be positive")
    return float(np.sum(np.log1p(signal / denom)))


def aggregate_interference(sus, pu, fading: FadingModel, pathloss: PathLoss, seed: int) -> float:
    """``sum_x h_I(x) g(|x - pu|)`` with fresh fading."""
    pts = sus.points if isinstance(sus, pp.PointPattern) else np.asarray(sus, dtype=float)
    h = fading.interference.sample(generator(seed), len(pts))
    return _interference(pts, pu, h, pathloss)


def sum_rate(sus, z, pu, fading: FadingModel, pathloss: PathLoss, noise: float, seed: int) -> float:
    """``sum_x log(1 + h_S g(|x - z|) / (noise + h_I g(|x - pu|)))`` in nats."""
    pts = sus.points if isinstance(sus, pp.PointPattern) else np.asarray(sus, dtype=float)
    rng = generator(seed)
    h_s = fading.signal.sample(rng, len(pts))
    h_i = fading.interference.sample(rng, len(pts))
    return _rate(pts, z, pu, h_s, h_i, pathloss, noise)


# ---------------------------------------------------------------------------
# analytic means


def _ball_volume(r: float, d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def mean_path_gain(config: CognitiveConfig) -> float:
    """``(1/|B|) int_B g(|x - pu|) dx`` over the SU placement region."""
    pu = np.asarray(config.pu, dtype=float)
    rho = config.guard_radius
    region = config.region

    def f(x):
        r = np.linalg.norm(x - pu, axis=1)
        out = np.zeros(len(x))
        ok = r >= rho
        out[ok] = config.pathloss.g(r[ok])
        return out

    if rho > 0 and region.dim == 2 and np.all(region.contains(pu[None, :])):
        total = _polar_gain(config, pu, rho)
    else:
        breaks = [[c - rho, c, c + rho] for c in pu]
        # the guard sphere is not a box face, so the jump there limits attainable accuracy
        rtol = 1e-6 if rho > 0 else 1e-8
        total = integrate(f, region.lo, region.hi, breaks=breaks, rtol=rtol)
    area = region.volume() - (_ball_volume(rho, region.dim) if rho > 0 else 0.0)
    return total / area


def _polar_gain(config: CognitiveConfig, pu: np.ndarray, rho: float) -> float:
    """``int g`` over the planar region minus the guard disc, in polar
    coordinates about the PU so the guard circle is a coordinate line."""
    lo, hi = config.region.lo - pu, config.region.hi - pu
    if rho >= np.min(np.abs(np.concatenate([lo, hi]))):
        raise SpecError("guard disc must lie inside the SU region")

    def edge(theta):
        # distance from the PU to the boundary along direction theta
        c, s = np.cos(theta), np.sin(theta)
        with np.errstate(divide="ignore"):
            tx = np.where(c > 0, hi[0] / c, np.where(c < 0, lo[0] / c, np.inf))
            ty = np.where(s > 0, hi[1] / s, np.where(s < 0, lo[1] / s, np.inf))
        return np.minimum(tx, ty)

    def f(x):
        theta, u = x[:, 0], x[:, 1]
        outer = edge(theta)
        r = rho + u * (outer - rho)
        return config.pathloss.g(r) * r * (outer - rho)

    corners = np.mod(np.arctan2([lo[1], lo[1], hi[1], hi[1]], [lo[0], hi[0], lo[0], hi[0]]), 2 * np.pi)
    return integrate(f, [0.0, 0.0], [2 * np.pi, 1.0], breaks=[sorted(corners), None])


def mean_interference(mu: float, config: CognitiveConfig) -> float:
    """``E[I_SU] = mu * mean path gain * E[h_I]``, for any count law with mean ``mu``."""
    return mu * mean_path_gain(config) * config.fading.interference.mean()


def solve_mu(config: CognitiveConfig) -> float:
    """Largest mean active count meeting ``E[I_SU] <= gamma_i``."""
    return config.gamma_i / (mean_path_gain(config) * config.fading.interference.mean())


# ---------------------------------------------------------------------------
# studies


def scheme_id(scheme: SelectionScheme) -> str:
    return json.dumps(scheme.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


@dataclass
class SchemeResult:
    scheme: SelectionScheme
    interference: Estimate
    rate: Estimate
    ccdf: list[Estimate]
    laplace: list[Estimate]
    truncation: float


@dataclass
class CognitiveStudy:
    sir_grid: np.ndarray
    s_grid: np.ndarray
    results: list[SchemeResult]
    analytic_interference: dict[str, float]
    reports: dict[tuple[str, str], OrderReport] = field(default_factory=dict)


def _simulate(scheme, config, sir_grid, s_grid, reps, seed, threads):
    k, m = len(sir_grid), len(s_grid)

    def one(rng):
        pts = _draw_sus(scheme, config, rng)
        n = len(pts)
        h_i = config.fading.interference.sample(rng, n)
        h_s = config.fading.signal.sample(rng, n)
        h_pu = float(config.pu_fading.sample(rng, 1)[0])
        i_su = _interference(pts, config.pu, h_i, config.pathloss)
        # reciprocal channel: the SU-PU link fades identically in both directions
        c_su = _rate(pts, config.z, config.pu, h_s, h_i, config.pathloss, config.noise)
        with np.errstate(divide="ignore"):
            sir = h_pu / i_su if i_su > 0 else np.inf
        return np.concatenate([[i_su, c_su], (sir > sir_grid).astype(float), np.exp(-s_grid * i_su)])

    vals = replicate(one, reps, seed, "cognitive", scheme_id(scheme), threads=threads, width=2 + k + m)
    mean, se = mean_se(vals)
    est = [Estimate(float(a), float(b), reps) for a, b in zip(mean, se)]
    return SchemeResult(scheme, est[0], est[1], est[2 : 2 + k], est[2 + k :], scheme.truncation_probability())


def pu_sir_study(
    schemes,
    config: CognitiveConfig,
    reps: int,
    seed: int,
    sir_grid=None,
    s_grid=(0.1, 1.0, 10.0),
    threads=None,
) -> CognitiveStudy:
    """Per-scheme PU SIR CCDFs, interference Laplace transforms, mean
    interference and mean SU sum rate, with pairwise order reports.

    ``reports[(a, b)]`` compares the SIR CCDF of scheme ``a`` against ``b``
    (``a >= b`` is the claim) for every ordered pair in the given order.
    """
    schemes = list(schemes)
    if not schemes:
        raise SpecError("no selection schemes given")
    if reps < 2:
        raise SpecError("need at least 2 replications")
    sir_grid = np.asarray(default_sir_grid() if sir_grid is None else sir_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    results = [_simulate(s, config, sir_grid, s_grid, reps, seed, threads) for s in schemes]
    study = CognitiveStudy(
        sir_grid,
        s_grid,
        results,
        {s.label: mean_interference(s.mu, config) for s in schemes},
    )
    grid = [f"sir={v:.6g}" for v in sir_grid]
    for a, b in combinations(results, 2):
        study.reports[(a.scheme.label, b.scheme.label)] = OrderReport(
            grid,
            [e.mean for e in a.ccdf],
            [e.std_error for e in a.ccdf],
            [e.mean for e in b.ccdf],
            [e.std_error for e in b.ccdf],
            lhs_label=a.scheme.label,
            rhs_label=b.scheme.label,
        )
    return study


def default_sir_grid() -> np.ndarray:
    """Twelve SIR points from -5 dB to 28 dB."""
    return 10.0 ** (np.linspace(-5.0, 28.0, 12) / 10.0)
