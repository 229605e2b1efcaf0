"""Downlink cellular model: nearest-BS association, SINR, total-cell coverage
and spatial coverage.

Total-cell coverage looks at the typical cell: one BS is pinned at the window
center and its Voronoi cell collects the users that associate with it. Two
estimators are returned side by side:

* ``indicator``: ``1{every user in the cell has SINR >= T}`` with fresh
  signal fading draws (any signal law);
* ``conditional``: ``exp(-sum_x T (noise + I(x)) / g(r_x))``, the signal
  fading integrated out in closed form. Lower variance; defined for
  exponential(1) signal fading only and reported as NaN otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial import cKDTree

from . import ops
from . import pointproc as pp
from .errors import SingularPathLossError, SpecError
from .laws import Constant, Exponential, ScalarLaw
from .ordering import Estimate
from .rng import generator, mean_se, replicate_indexed

SINGULAR_RADIUS = 1e-6
_CHUNK = 4096


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


def _positive(law):
    if isinstance(law, Constant) and law.value <= 0:
        raise ValueError("fading law must be supported on positive reals")
    return law


class PathLoss(_Frozen):
    """``g(r) = 1 / (a + b r^delta)``."""

    a: Literal[0, 1] = 1
    b: float = Field(1.0, gt=0)
    delta: float = Field(4.0, gt=0)

    def check_dim(self, dim: int) -> "PathLoss":
        if self.delta <= dim:
            raise SpecError(f"path-loss exponent {self.delta} must exceed the dimension {dim}")
        return self

    def g(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.a == 0 and np.any(r < SINGULAR_RADIUS):
            raise SingularPathLossError(
                f"singular path loss evaluated within {SINGULAR_RADIUS:g} of a transmitter"
            )
        return 1.0 / (self.a + self.b * r**self.delta)


class FadingModel(_Frozen):
    signal: ScalarLaw = Exponential()
    interference: ScalarLaw = Exponential()

    @model_validator(mode="after")
    def _check(self):
        _positive(self.signal)
        _positive(self.interference)
        return self

    @property
    def rayleigh_signal(self) -> bool:
        return isinstance(self.signal, Exponential) and self.signal.scale == 1.0


class NetworkConfig(_Frozen):
    bs_spec: ops.Process
    ms_spec: ops.Process
    window: pp.Window
    pathloss: PathLoss = PathLoss()
    fading: FadingModel = FadingModel()
    noise: float = Field(5e-5, ge=0)

    @model_validator(mode="after")
    def _check(self):
        self.pathloss.check_dim(self.window.dim)
        return self


class RadiusModel(_Frozen):
    """Random coverage footprint around each BS.

    ``ball`` has radius ``R``. ``square`` (half-side ``R``) and ``ellipse``
    (semi-axes ``R * aspect`` and ``R / aspect``) are planar and get a
    uniform random orientation per BS.
    """

    law: ScalarLaw
    footprint: Literal["ball", "square", "ellipse"] = "ball"
    aspect: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if isinstance(self.law, Constant) and self.law.value <= 0:
            raise ValueError("coverage radius must be positive")
        return self

    def covers(self, disp: np.ndarray, rng) -> np.ndarray:
        """Boolean ``(probes, n)``: does BS ``j`` cover probe ``i`` given
        displacements ``disp[i, j] = probe_i - bs_j``? Radii and orientations
        are drawn once per BS and shared across probes."""
        n = disp.shape[1]
        radius = self.law.sample(rng, n)
        if self.footprint == "ball":
            return np.linalg.norm(disp, axis=-1) <= radius
        if disp.shape[-1] != 2:
            raise SpecError(f"{self.footprint} footprints are planar")
        theta = rng.uniform(0.0, 2 * np.pi, n)
        c, s = np.cos(theta), np.sin(theta)
        u = c * disp[..., 0] + s * disp[..., 1]
        v = -s * disp[..., 0] + c * disp[..., 1]
        if self.footprint == "square":
            return np.maximum(np.abs(u), np.abs(v)) <= radius
        return (u / (radius * self.aspect)) ** 2 + (v * self.aspect / radius) ** 2 <= 1.0


# ---------------------------------------------------------------------------
# link-level quantities


def _points(obj) -> np.ndarray:
    return obj.points if isinstance(obj, pp.PointPattern) else np.asarray(obj, dtype=float)


def _nearest(users: np.ndarray, bss: np.ndarray, window: pp.Window | None) -> np.ndarray:
    out = np.empty(len(users), dtype=np.intp)
    for lo in range(0, len(users), _CHUNK):
        chunk = users[lo : lo + _CHUNK]
        if window is None:
            d2 = np.sum((chunk[:, None, :] - bss[None, :, :]) ** 2, axis=-1)
        else:
            d2 = np.sum(window.displacement(chunk[:, None, :], bss[None, :, :]) ** 2, axis=-1)
        out[lo : lo + _CHUNK] = np.argmin(d2, axis=1)  # first minimum: lowest index wins ties
    return out


def associate_nearest(users, bss) -> np.ndarray:
    """Index of the closest BS for every user, under the BS window's metric."""
    b = _points(bss)
    if len(b) == 0:
        raise SpecError("cannot associate users with an empty BS set")
    window = bss.window if isinstance(bss, pp.PointPattern) else None
    return _nearest(_points(users).reshape(-1, b.shape[1]), b, window)


def interference_at(x, bss, serving: int, fading_draws, pathloss: PathLoss) -> float:
    """``sum_{y != serving} h_I(y) g(|y - x|)``."""
    b = _points(bss)
    h = np.asarray(fading_draws, dtype=float)
    if h.shape != (len(b),):
        raise SpecError("need one fading draw per BS")
    x = np.asarray(x, dtype=float)
    if isinstance(bss, pp.PointPattern):
        r = bss.window.distance(x, b)
    else:
        r = np.linalg.norm(b - x, axis=-1)
    keep = np.arange(len(b)) != serving
    return float(np.sum(h[keep] * pathloss.g(r[keep])))


def sinr(r, h_s, interference, noise: float, pathloss: PathLoss):
    """``h_S g(r) / (noise + I)``."""
    denom = noise + np.asarray(interference, dtype=float)
    if np.any(denom <= 0):
        raise SpecError("noise plus interference must be positive")
    return np.asarray(h_s, dtype=float) * pathloss.g(r) / denom


# ---------------------------------------------------------------------------
# total-cell coverage


@dataclass
class CoverageCurve:
    thresholds: np.ndarray
    indicator: list[Estimate]
    conditional: list[Estimate]
    label: str = ""

    def rows(self):
        for t, a, b in zip(self.thresholds, self.indicator, self.conditional):
            yield float(t), "indicator", a.mean, a.std_error
            yield float(t), "conditional", b.mean, b.std_error


def _in_typical_cell(users: np.ndarray, others: np.ndarray, window: pp.Window) -> np.ndarray:
    """Users at least as close to the window center as to any BS in ``others``
    (ties go to the center BS, matching the lowest-index rule)."""
    d0 = window.distance(users, window.center)
    if len(others) == 0:
        return np.ones(len(users), dtype=bool)
    if window.metric == "toroidal":
        tree = cKDTree(others - window.lo, boxsize=window.widths)
        d1, _ = tree.query(users - window.lo)
    else:
        d1, _ = cKDTree(others).query(users)
    return d0 <= d1


def _cell_draw(config: NetworkConfig, rng_bs, rng_ms):
    w = config.window
    others = config.bs_spec.draw(w, rng_bs)
    bs = np.concatenate([w.center[None, :], others], axis=0)
    ms = config.ms_spec.draw(w, rng_ms)
    if len(ms) == 0:
        return bs, ms
    return bs, ms[_in_typical_cell(ms, others, w)]


def _cell_interference(config: NetworkConfig, bs, users, rng):
    """Serving distance and interference for each user of the typical cell."""
    w = config.window
    disp = w.displacement(users[:, None, :], bs[None, :, :])
    dist = np.linalg.norm(disp, axis=-1)
    h = config.fading.interference.sample(rng, (len(users), len(bs) - 1))
    interference = np.sum(h * config.pathloss.g(dist[:, 1:]), axis=1)
    return dist[:, 0], interference


def total_cell_coverage(
    config: NetworkConfig, thresholds, reps: int, seed: int, threads=None, label: str = ""
) -> CoverageCurve:
    """Probability that every user of the typical cell has SINR >= T.

    The BS layout of replication ``r`` depends only on ``(seed, bs_spec, r)``,
    so configurations that differ only in the user process see the same BS
    realizations.
    """
    T = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if np.any(T <= 0):
        raise SpecError("thresholds must be positive")
    if reps < 2:
        raise SpecError("need at least 2 replications")
    # the closed form integrates out exponential(1) signal fading only
    rayleigh = config.fading.rayleigh_signal
    bs_key = pp.spec_id(config.bs_spec)
    ms_key = pp.spec_id(config.ms_spec)
    k = len(T)

    def one(r):
        bs, users = _cell_draw(
            config,
            generator(seed, "coverage", "bs", bs_key, r),
            generator(seed, "coverage", "ms", ms_key, r),
        )
        if len(users) == 0:
            return np.ones(2 * k)
        rng = generator(seed, "coverage", "fading", bs_key, ms_key, r)
        r0, interference = _cell_interference(config, bs, users, rng)
        g0 = config.pathloss.g(r0)
        load = (config.noise + interference) / g0
        h_s = config.fading.signal.sample(rng, len(users))
        s = h_s * g0 / (config.noise + interference)
        ind = (s.min() >= T).astype(float)
        cond = np.exp(-T * load.sum()) if rayleigh else np.full(k, np.nan)
        return np.concatenate([ind, cond])

    vals = replicate_indexed(one, reps, threads=threads, width=2 * k)
    mean, se = mean_se(vals)
    est = [Estimate(float(m), float(e), reps) for m, e in zip(mean, se)]
    return CoverageCurve(T, est[:k], est[k:], label)


# ---------------------------------------------------------------------------
# spatial coverage


@dataclass
class SpatialCoverage:
    t_grid: np.ndarray
    pgf: list[Estimate]
    p_covered: Estimate
    label: str = ""

    def rows(self):
        yield "p_covered", float("nan"), self.p_covered.mean, self.p_covered.std_error
        for t, e in zip(self.t_grid, self.pgf):
            yield "pgf", float(t), e.mean, e.std_error


def spatial_coverage(
    bs_spec,
    radius: RadiusModel,
    window: pp.Window,
    reps: int,
    seed: int,
    probes=None,
    t_grid=(0.0, 0.25, 0.5, 0.75),
    threads=None,
    label: str = "",
) -> SpatialCoverage:
    """``G(t) = E[t^S(y)]`` and ``1 - G(0)`` for the number ``S(y)`` of BSs
    whose footprint covers probe ``y`` (default: the window center).

    With several probes, each replication contributes the probe average.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise SpecError("pgf arguments must lie in [0, 1]")
    if reps < 2:
        raise SpecError("need at least 2 replications")
    y = window.center[None, :] if probes is None else np.asarray(probes, dtype=float).reshape(-1, window.dim)
    key = pp.spec_id(bs_spec)
    k = len(t)

    def one(r):
        rng = generator(seed, "spatial", key, r)
        bs = bs_spec.draw(window, rng)
        if len(bs) == 0:
            s = np.zeros(len(y))
        else:
            disp = window.displacement(bs[None, :, :], y[:, None, :])
            s = radius.covers(disp, rng).sum(axis=1).astype(float)
        # 0 ** 0 == 1 as required for G(0) = P(S = 0)
        return np.concatenate([np.mean(t[:, None] ** s[None, :], axis=1), [np.mean(s > 0)]])

    vals = replicate_indexed(one, reps, threads=threads, width=k + 1)
    mean, se = mean_se(vals)
    est = [Estimate(float(m), float(e), reps) for m, e in zip(mean, se)]
    return SpatialCoverage(t, est[:k], est[k], label)
