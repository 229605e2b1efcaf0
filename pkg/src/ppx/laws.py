"""Scalar random laws and deterministic location functions.

These are the small building blocks shared by marks, fading, coverage radii,
Cox cell intensities and thinning fields. Each law serializes to JSON with a
``kind`` discriminator.
"""

from __future__ import annotations

import math
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from scipy import special, stats


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Constant(_Frozen):
    kind: Literal["constant"] = "constant"
    value: float = Field(ge=0)

    def sample(self, rng, size):
        return np.full(size, self.value, dtype=float)

    def mean(self) -> float:
        return self.value

    def laplace(self, s):
        return np.exp(-np.asarray(s, dtype=float) * self.value)


class Exponential(_Frozen):
    kind: Literal["exponential"] = "exponential"
    scale: float = Field(1.0, gt=0)

    def sample(self, rng, size):
        return rng.exponential(self.scale, size)

    def mean(self) -> float:
        return self.scale

    def laplace(self, s):
        return 1.0 / (1.0 + self.scale * np.asarray(s, dtype=float))


class Gamma(_Frozen):
    kind: Literal["gamma"] = "gamma"
    shape: float = Field(gt=0)
    scale: float = Field(gt=0)

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    def mean(self) -> float:
        return self.shape * self.scale

    def laplace(self, s):
        return (1.0 + self.scale * np.asarray(s, dtype=float)) ** (-self.shape)


class Uniform(_Frozen):
    kind: Literal["uniform"] = "uniform"
    low: float = Field(ge=0)
    high: float

    @model_validator(mode="after")
    def _check(self):
        if not self.high > self.low:
            raise ValueError("uniform law needs high > low")
        return self

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)

    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def laplace(self, s):
        s = np.asarray(s, dtype=float)
        w = self.high - self.low
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.exp(-s * self.low) * -np.expm1(-s * w) / (s * w)
        return np.where(s == 0, 1.0, val)


class Table(_Frozen):
    """Finite-support law: ``P{values[k]} = weights[k]``."""

    kind: Literal["table"] = "table"
    values: tuple[float, ...]
    weights: tuple[float, ...]

    @model_validator(mode="after")
    def _check(self):
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("table law needs equal-length, non-empty values and weights")
        if any(v < 0 for v in self.values) or any(w < 0 for w in self.weights):
            raise ValueError("table law values and weights must be non-negative")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("table law weights must sum to 1")
        return self

    def sample(self, rng, size):
        idx = rng.choice(len(self.values), size=size, p=np.asarray(self.weights))
        return np.asarray(self.values, dtype=float)[idx]

    def mean(self) -> float:
        return math.fsum(v * w for v, w in zip(self.values, self.weights))

    def laplace(self, s):
        s = np.asarray(s, dtype=float)
        return sum(w * np.exp(-s * v) for v, w in zip(self.values, self.weights))


class Beta(_Frozen):
    kind: Literal["beta"] = "beta"
    a: float = Field(gt=0)
    b: float = Field(gt=0)

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size)

    def mean(self) -> float:
        return self.a / (self.a + self.b)

    def laplace(self, s):
        # Kummer's M(a, a+b, -s)
        return special.hyp1f1(self.a, self.a + self.b, -np.asarray(s, dtype=float))


class LogNormal(_Frozen):
    kind: Literal["lognormal"] = "lognormal"
    mu: float = 0.0
    sigma: float = Field(gt=0)

    def sample(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)

    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def laplace(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        dist = stats.lognorm(self.sigma, scale=math.exp(self.mu))
        out = [dist.expect(lambda x, si=si: math.exp(-si * x)) for si in s.ravel()]
        return np.asarray(out).reshape(s.shape)


ScalarLaw = Annotated[
    Union[Constant, Exponential, Gamma, Uniform, Table, Beta, LogNormal],
    Field(discriminator="kind"),
]
scalar_law_adapter = TypeAdapter(ScalarLaw)


# ---------------------------------------------------------------------------
# deterministic location functions x -> value


class ConstantFn(_Frozen):
    kind: Literal["constant"] = "constant"
    value: float = 1.0

    def __call__(self, x):
        return np.full(len(x), self.value)


class RadialExp(_Frozen):
    """``exp(-||x - center|| / scale)``."""

    kind: Literal["radial_exp"] = "radial_exp"
    scale: float = Field(gt=0)
    center: tuple[float, ...] | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        c = 0.0 if self.center is None else np.asarray(self.center)
        return np.exp(-np.linalg.norm(x - c, axis=1) / self.scale)


class Linear(_Frozen):
    """``clip(intercept + slope * x[axis], 0, upper)``."""

    kind: Literal["linear"] = "linear"
    intercept: float = 0.5
    slope: float = 0.0
    axis: int = Field(0, ge=0)
    upper: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(self.intercept + self.slope * x[:, self.axis], 0.0, self.upper)


class Disc(_Frozen):
    kind: Literal["disc"] = "disc"
    radius: float = Field(gt=0)
    inside: float = 1.0
    outside: float = 0.0
    center: tuple[float, ...] | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        c = 0.0 if self.center is None else np.asarray(self.center)
        return np.where(np.linalg.norm(x - c, axis=1) <= self.radius, self.inside, self.outside)


LocationFn = Annotated[Union[ConstantFn, RadialExp, Linear, Disc], Field(discriminator="kind")]
