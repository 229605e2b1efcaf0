"""Experiment manifests: one JSON document per run, fully self-describing.

Loading a manifest fills in every default, and the resolved form is what a
run writes next to its outputs, so re-running that file reproduces the run.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import ops
from . import pointproc as pp
from .cognet import CognitiveConfig, SelectionScheme
from .netsim import FadingModel, PathLoss, RadiusModel
from .ordering import ExpDecay, IndicatorScaled, MarkScaled, PathlossShaped, default_family

TestFunctionSpec = Annotated[
    Union[IndicatorScaled, ExpDecay, PathlossShaped, MarkScaled], Field(discriminator="kind")
]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Labeled(_Frozen):
    label: str
    spec: ops.Process


class LabeledCount(_Frozen):
    label: str
    dist: pp.CountDistribution


def _unique(labels):
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be unique")


class GenerateRecipe(_Frozen):
    kind: Literal["generate"] = "generate"
    spec: ops.Process = pp.StationaryPoisson(intensity=1.0)
    window: pp.Window = pp.Window.square(10.0)
    max_points: int = Field(pp.DEFAULT_MAX_POINTS, ge=1)


class LfRecipe(_Frozen):
    """Laplace functionals of each process, plus order reports for ``pairs``
    (indices into ``processes``; the first member is claimed LF-smaller)."""

    kind: Literal["lf"] = "lf"
    processes: tuple[Labeled, ...] = (
        Labeled(label="mpp", spec=pp.MixedPoisson.two_point(1.0)),
        Labeled(label="ppp", spec=pp.StationaryPoisson(intensity=1.0)),
    )
    family: tuple[TestFunctionSpec, ...] = tuple(default_family())
    window: pp.Window = pp.Window.square(3.0, centered=True)
    pairs: tuple[tuple[int, int], ...] = ((0, 1),)
    z: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        _unique(p.label for p in self.processes)
        if not self.family:
            raise ValueError("family must not be empty")
        n = len(self.processes)
        if any(not (0 <= i < n and 0 <= j < n) for i, j in self.pairs):
            raise ValueError("pair index out of range")
        return self


class LtOrderRecipe(_Frozen):
    """Exact PGF table; ``distributions`` are listed from LT-smallest claimed."""

    kind: Literal["ltorder"] = "ltorder"
    distributions: tuple[LabeledCount, ...] = (
        LabeledCount(label="negative_binomial", dist=pp.NegativeBinomial(r=5.0, p=0.5)),
        LabeledCount(label="poisson", dist=pp.Poisson(mu=5.0)),
        LabeledCount(label="binomial", dist=pp.Binomial(L=50, p=0.1)),
    )
    t_grid: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(11))

    @model_validator(mode="after")
    def _check(self):
        _unique(d.label for d in self.distributions)
        if not self.t_grid or any(not 0 <= t <= 1 for t in self.t_grid):
            raise ValueError("t_grid must be non-empty and inside [0, 1]")
        return self


class CoverageRecipe(_Frozen):
    """Total-cell coverage for each user process against one BS process."""

    kind: Literal["coverage"] = "coverage"
    bs_spec: ops.Process = pp.StationaryPoisson(intensity=0.1)
    users: tuple[Labeled, ...] = (
        Labeled(label="mpp", spec=pp.MixedPoisson.two_point(1.0)),
        Labeled(label="ppp", spec=pp.StationaryPoisson(intensity=1.0)),
    )
    window: pp.Window = pp.Window.square(30.0, centered=True, metric="toroidal")
    pathloss: PathLoss = PathLoss()
    fading: FadingModel = FadingModel()
    noise: float = Field(5e-5, ge=0)
    thresholds_db: tuple[float, ...] = (-10.0, -7.0, -4.0, -1.0, 2.0, 5.0, 8.0, 11.0)

    @model_validator(mode="after")
    def _check(self):
        _unique(u.label for u in self.users)
        if not self.thresholds_db:
            raise ValueError("thresholds_db must not be empty")
        return self


class SpatialRecipe(_Frozen):
    kind: Literal["spatial"] = "spatial"
    bs: tuple[Labeled, ...] = (
        Labeled(label="mpp", spec=pp.MixedPoisson.two_point(0.1)),
        Labeled(label="ppp", spec=pp.StationaryPoisson(intensity=0.1)),
    )
    radius: RadiusModel = RadiusModel(law={"kind": "constant", "value": 2.0})
    window: pp.Window = pp.Window.square(20.0, centered=True, metric="toroidal")
    probes: tuple[tuple[float, ...], ...] | None = None
    t_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)

    @model_validator(mode="after")
    def _check(self):
        _unique(b.label for b in self.bs)
        return self


class CognitiveRecipe(_Frozen):
    """Schemes are listed from LT-smallest claimed; reports compare neighbours."""

    kind: Literal["cognitive"] = "cognitive"
    config: CognitiveConfig = CognitiveConfig()
    schemes: tuple[SelectionScheme, ...] = tuple(
        SelectionScheme(kind=k, L=50, mu=5.0)
        for k in ("two_point_extreme", "negative_binomial", "poisson", "bernoulli", "fixed")
    )
    sir_db: tuple[float, ...] = tuple(-5.0 + 3.0 * i for i in range(12))
    s_grid: tuple[float, ...] = (0.1, 1.0, 10.0)

    @model_validator(mode="after")
    def _check(self):
        _unique(s.kind for s in self.schemes)
        return self


Recipe = Annotated[
    Union[GenerateRecipe, LfRecipe, LtOrderRecipe, CoverageRecipe, SpatialRecipe, CognitiveRecipe],
    Field(discriminator="kind"),
]

DEFAULT_REPS = {
    "generate": 1,
    "lf": 10_000,
    "ltorder": 1,
    "coverage": 20_000,
    "spatial": 20_000,
    "cognitive": 100_000,
}

RECIPES = {
    "generate": GenerateRecipe,
    "lf": LfRecipe,
    "ltorder": LtOrderRecipe,
    "coverage": CoverageRecipe,
    "spatial": SpatialRecipe,
    "cognitive": CognitiveRecipe,
}


class ExperimentManifest(_Frozen):
    name: str
    seed: int = Field(20240101, ge=0, lt=2**64)
    reps: int = Field(ge=2)
    out: str = "out"
    recipe: Recipe

    @classmethod
    def default(cls, kind: str) -> "ExperimentManifest":
        return cls(name=kind, reps=max(2, DEFAULT_REPS[kind]), recipe=RECIPES[kind]())


def load(path) -> ExperimentManifest:
    """Parse and validate; raises ``json.JSONDecodeError`` or pydantic's
    ``ValidationError``, both of which carry a location."""
    return ExperimentManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))


def dumps(manifest: ExperimentManifest) -> str:
    return json.dumps(manifest.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True) + "\n"


def save(manifest: ExperimentManifest, path) -> None:
    Path(path).write_text(dumps(manifest), encoding="utf-8", newline="\n")
