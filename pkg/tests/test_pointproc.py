import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError
from scipy import stats

from ppx import pointproc as pp
from ppx.errors import CapExceededError, SpecError
from ppx.rng import generator

UNIT = pp.Window()
COUNTS = [
    pp.Fixed(n=3),
    pp.Binomial(L=50, p=0.1),
    pp.Poisson(mu=5.0),
    pp.NegativeBinomial(r=5.0, p=0.5),
    pp.TwoPoint(v0=0, v1=2, q=0.5),
    pp.Empirical(pmf=(0.2, 0.5, 0.3)),
]


# --- window -----------------------------------------------------------------


def test_window_validation():
    with pytest.raises(ValidationError):
        pp.Window(lower=(0, 0), upper=(1, 0))
    with pytest.raises(ValidationError):
        pp.Window(lower=(0,) * 4, upper=(1,) * 4)
    assert pp.Window.square(3, dim=3).volume() == 27


def test_toroidal_distance_uses_minimum_image():
    w = pp.Window.square(10, metric="toroidal")
    assert w.distance([0.5, 5], [9.5, 5]) == pytest.approx(1.0)
    assert pp.Window.square(10).distance([0.5, 5], [9.5, 5]) == pytest.approx(9.0)


def test_wrap_lands_inside_half_open_torus():
    w = pp.Window.square(1, metric="toroidal")
    pts = w.wrap(np.array([[1.0, -1e-18], [2.5, -0.25]]))
    assert np.all(w.contains(pts))


# --- count distributions ----------------------------------------------------


@pytest.mark.parametrize("d", COUNTS, ids=lambda d: d.kind)
def test_pmf_sums_to_one_and_matches_mean(d):
    k = np.arange(400)
    pmf = d.pmf(k)
    assert math.fsum(pmf) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(k * pmf) == pytest.approx(d.mean(), rel=1e-12)


@pytest.mark.parametrize("d", COUNTS, ids=lambda d: d.kind)
def test_pgf_normalized_monotone_and_equal_to_pmf_series(d):
    t = np.linspace(0, 1, 41)
    g = np.array([float(d.pgf(x)) for x in t])
    assert g[-1] == pytest.approx(1.0)
    assert np.all(np.diff(g) >= -1e-15)
    assert np.all((g >= 0) & (g <= 1))
    k = np.arange(400)
    series = [math.fsum(d.pmf(k) * x**k) for x in (0.2, 0.5, 0.9)]
    assert [float(d.pgf(x)) for x in (0.2, 0.5, 0.9)] == pytest.approx(series, rel=1e-10)


def test_pgf_spot_values():
    assert float(pp.Binomial(L=50, p=0.1).pgf(0.5)) == pytest.approx(0.95**50)
    assert float(pp.Binomial(L=50, p=0.1).pgf(0.5)) == pytest.approx(0.076945, abs=5e-7)
    assert float(pp.NegativeBinomial(r=5, p=0.5).pgf(0.5)) == pytest.approx((2 / 3) ** 5)
    assert float(pp.Poisson(mu=5).pgf(0.5)) == pytest.approx(math.exp(-2.5))


@given(st.floats(0, 1))
def test_extreme_pair_pgf_dominates(t):
    assert float(pp.TwoPoint(v0=0, v1=2, q=0.5).pgf(t)) == pytest.approx((1 + t * t) / 2)
    assert float(pp.TwoPoint(v0=0, v1=2, q=0.5).pgf(t)) >= float(pp.Fixed(n=1).pgf(t))


@pytest.mark.parametrize("t", [-0.1, 1.5, float("nan")])
def test_pgf_rejects_out_of_range(t):
    with pytest.raises(SpecError):
        pp.Poisson(mu=1).pgf(t)


def test_empirical_pmf_must_sum_to_one():
    with pytest.raises(ValidationError):
        pp.Empirical(pmf=(0.5, 0.4))


@pytest.mark.parametrize("d", COUNTS, ids=lambda d: d.kind)
def test_count_samples_match_mean(d):
    x = d.sample(generator(1, "count"), 20000)
    assert abs(x.mean() - d.mean()) < 4 * max(x.std(), 1e-12) / math.sqrt(len(x)) + 1e-12


# --- specs and serialization ------------------------------------------------


SPECS = [
    pp.StationaryPoisson(intensity=2.0),
    pp.MixedPoisson.two_point(2.0),
    pp.CoxGrid(cells=(3, 3), cell_intensity={"kind": "gamma", "shape": 2.0, "scale": 1.0}),
    pp.MixedBinomial(count=pp.Poisson(mu=5.0)),
    pp.PerturbedLattice(generator=((1, 0), (0, 1)), replicas=pp.Poisson(mu=1.0)),
    pp.PerturbedLattice(generator=((1, 0.5), (0, 0.8)), replicas=pp.Fixed(n=1)),
    pp.Cluster(
        parent=pp.StationaryPoisson(intensity=0.5),
        representative=pp.ClusterSpec(count=pp.Poisson(mu=4.0), offset=pp.Gaussian(sigma=0.2)),
    ),
    pp.Cluster(
        parent=pp.StationaryPoisson(intensity=0.5),
        representative=pp.ClusterSpec(count=pp.Binomial(L=8, p=0.5), offset=pp.UniformBall(radius=0.3)),
    ),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_spec_json_round_trip(spec):
    blob = spec.model_dump_json(by_alias=True)
    again = pp.parse_spec(blob)
    assert again == spec
    assert pp.spec_id(again) == pp.spec_id(spec)


def test_spec_schema_examples():
    assert pp.parse_spec({"kind": "mixed_binomial", "count": {"kind": "poisson", "mu": 5.0}}).mean_count(UNIT) == 5
    with pytest.raises(ValidationError):
        pp.parse_spec({"kind": "stationary_poisson", "intensity": -1})
    with pytest.raises(ValidationError):
        pp.parse_spec({"kind": "lattice", "generator": [[1, 2], [2, 4]]})
    with pytest.raises(ValidationError):
        pp.parse_spec({"kind": "mixed_poisson", "table": [[1.0, 0.4], [2.0, 0.4]]})


def test_intensity_measure_examples():
    assert pp.intensity_measure(pp.StationaryPoisson(intensity=1), UNIT) == 1.0
    assert pp.intensity_measure(pp.MixedBinomial(count=pp.Poisson(mu=5)), pp.Window.square(7)) == 5.0
    w10 = pp.Window(lower=(0, 0), upper=(2, 5))
    mpp = pp.MixedPoisson(table=((0.5, 0.5), (1.5, 0.5)))
    assert pp.intensity_measure(mpp, w10) == pytest.approx(10.0)
    pl = pp.PerturbedLattice(generator=((2, 0), (0, 1)), replicas=pp.Poisson(mu=3))
    assert pp.intensity_measure(pl, pp.Window.square(4)) == pytest.approx(3 * 16 / 2)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_sample_is_deterministic_and_valid(spec):
    w = pp.Window.square(4)
    a = pp.sample(spec, w, 42)
    b = pp.sample(spec, w, 42)
    assert a == b
    assert np.array_equal(a.points, b.points)
    assert np.all(w.contains(a.points))
    assert a.spec_id == pp.spec_id(spec)
    assert not a.points.flags.writeable


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_mean_count_matches_intensity_measure(spec):
    w = pp.Window.square(3)
    reps = 10_000
    counts = np.array([len(spec.draw(w, generator(9, "count", r))) for r in range(reps)])
    target = pp.intensity_measure(spec, w)
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert abs(counts.mean() - target) < 4 * se + 1e-12


def test_ppp_count_example():
    spec = pp.StationaryPoisson(intensity=0.1)
    w = pp.Window.square(50)
    counts = np.array([len(spec.draw(w, generator(3, r))) for r in range(10_000)])
    assert abs(counts.mean() - 250) < 3 * math.sqrt(250) / 100


def test_zero_intensity_gives_empty_pattern():
    assert len(pp.sample(pp.StationaryPoisson(intensity=0), pp.Window.square(5), 1)) == 0


def test_cap_guard():
    with pytest.raises(CapExceededError):
        pp.sample(pp.StationaryPoisson(intensity=1e6), pp.Window.square(100), 1)
    with pytest.raises(CapExceededError):
        pp.sample(pp.StationaryPoisson(intensity=5), pp.Window.square(10), 1, max_points=100)


# --- lattices ---------------------------------------------------------------


def test_lattice_points_examples():
    pts = {tuple(p) for p in pp.lattice_points(np.eye(2), pp.Window.square(3))}
    assert {(float(i), float(j)) for i in range(4) for j in range(4)} <= pts
    pts2 = pp.lattice_points(2 * np.eye(2), pp.Window.square(4))
    interior = {tuple(p) for p in pts2 if np.all((p >= 0) & (p <= 4))}
    assert interior == {(float(i), float(j)) for i in (0, 2, 4) for j in (0, 2, 4)}
    assert (0.0, 0.0) in {tuple(p) for p in pp.lattice_points(np.eye(2), pp.Window.square(0.5))}
    with pytest.raises(SpecError):
        pp.lattice_points(np.array([[1, 1], [1, 1]]), UNIT)


def test_lattice_points_cover_every_cell_meeting_window():
    G = np.array([[1.0, 0.5], [0.0, 0.9]])
    w = pp.Window(lower=(-1.3, 0.2), upper=(2.1, 3.7))
    pts = pp.lattice_points(G, w)
    probes = w.draw_uniform(generator(5), 5000)
    # brute force nearest lattice point over a generous enumeration
    us = np.array([(i, j) for i in range(-10, 11) for j in range(-10, 11)], dtype=float)
    lat = us @ G.T
    nearest = lat[np.argmin(((probes[:, None] - lat[None]) ** 2).sum(-1), axis=1)]
    listed = {tuple(np.round(p, 9)) for p in pts}
    assert all(tuple(np.round(p, 9)) in listed for p in nearest)


def test_toroidal_perturbed_lattice_one_point_per_cell():
    w = pp.Window.square(10, metric="toroidal")
    spec = pp.PerturbedLattice(generator=((1, 0), (0, 1)), replicas=pp.Fixed(n=1))
    pts = pp.sample(spec, w, 7).points
    assert len(pts) == 100
    cells = {tuple(np.mod(np.round(p), 10).astype(int)) for p in pts}
    assert len(cells) == 100


@pytest.mark.parametrize(
    "G", [np.eye(2), np.array([[1.0, 0.5], [0.0, math.sqrt(3) / 2]]), np.array([[2.0, 0.3], [0.1, 0.7]])]
)
def test_voronoi_offsets_are_uniform_in_origin_cell(G):
    off = pp.voronoi_offsets(G, 20000, generator(2))
    us = np.array([(i, j) for i in range(-3, 4) for j in range(-3, 4)], dtype=float)
    lat = us @ G.T
    nearest = np.argmin(((off[:, None] - lat[None]) ** 2).sum(-1), axis=1)
    assert np.all(lat[nearest] == 0)
    # uniform: mean offset is the cell centroid, which is the origin
    assert np.all(np.abs(off.mean(axis=0)) < 4 * off.std(axis=0) / math.sqrt(len(off)))


def test_mixed_binomial_points_uniform():
    spec = pp.MixedBinomial(count=pp.Poisson(mu=1.0))
    pts = [spec.draw(UNIT, generator(4, r)) for r in range(100_000)]
    first = np.array([p[0] for p in pts if len(p)])
    cells = np.floor(first * 4).astype(int)
    counts = np.bincount(cells[:, 0] * 4 + cells[:, 1], minlength=16)
    assert stats.chisquare(counts).pvalue > 0.001


# --- point patterns ---------------------------------------------------------


def test_point_pattern_invariants():
    with pytest.raises(SpecError):
        pp.PointPattern(np.array([[0.5, 0.5], [0.5, 0.5]]), UNIT)
    with pytest.raises(SpecError):
        pp.PointPattern(np.array([[1.5, 0.5]]), UNIT)
    with pytest.raises(SpecError):
        pp.PointPattern(np.array([[np.nan, 0.5]]), UNIT)
    assert len(pp.PointPattern(np.zeros((0, 2)), UNIT)) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.floats(0.1, 5.0))
def test_sampling_is_pure_in_seed(seed, lam):
    spec = pp.StationaryPoisson(intensity=lam)
    assert pp.sample(spec, pp.Window.square(2), seed) == pp.sample(spec, pp.Window.square(2), seed)
