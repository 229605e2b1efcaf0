import math

import numpy as np
import pytest

from ppx import laws, netsim, ops
from ppx import pointproc as pp
from ppx.errors import SingularPathLossError, SpecError
from ppx.rng import generator

PL = netsim.PathLoss()
SMALL = pp.Window.square(12, centered=True, metric="toroidal")
FIELD = pp.Window.square(20, centered=True, metric="toroidal")


def small_config(users, noise=5e-5, **kw):
    return netsim.NetworkConfig(
        bs_spec=pp.StationaryPoisson(intensity=0.1), ms_spec=users, window=SMALL, noise=noise, **kw
    )


# --- path loss and link quantities ------------------------------------------


def test_pathloss_shape_and_guards():
    r = np.linspace(0, 5, 50)
    g = PL.g(r)
    assert g[0] == 1.0 and np.all(np.diff(g) <= 0) and np.all(g > 0)
    with pytest.raises(SpecError):
        netsim.PathLoss(delta=2).check_dim(2)
    singular = netsim.PathLoss(a=0)
    assert singular.g(1.0) == 1.0
    with pytest.raises(SingularPathLossError):
        singular.g(np.array([1.0, 1e-7]))
    with pytest.raises(ValueError):
        netsim.PathLoss(a=2)


def test_association_examples():
    assert np.all(netsim.associate_nearest(np.random.default_rng(0).random((5, 2)), [[0.3, 0.3]]) == 0)
    assert netsim.associate_nearest([[0.0, 0.0]], [[1.0, 0.0], [3.0, 0.0]])[0] == 0
    with pytest.raises(SpecError):
        netsim.associate_nearest([[0.0, 0.0]], np.zeros((0, 2)))


@pytest.mark.parametrize("window", [pp.Window.square(10), pp.Window.square(10, metric="toroidal")])
def test_association_matches_brute_force(window):
    rng = generator(3)
    users = pp.PointPattern(window.draw_uniform(rng, 300), window)
    bss = pp.PointPattern(window.draw_uniform(rng, 40), window)
    got = netsim.associate_nearest(users, bss)
    for i, x in enumerate(users.points):
        d = [float(window.distance(x, b)) for b in bss.points]
        assert got[i] == int(np.argmin(d))


def test_interference_examples():
    bss = np.array([[1.0, 0.0], [2.0, 0.0]])
    x = np.zeros(2)
    assert netsim.interference_at(x, bss[:1], 0, [1.0], PL) == 0.0
    val = netsim.interference_at(x, bss, 0, [1.0, 1.0], PL)
    assert val == pytest.approx(1 / 17, abs=1e-12)
    assert val == pytest.approx(0.058824, abs=5e-7)
    assert netsim.interference_at(x, bss, 0, [3.0, 3.0], PL) == pytest.approx(3 * val)
    with pytest.raises(SpecError):
        netsim.interference_at(x, bss, 0, [1.0], PL)


def test_sinr_examples():
    assert netsim.sinr(0.0, 1.0, 0.0, 1.0, PL) == 1.0
    assert netsim.sinr(1.0, 2.0, 0.9, 0.1, PL) == pytest.approx(1.0)
    assert netsim.sinr(1.0, 4.0, 0.9, 0.1, PL) == pytest.approx(2 * netsim.sinr(1.0, 2.0, 0.9, 0.1, PL))
    with pytest.raises(SpecError):
        netsim.sinr(1.0, 1.0, 0.0, 0.0, PL)


def test_typical_cell_membership_matches_brute_force():
    rng = generator(5)
    for window in (SMALL, pp.Window.square(12, centered=True)):
        others = window.draw_uniform(rng, 15)
        users = window.draw_uniform(rng, 400)
        got = netsim._in_typical_cell(users, others, window)
        c = window.center
        for x, g in zip(users, got):
            d0 = float(window.distance(x, c))
            assert g == all(d0 <= float(window.distance(x, o)) for o in others)


# --- total-cell coverage ----------------------------------------------------


def test_no_users_means_full_coverage():
    curve = netsim.total_cell_coverage(small_config(pp.StationaryPoisson(intensity=0.0)), [0.1, 1, 10], 50, 1)
    assert all(e.mean == 1.0 and e.std_error == 0.0 for e in curve.indicator + curve.conditional)


def test_coverage_rejects_bad_threshold():
    with pytest.raises(SpecError):
        netsim.total_cell_coverage(small_config(pp.StationaryPoisson(intensity=1.0)), [0.0], 10, 1)


def test_coverage_limits_and_monotonicity():
    cfg = small_config(pp.StationaryPoisson(intensity=1.0))
    T = 10.0 ** np.arange(-3, 2)
    curve = netsim.total_cell_coverage(cfg, T, 2000, 2)
    b = np.array([e.mean for e in curve.conditional])
    a = np.array([e.mean for e in curve.indicator])
    assert np.all(np.diff(b) <= 0) and np.all(np.diff(a) <= 0)
    assert b[0] > 0.97
    noisy = netsim.total_cell_coverage(small_config(pp.StationaryPoisson(intensity=1.0), noise=0.05), T, 2000, 2)
    # same streams, more noise: every replication's conditional term shrinks
    assert all(n.mean <= q.mean for n, q in zip(noisy.conditional, curve.conditional))


@pytest.mark.parametrize("users", [pp.StationaryPoisson(intensity=1.0), pp.MixedPoisson.two_point(1.0)], ids=["ppp", "mpp"])
def test_estimators_agree(users):
    curve = netsim.total_cell_coverage(small_config(users), 10.0 ** (np.array([-10, -4, 2, 8]) / 10), 4000, 3)
    for a, b in zip(curve.indicator, curve.conditional):
        assert abs(a.mean - b.mean) < 3 * math.hypot(a.std_error, b.std_error)
        assert b.std_error <= a.std_error + 1e-12


def test_conditional_estimator_needs_rayleigh_signal():
    cfg = small_config(pp.StationaryPoisson(intensity=1.0), fading=netsim.FadingModel(signal=laws.Gamma(shape=2.0, scale=0.5)))
    curve = netsim.total_cell_coverage(cfg, [1.0], 100, 1)
    assert math.isnan(curve.conditional[0].mean)
    assert 0 <= curve.indicator[0].mean <= 1


def test_coverage_thread_invariance():
    cfg = small_config(pp.StationaryPoisson(intensity=1.0))
    a = netsim.total_cell_coverage(cfg, [1.0], 200, 4, threads=1)
    b = netsim.total_cell_coverage(cfg, [1.0], 200, 4, threads=3)
    assert a.indicator == b.indicator and a.conditional == b.conditional


def test_curve_rows():
    curve = netsim.total_cell_coverage(small_config(pp.StationaryPoisson(intensity=1.0)), [0.5, 2.0], 20, 1)
    rows = list(curve.rows())
    assert [r[1] for r in rows] == ["indicator", "conditional"] * 2
    assert rows[0][0] == 0.5


# --- spatial coverage -------------------------------------------------------


def test_empty_bs_process():
    res = netsim.spatial_coverage(
        pp.StationaryPoisson(intensity=0.0), netsim.RadiusModel(law=laws.Constant(value=2.0)), FIELD, 50, 1
    )
    assert res.p_covered.mean == 0.0
    assert all(e.mean == 1.0 for e in res.pgf)


@pytest.mark.parametrize("lam,R", [(0.1, 2.0), (0.5, 1.0), (0.05, 3.0)])
def test_void_probability_oracle(lam, R):
    res = netsim.spatial_coverage(
        pp.StationaryPoisson(intensity=lam), netsim.RadiusModel(law=laws.Constant(value=R)), FIELD, 20_000, 2
    )
    m = lam * math.pi * R * R
    assert abs(res.p_covered.mean - (1 - math.exp(-m))) < 3 * res.p_covered.std_error
    for t, e in zip(res.t_grid, res.pgf):
        assert abs(e.mean - math.exp(-m * (1 - t))) < 3 * e.std_error + 1e-12


def test_square_footprint_and_random_radius_oracles():
    ppp = pp.StationaryPoisson(intensity=0.1)
    sq = netsim.spatial_coverage(ppp, netsim.RadiusModel(law=laws.Constant(value=2.0), footprint="square"), FIELD, 20_000, 3)
    assert abs(sq.p_covered.mean - (1 - math.exp(-0.1 * 16))) < 3 * sq.p_covered.std_error
    el = netsim.spatial_coverage(ppp, netsim.RadiusModel(law=laws.Constant(value=2.0), footprint="ellipse"), FIELD, 20_000, 3)
    # ellipse area equals the disc's
    assert abs(el.p_covered.mean - (1 - math.exp(-0.4 * math.pi))) < 3 * el.p_covered.std_error
    two = laws.Table(values=(1.0, 3.0), weights=(0.5, 0.5))
    rr = netsim.spatial_coverage(ppp, netsim.RadiusModel(law=two), FIELD, 20_000, 3)
    assert abs(rr.p_covered.mean - (1 - math.exp(-0.1 * math.pi * 5))) < 3 * rr.p_covered.std_error
    with pytest.raises(SpecError):
        netsim.spatial_coverage(
            ppp, netsim.RadiusModel(law=laws.Constant(value=1.0), footprint="square"),
            pp.Window.square(10, dim=3), 5, 1,
        )


@pytest.mark.parametrize(
    "law", [laws.Constant(value=2.0), laws.Table(values=(1.0, 3.0), weights=(0.5, 0.5))], ids=["fixed", "two_point"]
)
def test_ordered_bs_specs_order_pgf(law):
    radius = netsim.RadiusModel(law=law)
    mpp = netsim.spatial_coverage(pp.MixedPoisson.two_point(0.1), radius, FIELD, 20_000, 4)
    ppp = netsim.spatial_coverage(pp.StationaryPoisson(intensity=0.1), radius, FIELD, 20_000, 4)
    for a, b in zip(mpp.pgf, ppp.pgf):
        assert a.mean >= b.mean - 2 * math.hypot(a.std_error, b.std_error)
    assert mpp.p_covered.mean <= ppp.p_covered.mean + 2 * math.hypot(mpp.p_covered.std_error, ppp.p_covered.std_error)


def test_lifted_bs_spec_and_probe_grid():
    spec = ops.Thinned(base=pp.StationaryPoisson(intensity=0.2), rule=ops.PConst(p=0.5))
    probes = [[0.0, 0.0], [5.0, 5.0], [-3.0, 2.0]]
    res = netsim.spatial_coverage(spec, netsim.RadiusModel(law=laws.Constant(value=2.0)), FIELD, 5000, 5, probes=probes)
    assert abs(res.p_covered.mean - (1 - math.exp(-0.4 * math.pi))) < 3 * res.p_covered.std_error
