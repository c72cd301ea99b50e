import numpy as np
import pytest

from tubespectra import (
    CurvatureProfile,
    EllipticityError,
    InputError,
    SurfaceData,
    constant_function,
    ellipticity_bounds,
    gaussian_bump,
    integrate_tang_rotation,
    metric_from_frames,
    metric_from_jacobi,
    metric_from_profile,
)
from tubespectra.metric import export_metric_csv
from conftest import random_smooth_profile


def test_planar_metric_is_one_minus_kappa_u(bump_profile, bump_metric):
    s = np.linspace(-3, 3, 17)
    u = np.linspace(-0.9, 0.9, 7)
    S, U = np.meshgrid(s, u, indexing="ij")
    kap = bump_profile.kappa(1, S)
    assert np.allclose(bump_metric.h(S, U), 1.0 - kap * U, atol=1e-15)
    assert np.allclose(bump_metric.h_s(S, U), -bump_profile.kappa(1, S, 1) * U, atol=1e-15)
    assert np.allclose(bump_metric.h_ss(S, U), -bump_profile.kappa(1, S, 2) * U, atol=1e-15)
    assert np.allclose(bump_metric.h_sss(S, U), -bump_profile.kappa(1, S, 3) * U, atol=1e-15)
    assert np.allclose(bump_metric.hu_sq(S, U), kap**2, atol=1e-15)
    assert np.allclose(bump_metric.lap_u(S, U), 0.0)
    assert np.allclose(bump_metric.det_g(S, U), bump_metric.h(S, U) ** 2)


def test_straight_tube_metric_is_identically_one(straight_profile):
    m = metric_from_profile(straight_profile, 1.0)
    s = np.linspace(-5, 5, 11)
    u = np.full_like(s, 0.3)
    assert np.all(m.h(s, u) == 1.0)
    for fn in (m.h_s, m.h_ss, m.h_sss, m.hu_sq, m.hu_sq_s, m.lap_u, m.lap_u_s, m.cross_su):
        assert np.all(fn(s, u) == 0.0)


@pytest.mark.parametrize("tau_kind", ["constant", "varying"])
def test_spatial_metric_matches_rotation_angle_formula(tau_kind):
    # alpha' = tau; h = 1 - kappa (u2 cos(alpha) + u3 sin(alpha))
    kappa0 = 0.4
    if tau_kind == "constant":
        tau = constant_function(0.2)
        alpha_of = lambda s: 0.2 * s
    else:
        from tubespectra.profiles import ScalarFunction

        tau = ScalarFunction(
            [
                lambda s: 0.3 * np.cos(s),
                lambda s: -0.3 * np.sin(s),
                lambda s: -0.3 * np.cos(s),
            ]
        )
        alpha_of = lambda s: 0.3 * np.sin(s)
    prof = CurvatureProfile([constant_function(kappa0), tau], (-20, 20))
    s_grid = np.linspace(-12, 12, 1537)
    rot = integrate_tang_rotation(prof, s_grid)
    metric = metric_from_frames(prof, rot, a=1.0)
    s = np.linspace(-8, 8, 33)
    u = np.array([0.35, -0.55])
    expected = 1.0 - kappa0 * (
        u[0] * np.cos(alpha_of(s)) + u[1] * np.sin(alpha_of(s))
    )
    got = metric.h(s, np.broadcast_to(u, s.shape + (2,)))
    assert np.allclose(got, expected, atol=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_closed_form_s_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    prof = random_smooth_profile(rng, dimension=d, max_kappa=0.4)
    if d == 2:
        metric = metric_from_profile(prof, 0.8)
    else:
        s_grid = np.linspace(-10, 10, 4001)
        metric = metric_from_frames(prof, integrate_tang_rotation(prof, s_grid), 0.8)
    s = np.linspace(-4.0, 4.0, 9)
    u = rng.uniform(-0.4, 0.4, size=(9, d - 1))
    delta = 1e-2

    def fd1(f):
        return (f(s - 2 * delta, u) - 8 * f(s - delta, u)
                + 8 * f(s + delta, u) - f(s + 2 * delta, u)) / (12 * delta)

    assert np.allclose(metric.h_s(s, u), fd1(metric.h), atol=5e-8)
    assert np.allclose(metric.h_ss(s, u), fd1(metric.h_s), atol=5e-8)
    assert np.allclose(metric.h_sss(s, u), fd1(metric.h_ss), atol=5e-7)
    assert np.allclose(metric.hu_sq_s(s, u), fd1(metric.hu_sq), atol=5e-8)
    # cross term: for a tube, d^{mu nu} h_,1mu h_,nu = (1/2) d/ds hu_sq
    assert np.allclose(metric.cross_su(s, u), 0.5 * metric.hu_sq_s(s, u), atol=1e-12)


def test_affine_in_u_is_exact(bump_metric):
    s = np.linspace(-2, 2, 5)
    u = np.linspace(0.1, 0.9, 5)
    for lam in (0.0, 0.25, 0.5, 1.0):
        lhs = bump_metric.h(s, lam * u) - 1.0
        rhs = lam * (bump_metric.h(s, u) - 1.0)
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-15)


def test_ellipticity_violation_is_rejected_at_construction():
    prof = CurvatureProfile([constant_function(1.0)], (-5, 5))
    with pytest.raises(EllipticityError) as err:
        metric_from_profile(prof, 1.0)
    assert err.value.where == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# strips via the transverse Jacobi equation


def flat_surface(kappa_fn, a=1.0, s_range=(-1e4, 1e4)):
    return SurfaceData(
        gauss_curvature=lambda s, u: np.zeros(np.broadcast_shapes(np.shape(s), np.shape(u))),
        kappa=kappa_fn,
        a=a,
        s_range=s_range,
    )


def const_surface(value, kappa_fn=lambda s: np.zeros_like(np.asarray(s, float)),
                  a=1.0):
    return SurfaceData(
        gauss_curvature=lambda s, u: np.full(np.broadcast_shapes(np.shape(s), np.shape(u)), value),
        kappa=kappa_fn,
        a=a,
        s_range=(-20.0, 20.0),
    )


def test_flat_strip_reproduces_affine_metric():
    kap = gaussian_bump(0.5, 1.0)
    metric = metric_from_jacobi(flat_surface(lambda s: kap(s)))
    s = np.linspace(-4, 4, 23)
    u = np.linspace(-1, 1, 29)  # includes off-node values
    S, U = np.meshgrid(s, u, indexing="ij")
    assert np.max(np.abs(metric.h(S, U) - (1.0 - kap(S) * U))) < 1e-10


def test_positively_curved_strip_gives_cosine():
    metric = metric_from_jacobi(const_surface(1.0))
    s = np.zeros(17)
    u = np.linspace(-1, 1, 17)
    assert np.max(np.abs(metric.h(s, u) - np.cos(u))) < 1e-8


def test_negatively_curved_strip_gives_cosh():
    metric = metric_from_jacobi(const_surface(-1.0))
    s = np.zeros(17)
    u = np.linspace(-1, 1, 17)
    assert np.max(np.abs(metric.h(s, u) - np.cosh(u))) < 1e-8


def test_jacobi_superposition_in_the_initial_slope():
    kap = gaussian_bump(0.4, 1.5)
    k_of = lambda s: kap(s)
    minus_k = lambda s: -kap(s)
    zero_k = lambda s: np.zeros_like(np.asarray(s, float))
    surfs = [const_surface(0.5, kappa_fn=f) for f in (k_of, minus_k, zero_k)]
    metrics = [metric_from_jacobi(s_) for s_ in surfs]
    s = np.linspace(-3, 3, 9)
    u = np.linspace(-0.9, 0.9, 11)
    S, U = np.meshgrid(s, u, indexing="ij")
    h_plus = metrics[0].h(S, U)
    h_minus = metrics[1].h(S, U)
    h_zero = metrics[2].h(S, U)
    assert np.max(np.abs(h_plus + h_minus - 2.0 * h_zero)) < 1e-9


def test_flat_strip_s_derivatives_match_curvature_closed_form():
    kap = gaussian_bump(0.5, 1.0)
    metric = metric_from_jacobi(flat_surface(lambda s: kap(s)))
    s = np.linspace(-3, 3, 13)
    u = np.linspace(-0.8, 0.8, 7)
    S, U = np.meshgrid(s, u, indexing="ij")
    assert np.allclose(metric.h_s(S, U), -kap(S, 1) * U, atol=1e-8)
    assert np.allclose(metric.h_ss(S, U), -kap(S, 2) * U, atol=1e-7)
    assert np.allclose(metric.h_sss(S, U), -kap(S, 3) * U, atol=1e-6)
    assert np.allclose(metric.hu_sq(S, U), kap(S) ** 2, atol=1e-9)
    assert np.allclose(metric.lap_u(S, U), 0.0, atol=1e-12)


def test_focal_point_inside_strip_is_an_ellipticity_error():
    surf = const_surface(1.0, a=2.0)  # cos(u) vanishes at pi/2 < 2
    metric = metric_from_jacobi(surf)
    with pytest.raises(EllipticityError):
        metric.h(np.zeros(3), np.array([0.0, 1.0, 1.9]))


def test_jacobi_u_grid_validation():
    surf = flat_surface(lambda s: np.zeros_like(np.asarray(s, float)))
    with pytest.raises(InputError):
        metric_from_jacobi(surf, u_grid=np.array([0.25, 0.5]))  # missing 0
    with pytest.raises(InputError):
        metric_from_jacobi(surf, u_grid=np.array([0.0, 1.5]))  # outside width


# ---------------------------------------------------------------------------
# ellipticity bounds


def test_bounds_straight_tube(straight_profile):
    m = metric_from_profile(straight_profile, 1.0)
    b = ellipticity_bounds(m)
    assert b.c_minus == pytest.approx(1.0, abs=1e-12)
    assert b.c_plus == pytest.approx(1.0, abs=1e-12)


def test_bounds_constant_curvature_analytic_window():
    prof = CurvatureProfile([constant_function(0.5)], (-10, 10))
    m = metric_from_profile(prof, 1.0)
    b = ellipticity_bounds(m)
    assert (b.analytic_minus, b.analytic_plus) == (0.5, 1.5)
    assert b.analytic_minus <= b.c_minus <= b.c_plus <= b.analytic_plus
    assert b.c_minus == pytest.approx(0.5, abs=1e-9)
    assert b.c_plus == pytest.approx(1.5, abs=1e-9)


def test_bounds_positively_curved_strip():
    metric = metric_from_jacobi(const_surface(1.0))
    b = ellipticity_bounds(metric)
    assert b.c_minus == pytest.approx(np.cos(1.0), abs=1e-6)
    assert b.c_plus == pytest.approx(1.0, abs=1e-6)


def test_metric_csv_export(tmp_path, bump_metric):
    path = tmp_path / "metric.csv"
    export_metric_csv(bump_metric, path, np.linspace(-1, 1, 3), np.linspace(-0.5, 0.5, 3))
    lines = path.read_text().strip().split("\n")
    assert lines[0].split(",") == ["s", "u2", "h", "h_1", "h_11"]
    assert len(lines) == 1 + 9
