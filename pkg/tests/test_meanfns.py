import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmeans import errors
from opmeans.config import SolverConfig
from opmeans.meanfns import (
    arithmetic,
    arithmetic_harmonic_mix,
    condition_vi_margin,
    convex_combo,
    deformed_rep,
    geometric,
    harmonic,
    left_trivial,
    pmi_margin,
    rep_eval,
    rep_transform,
    repfn_from_json,
    repfn_to_json,
    right_trivial,
    two_var_mean,
    two_var_deformed_mean,
)
from opmeans.psd_core import matrix_function, random_spd, validate_spd

GRID = np.geomspace(1e-3, 1e3, 60)


def catalog():
    return [
        left_trivial(),
        right_trivial(),
        arithmetic(0.3),
        harmonic(0.6),
        geometric(0.5),
        arithmetic_harmonic_mix(0.25),
        rep_transform(arithmetic(0.4), "adjoint"),
        rep_transform(geometric(0.7), "transpose"),
        rep_transform(harmonic(0.5), "power_inner", 2.0),
        rep_transform(arithmetic(0.5), "power_inner_outer", 0.5),
        rep_transform(harmonic(0.5), "power_outer", 0.5),
    ]


def test_normalization_survives_transforms():
    for spec in catalog():
        assert rep_eval(spec, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_monotone_on_grid():
    for spec in catalog():
        vals = rep_eval(spec, GRID)
        assert np.all(np.diff(vals) >= -1e-12 * np.abs(vals[:-1]))


def test_between_trivial_means():
    # holds for every operator mean; power_inner with r > 1 is an analytic
    # device rather than a mean, so it is exempt
    means_only = [
        spec
        for spec in catalog()
        if not any(t.op == "power_inner" and t.r > 1 for t in spec.transforms)
    ]
    assert len(means_only) == len(catalog()) - 1
    for spec in means_only:
        vals = rep_eval(spec, GRID)
        assert np.all(vals >= np.minimum(1.0, GRID) - 1e-12)
        assert np.all(vals <= np.maximum(1.0, GRID) + 1e-9 * np.maximum(1.0, GRID))


def test_exact_values():
    assert rep_eval(geometric(0.5), 4.0) == pytest.approx(2.0, abs=1e-14)
    f = arithmetic_harmonic_mix(0.25)
    # by hand: (1/4)(9/2) + (3/4)(16/9) = 9/8 + 4/3 = 59/24
    assert rep_eval(f, 8.0) == pytest.approx(59.0 / 24.0, rel=1e-14)
    # (1/4)(3/2) + (3/4)(4/3) = 11/8, cubed = 1331/512
    assert rep_eval(f, 2.0) ** 3 == pytest.approx(1331.0 / 512.0, rel=1e-14)


def test_adjoint_of_arithmetic_is_harmonic():
    adj = rep_transform(arithmetic(0.5), "adjoint")
    assert rep_eval(adj, 3.0) == pytest.approx(1.5, abs=1e-14)
    for w in (0.2, 0.5, 0.8):
        got = rep_eval(rep_transform(arithmetic(w), "adjoint"), GRID)
        np.testing.assert_allclose(got, rep_eval(harmonic(w), GRID), rtol=1e-13)


def test_transpose_of_geometric():
    for alpha in (0.2, 0.5, 0.9):
        got = rep_eval(rep_transform(geometric(alpha), "transpose"), GRID)
        np.testing.assert_allclose(got, GRID ** (1 - alpha), rtol=1e-12)


def test_power_bracket_fixes_geometric():
    for r in (0.25, 0.5, 2.0):
        got = rep_eval(rep_transform(geometric(0.3), "power_inner_outer", r), GRID)
        np.testing.assert_allclose(got, GRID**0.3, rtol=1e-12)


def test_adjoint_is_involution():
    for spec in catalog():
        twice = rep_transform(rep_transform(spec, "adjoint"), "adjoint")
        np.testing.assert_allclose(rep_eval(twice, GRID), rep_eval(spec, GRID), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    w=st.floats(min_value=0.05, max_value=0.95),
    t=st.floats(min_value=1e-3, max_value=1e3),
)
def test_arithmetic_value_and_derivative(w, t):
    spec = arithmetic(w)
    assert rep_eval(spec, t) == pytest.approx(1 - w + w * t, rel=1e-13)
    assert spec.derivative_at_one == pytest.approx(w, abs=1e-7)


def test_transform_validation():
    with pytest.raises(errors.MissingParameter):
        rep_transform(arithmetic(0.5), "power_inner")
    with pytest.raises(errors.UnknownKind):
        rep_transform(arithmetic(0.5), "squash")
    with pytest.raises(errors.DomainError):
        rep_transform(arithmetic(0.5), "power_outer", 2.0)
    with pytest.raises(errors.DomainError):
        rep_eval(arithmetic(0.5), -1.0)


def test_convex_combo_weights_checked():
    with pytest.raises(errors.DomainError):
        convex_combo([(0.5, arithmetic(0.5)), (0.6, harmonic(0.5))])


# ------------------------------------------------------------------ matrices


def test_two_var_identity_left():
    b = random_spd(3, (0.5, 2.0), 9)
    spec = geometric(0.5)
    got = two_var_mean(spec, validate_spd(np.eye(3)), b)
    np.testing.assert_allclose(got.a, matrix_function(b, np.sqrt), atol=1e-12)


def test_two_var_commuting_diagonals():
    a = validate_spd(np.diag([1.0, 4.0]))
    b = validate_spd(np.diag([3.0, 2.0]))
    got = two_var_mean(arithmetic(0.5), a, b)
    np.testing.assert_allclose(got.a, np.diag([2.0, 3.0]), atol=1e-12)


def test_two_var_geometric_with_identity():
    a = validate_spd([[2.0, 1.0], [1.0, 2.0]])
    got = two_var_mean(geometric(0.5), a, validate_spd(np.eye(2)))
    np.testing.assert_allclose(got.a, matrix_function(a, np.sqrt), atol=1e-11)


def test_two_var_monotone_and_congruent():
    rng = np.random.default_rng(3)
    spec = harmonic(0.4)
    for trial in range(6):
        a = random_spd(3, (0.5, 2.0), 500 + trial)
        b = random_spd(3, (0.5, 2.0), 600 + trial)
        bump = rng.standard_normal((3, 2))
        c = validate_spd(a.a + bump @ bump.T)
        low = two_var_mean(spec, a, b).a
        high = two_var_mean(spec, c, b).a
        assert np.linalg.eigvalsh(high - low).min() >= -1e-10
        bump2 = rng.standard_normal((3, 2))
        d = validate_spd(b.a + bump2 @ bump2.T)
        high2 = two_var_mean(spec, a, d).a
        assert np.linalg.eigvalsh(high2 - low).min() >= -1e-10
        s = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        lhs = s.T @ two_var_mean(spec, a, b).a @ s
        rhs = two_var_mean(spec, validate_spd(s.T @ a.a @ s), validate_spd(s.T @ b.a @ s)).a
        assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-8


# ------------------------------------------------------- scalar deformed mean


def power_formula(w, a, t):
    return (1 - w + w * t**a) ** (1 / a)


def harmonic_deform_formula(w, a, t):
    c = (1 - a - w) * t + w - a
    return (np.sqrt(c**2 + 4 * a * (1 - a) * t) - c) / (2 * a)


def geometric_by_arithmetic_formula(a, t):
    return ((1 - a) * (1 + t) + np.sqrt((1 - a) ** 2 * (1 + t) ** 2 + 4 * a * (2 - a) * t)) / (
        2 * (2 - a)
    )


def fixed_point_residual(tau, sigma, t, x):
    u = rep_eval(sigma, 1.0 / x)
    return u * rep_eval(tau, rep_eval(sigma, t / x) / u) - 1.0


GRID50 = np.geomspace(1e-2, 1e2, 50)


@pytest.mark.parametrize("w", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_deformed_rep_matches_power_formula(w, a):
    expect = power_formula(w, a, GRID50)
    # the closed form itself satisfies the defining equation
    assert np.abs(fixed_point_residual(arithmetic(w), geometric(a), GRID50, expect)).max() < 1e-12
    got = deformed_rep(arithmetic(w), geometric(a), GRID50)
    np.testing.assert_allclose(got, expect, rtol=1e-10)


@pytest.mark.parametrize("w", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_deformed_rep_matches_harmonic_surd(w, a):
    expect = harmonic_deform_formula(w, a, GRID50)
    assert np.abs(fixed_point_residual(arithmetic(w), harmonic(a), GRID50, expect)).max() < 1e-12
    got = deformed_rep(arithmetic(w), harmonic(a), GRID50)
    np.testing.assert_allclose(got, expect, rtol=1e-10)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_deformed_rep_geometric_by_arithmetic(a):
    expect = geometric_by_arithmetic_formula(a, GRID50)
    assert np.abs(fixed_point_residual(geometric(0.5), arithmetic(a), GRID50, expect)).max() < 1e-12
    got = deformed_rep(geometric(0.5), arithmetic(a), GRID50)
    np.testing.assert_allclose(got, expect, rtol=1e-10)


def test_deformed_rep_special_cases():
    # arithmetic deformed by harmonic at w = alpha = 1/2 is the square root
    assert deformed_rep(arithmetic(0.5), harmonic(0.5), 4.0) == pytest.approx(2.0, abs=1e-10)
    # deforming by the right trivial mean changes nothing
    ts = np.geomspace(0.1, 10, 7)
    np.testing.assert_allclose(
        deformed_rep(arithmetic(0.3), right_trivial(), ts), rep_eval(arithmetic(0.3), ts), rtol=1e-12
    )
    with pytest.raises(errors.SigmaIsLeftTrivial):
        deformed_rep(arithmetic(0.3), left_trivial(), 2.0)


def test_deformed_rep_derivative_matches_base():
    # the deformation preserves the derivative at 1
    tau, sigma = arithmetic(0.35), harmonic(0.6)
    h = 1e-6
    d = (deformed_rep(tau, sigma, 1 + h) - deformed_rep(tau, sigma, 1 - h)) / (2 * h)
    assert d == pytest.approx(0.35, abs=1e-6)


def test_two_var_deformed_mean_matches_scalar_on_diagonals():
    a = validate_spd(np.diag([1.0, 2.0]))
    b = validate_spd(np.diag([4.0, 1.0]))
    got = two_var_deformed_mean(arithmetic(0.5), harmonic(0.5), a, b)
    expect = np.diag([np.sqrt(4.0), np.sqrt(2.0)])
    np.testing.assert_allclose(got.a, expect, atol=1e-10)


def test_deformed_rep_no_convergence_payload():
    cfg = SolverConfig(tol=1e-12, scalar_max_iters=10_000)
    # still converges (bisection backstop): sanity that tight caps don't break
    val = deformed_rep(arithmetic(0.5), geometric(0.01), 7.0, cfg)
    assert val == pytest.approx(power_formula(0.5, 0.01, 7.0), rel=1e-9)


# --------------------------------------------------------------- margin scans


def test_pmi_margins():
    geo = pmi_margin(geometric(0.4), GRID50, np.linspace(1, 6, 11))
    assert abs(geo.worst_margin) < 1e-10
    ari = pmi_margin(arithmetic(0.6), GRID50, np.linspace(1, 6, 11))
    assert ari.worst_margin >= -1e-12
    mix = pmi_margin(arithmetic_harmonic_mix(0.25), np.array([2.0]), np.array([3.0]))
    assert mix.worst_margin <= 59.0 / 24.0 - 1331.0 / 512.0 + 1e-12
    assert mix.worst_margin < 0


def test_condition_vi_margins():
    mix = condition_vi_margin(arithmetic_harmonic_mix(0.25))
    assert mix.worst_margin >= -1e-12
    geo = condition_vi_margin(geometric(0.5), GRID50, np.linspace(1, 8, 15))
    assert geo.worst_margin >= -1e-12
    at_one = condition_vi_margin(arithmetic_harmonic_mix(0.25), GRID50, np.array([1.0]))
    assert abs(at_one.worst_margin) < 1e-12


def test_margin_grid_validation():
    with pytest.raises(errors.DomainError):
        pmi_margin(geometric(0.5), np.array([-1.0]), np.array([2.0]))
    with pytest.raises(errors.DomainError):
        condition_vi_margin(geometric(0.5), GRID50, np.array([0.5]))


# ----------------------------------------------------------------- wire format


def test_json_roundtrip():
    for spec in catalog():
        back = repfn_from_json(repfn_to_json(spec))
        np.testing.assert_allclose(rep_eval(back, GRID), rep_eval(spec, GRID), rtol=1e-14)


def test_json_unknown_kind():
    with pytest.raises(errors.UnknownKind):
        repfn_from_json({"kind": "median", "params": {}})
    with pytest.raises(errors.MissingParameter):
        repfn_from_json({"kind": "geometric", "params": {}})
