import numpy as np
import pytest

from opmeans import errors
from opmeans.config import SolverConfig
from opmeans.meanfns import (
    arithmetic,
    geometric,
    harmonic,
    left_trivial,
    rep_eval,
    rep_transform,
    right_trivial,
)
from opmeans.multimeans import (
    MeanResult,
    MultiMeanSpec,
    Weights,
    adjoint_eval,
    comparison_bound,
    deformed_mean,
    elementary_mean,
    eval_mean,
    eval_mean_stack,
    karcher_mean,
    meanspec_from_json,
    meanspec_to_json,
    power_mean,
)
from opmeans.psd_core import (
    Relation,
    eigh_apply,
    random_spd,
    spd_sqrt_pair,
    sym,
    thompson,
    thompson_distance,
    validate_spd,
)

W3 = Weights((0.2, 0.3, 0.5))
UNI3 = Weights.uniform(3)


def ensemble(dim, n, base_seed, spectrum=(0.5, 2.0)):
    return [random_spd(dim, spectrum, base_seed + j) for j in range(n)]


def test_weights_validation():
    with pytest.raises(errors.InvalidWeights):
        Weights((0.5, 0.6))
    with pytest.raises(errors.InvalidWeights):
        Weights((-0.1, 1.1))
    assert Weights.uniform(4).values == (0.25,) * 4


def test_elementary_means():
    eyes = [validate_spd(np.eye(2)) for _ in range(3)]
    np.testing.assert_allclose(elementary_mean("arithmetic", UNI3, eyes).a, np.eye(2), atol=1e-14)
    a = validate_spd(np.diag([1.0, 2.0]))
    b = validate_spd(np.diag([3.0, 4.0]))
    got = elementary_mean("arithmetic", Weights((0.5, 0.5)), [a, b])
    np.testing.assert_allclose(got.a, np.diag([2.0, 3.0]), atol=1e-14)
    with pytest.raises(errors.ArityMismatch):
        elementary_mean("arithmetic", W3, [a, b])
    with pytest.raises(errors.UnknownKind):
        elementary_mean("median", Weights((0.5, 0.5)), [a, b])


def test_harmonic_is_adjoint_of_arithmetic():
    As = ensemble(3, 3, 900)
    harm = elementary_mean("harmonic", W3, As)
    inv_inputs = [validate_spd(np.linalg.inv(a.a)) for a in As]
    expect = np.linalg.inv(elementary_mean("arithmetic", W3, inv_inputs).a)
    np.testing.assert_allclose(harm.a, expect, atol=1e-12)


# ------------------------------------------------------------- deformed means


def test_deformed_mean_fixed_point_of_equal_inputs():
    a = random_spd(3, (0.5, 2.0), 31)
    res = deformed_mean(MultiMeanSpec.arithmetic(UNI3), geometric(0.5), [a, a, a])
    assert thompson_distance(res.value, a) < 5e-11


def test_deformed_mean_scalar_inputs_match_formula():
    # 1x1 matrices: the fixed point is the scalar power mean
    vals = [1.0, 4.0, 9.0]
    As = [validate_spd([[v]]) for v in vals]
    res = deformed_mean(MultiMeanSpec.arithmetic(W3), geometric(0.5), As)
    expect = (sum(w * v**0.5 for w, v in zip(W3.values, vals))) ** 2
    assert res.value.a[0, 0] == pytest.approx(expect, rel=1e-10)


def test_deformed_mean_right_trivial_short_circuit():
    As = ensemble(3, 3, 40)
    res = deformed_mean(MultiMeanSpec.arithmetic(W3), right_trivial(), As)
    np.testing.assert_allclose(res.value.a, elementary_mean("arithmetic", W3, As).a, atol=1e-13)
    with pytest.raises(errors.SigmaIsLeftTrivial):
        deformed_mean(MultiMeanSpec.arithmetic(W3), left_trivial(), As)


def fixed_point_gap(base, sigma, As, x):
    # independent one-step recomputation of X -> M(X sigma A_j)
    xh, xih = spd_sqrt_pair(x)
    blocks = sym(np.einsum("ij,njk,kl->nil", xih, np.stack([a.a for a in As]), xih))
    fw = eigh_apply(blocks, lambda t: rep_eval(sigma, t))
    if base.kind == "arithmetic":
        z = np.einsum("n,nij->ij", base.weights.asarray(), fw)
    else:
        z = np.linalg.inv(np.einsum("n,nij->ij", base.weights.asarray(), np.linalg.inv(fw)))
    return float(thompson(x, sym(xh @ z @ xh)))


@pytest.mark.parametrize(
    "base_kind,sigma",
    [
        ("arithmetic", geometric(0.25)),
        ("arithmetic", harmonic(0.5)),
        ("harmonic", geometric(0.5)),
        ("arithmetic", rep_transform(arithmetic(0.5), "adjoint")),
    ],
)
def test_deformed_mean_residual_contract(base_kind, sigma):
    As = ensemble(4, 3, 1234)
    base = getattr(MultiMeanSpec, base_kind)(W3)
    cfg = SolverConfig()
    res = deformed_mean(base, sigma, As, cfg)
    assert res.residual_dt <= cfg.dt_tol
    assert fixed_point_gap(base, sigma, As, res.value.a) < 2 * cfg.dt_tol


def test_deformed_mean_no_convergence_payload():
    As = ensemble(3, 3, 77)
    cfg = SolverConfig(max_iters=2)
    with pytest.raises(errors.NoConvergence) as info:
        deformed_mean(MultiMeanSpec.arithmetic(W3), geometric(0.25), As, cfg)
    assert info.value.last_iterate is not None
    assert info.value.residual > 0


def test_arithmetic_deformation_solves_normalized_residual_equation():
    # with an arithmetic base the fixed point is equivalently the zero of
    # sum_j w_j g(X^{-1/2} A_j X^{-1/2}) where g = (f - 1) / f'(1)
    As = ensemble(3, 3, 321)
    sigma = harmonic(0.4)
    res = deformed_mean(MultiMeanSpec.arithmetic(W3), sigma, As)
    _, xih = spd_sqrt_pair(res.value.a)
    blocks = sym(np.einsum("ij,njk,kl->nil", xih, np.stack([a.a for a in As]), xih))
    slope = sigma.derivative_at_one
    g_blocks = (eigh_apply(blocks, lambda t: rep_eval(sigma, t)) - np.eye(3)) / slope
    resid = np.einsum("n,nij->ij", W3.asarray(), g_blocks)
    assert np.abs(resid).max() < 1e-9


def test_nested_deformation():
    As = ensemble(2, 2, 55)
    w2 = Weights((0.5, 0.5))
    inner = MultiMeanSpec.deformed(MultiMeanSpec.arithmetic(w2), geometric(0.5))
    outer = deformed_mean(inner, harmonic(0.5), As)
    assert fixed_point_gap_nested(inner, harmonic(0.5), As, outer.value.a) < 5e-11


def fixed_point_gap_nested(base, sigma, As, x):
    xh, xih = spd_sqrt_pair(x)
    blocks = sym(np.einsum("ij,njk,kl->nil", xih, np.stack([a.a for a in As]), xih))
    fw = eigh_apply(blocks, lambda t: rep_eval(sigma, t))
    z = eval_mean_stack(base, fw).values
    return float(thompson(x, sym(xh @ z @ xh)))


# ---------------------------------------------------------------- power means


def test_power_mean_alpha_one_is_arithmetic():
    As = ensemble(3, 3, 200)
    res = power_mean(W3, 1.0, As)
    np.testing.assert_allclose(res.value.a, elementary_mean("arithmetic", W3, As).a, atol=1e-10)


def test_power_mean_scalar_formula():
    for alpha in (0.5, 0.25, -0.5):
        a = [validate_spd([[1.0]]), validate_spd([[7.0]])]
        res = power_mean(Weights((0.6, 0.4)), alpha, a)
        expect = (0.6 + 0.4 * 7.0**alpha) ** (1 / alpha)
        assert res.value.a[0, 0] == pytest.approx(expect, rel=1e-9)


def test_power_mean_negative_alpha_is_adjoint():
    As = ensemble(3, 3, 300)
    neg = power_mean(W3, -0.5, As).value.a
    inv_inputs = [validate_spd(np.linalg.inv(a.a)) for a in As]
    expect = np.linalg.inv(power_mean(W3, 0.5, inv_inputs).value.a)
    assert np.abs(neg - expect).max() / np.abs(expect).max() < 1e-9


def test_power_mean_alpha_zero_rejected():
    with pytest.raises(errors.AlphaZero):
        power_mean(W3, 0.0, ensemble(2, 3, 1))


def test_outer_power_of_geometric_deformation():
    # raising the representing function to p in (0, 1] composes exponents,
    # so the deformed mean is again a power mean
    As = ensemble(3, 3, 210)
    sigma = rep_transform(geometric(0.5), "power_outer", 0.6)
    via_deform = deformed_mean(MultiMeanSpec.arithmetic(W3), sigma, As).value.a
    direct = power_mean(W3, 0.3, As).value.a
    assert np.abs(via_deform - direct).max() / np.abs(direct).max() < 1e-9


# --------------------------------------------------------------- Karcher mean


def test_karcher_commuting_diagonals():
    a = validate_spd(np.diag([1.0, 2.0]))
    b = validate_spd(np.diag([3.0, 0.5]))
    res = karcher_mean(Weights((0.4, 0.6)), [a, b])
    expect = np.diag([3.0**0.6, 2.0**0.4 * 0.5**0.6])
    np.testing.assert_allclose(res.value.a, expect, atol=1e-9)
    assert res.enclosure_gap is not None and res.enclosure_gap < 1e-2


def test_karcher_two_variable_is_geometric_mean():
    a = random_spd(3, (0.5, 2.0), 61)
    b = random_spd(3, (0.5, 2.0), 62)
    for alpha in (0.3, 0.5):
        res = karcher_mean(Weights((1 - alpha, alpha)), [a, b])
        ah, aih = spd_sqrt_pair(a.a)
        expect = sym(ah @ eigh_apply(sym(aih @ b.a @ aih), lambda t: t**alpha) @ ah)
        assert np.abs(res.value.a - expect).max() / np.abs(expect).max() < 1e-9


def test_karcher_equal_inputs_zero_iterations():
    a = random_spd(3, (0.5, 2.0), 63)
    res = karcher_mean(UNI3, [a, a, a])
    assert res.iterations == 0
    assert thompson_distance(res.value, a) < 1e-12


def test_karcher_power_mean_ordering_and_limit():
    As = ensemble(3, 3, 4000)
    cfg = SolverConfig(certify=False)
    g = karcher_mean(W3, As, cfg).value
    prev_gap = None
    prev_upper = None
    for alpha in (1.0, 0.5, 0.25, 0.125):
        upper = power_mean(W3, alpha, As).value
        lower = power_mean(W3, -alpha, As).value
        assert np.linalg.eigvalsh(upper.a - g.a).min() >= -1e-9
        assert np.linalg.eigvalsh(g.a - lower.a).min() >= -1e-9
        gap = thompson_distance(upper, g)
        if prev_gap is not None:
            assert gap <= prev_gap + 1e-9
            # monotone in the positive semidefinite order along halving alphas
            assert np.linalg.eigvalsh(prev_upper.a - upper.a).min() >= -1e-9
        prev_gap, prev_upper = gap, upper


def test_karcher_certification_reports_gap():
    As = ensemble(4, 4, 71, spectrum=(0.6, 1.8))
    res = karcher_mean(Weights.uniform(4), As)
    assert res.enclosure_gap is not None
    assert 0 <= res.enclosure_gap < 1e-2


# ------------------------------------------------------------------ axioms


SPECS = [
    MultiMeanSpec.arithmetic(W3),
    MultiMeanSpec.harmonic(W3),
    MultiMeanSpec.power(W3, 0.5),
    MultiMeanSpec.power(W3, -0.25),
    MultiMeanSpec.karcher(W3),
    MultiMeanSpec.deformed(MultiMeanSpec.arithmetic(W3), harmonic(0.5)),
    MultiMeanSpec.adjoint(MultiMeanSpec.power(W3, 0.5)),
]

QUIET = SolverConfig(certify=False)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind + (str(s.alpha or "")))
def test_axioms(spec):
    rng = np.random.default_rng(17)
    As = ensemble(3, 3, 5000)
    base = eval_mean(spec, As, QUIET).value.a
    # normalization
    eyes = [validate_spd(np.eye(3))] * 3
    np.testing.assert_allclose(eval_mean(spec, eyes, QUIET).value.a, np.eye(3), atol=1e-10)
    # homogeneity
    scaled = [validate_spd(2.5 * a.a) for a in As]
    np.testing.assert_allclose(eval_mean(spec, scaled, QUIET).value.a, 2.5 * base, rtol=1e-9)
    # monotonicity under an upward perturbation
    bump = rng.standard_normal((3, 2))
    bigger = [validate_spd(As[0].a + 0.5 * bump @ bump.T)] + As[1:]
    up = eval_mean(spec, bigger, QUIET).value.a
    assert np.linalg.eigvalsh(up - base).min() >= -1e-9 * np.abs(base).max()
    # congruence invariance
    s = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    lhs = s.T @ base @ s
    rhs = eval_mean(spec, [validate_spd(s.T @ a.a @ s) for a in As], QUIET).value.a
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-8


@pytest.mark.parametrize("spec", SPECS[2:], ids=lambda s: s.kind + (str(s.alpha or "")))
def test_thompson_nonexpansive(spec):
    As = ensemble(3, 3, 6000)
    Bs = ensemble(3, 3, 7000)
    da = eval_mean(spec, As, QUIET).value
    db = eval_mean(spec, Bs, QUIET).value
    bound = max(thompson_distance(a, b) for a, b in zip(As, Bs))
    assert thompson_distance(da, db) <= bound + 1e-9


def test_harmonic_arithmetic_sandwich():
    As = ensemble(3, 3, 8000)
    harm = elementary_mean("harmonic", W3, As).a
    arit = elementary_mean("arithmetic", W3, As).a
    for spec in SPECS[2:6]:
        val = eval_mean(spec, As, QUIET).value.a
        assert np.linalg.eigvalsh(val - harm).min() >= -1e-9
        assert np.linalg.eigvalsh(arit - val).min() >= -1e-9


def test_degenerate_single_input():
    a = random_spd(3, (0.5, 2.0), 123)
    for spec in (
        MultiMeanSpec.arithmetic(Weights((1.0,))),
        MultiMeanSpec.karcher(Weights((1.0,))),
        MultiMeanSpec.power(Weights((1.0,)), 0.5),
    ):
        np.testing.assert_allclose(eval_mean(spec, [a], QUIET).value.a, a.a, atol=1e-13)


# ----------------------------------------------------------- comparison bound


def test_comparison_bound_at_fixed_point():
    As = ensemble(3, 3, 42)
    base = MultiMeanSpec.arithmetic(W3)
    res = deformed_mean(base, geometric(0.5), As)
    verdict = comparison_bound(base, geometric(0.5), As, res.value, "lower")
    assert verdict.relation in (Relation.EQUAL, Relation.LESS_EQUAL)
    verdict = comparison_bound(base, geometric(0.5), As, res.value, "upper")
    assert verdict.relation in (Relation.EQUAL, Relation.GREATER_EQUAL)


def test_comparison_bound_scaled_down():
    As = ensemble(3, 3, 43)
    base = MultiMeanSpec.arithmetic(W3)
    res = deformed_mean(base, geometric(0.5), As)
    y = validate_spd(0.9 * res.value.a)
    assert comparison_bound(base, geometric(0.5), As, y, "lower").holds_le


def test_comparison_bound_small_identity():
    As = ensemble(3, 3, 44)
    base = MultiMeanSpec.arithmetic(W3)
    lam = min(np.linalg.eigvalsh(a.a).min() for a in As)
    y = validate_spd(0.5 * lam * np.eye(3))
    assert comparison_bound(base, geometric(0.5), As, y, "lower").holds_le


def test_comparison_bound_hypothesis_fails():
    As = ensemble(3, 3, 45)
    base = MultiMeanSpec.arithmetic(W3)
    res = deformed_mean(base, geometric(0.5), As)
    y = validate_spd(1.5 * res.value.a)
    with pytest.raises(errors.HypothesisFails):
        comparison_bound(base, geometric(0.5), As, y, "lower")


# ---------------------------------------------------------------- adjoints


def test_adjoint_of_arithmetic_is_harmonic_mean():
    As = ensemble(3, 3, 46)
    got = adjoint_eval(MultiMeanSpec.arithmetic(W3), As).value.a
    np.testing.assert_allclose(got, elementary_mean("harmonic", W3, As).a, atol=1e-11)


def test_adjoint_involution():
    As = ensemble(3, 3, 47)
    spec = MultiMeanSpec.power(W3, 0.5)
    once = MultiMeanSpec.adjoint(spec)
    twice = MultiMeanSpec.adjoint(once)
    a = eval_mean(spec, As, QUIET).value.a
    b = eval_mean(twice, As, QUIET).value.a
    assert np.abs(a - b).max() / np.abs(a).max() < 1e-9


def test_power_mean_adjoint_identity():
    As = ensemble(3, 3, 48)
    lhs = adjoint_eval(MultiMeanSpec.power(W3, 0.5), As).value.a
    rhs = power_mean(W3, -0.5, As).value.a
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-9


def test_deformed_adjoint_commutation():
    # the adjoint of a deformation equals deforming the adjoint by the
    # adjoint two-variable mean
    As = ensemble(3, 3, 49)
    base = MultiMeanSpec.arithmetic(W3)
    sigma = harmonic(0.4)
    lhs = adjoint_eval(MultiMeanSpec.deformed(base, sigma), As).value.a
    rhs = deformed_mean(
        MultiMeanSpec.harmonic(W3), rep_transform(sigma, "adjoint"), As
    ).value.a
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-8


# ---------------------------------------------------------------- wire format


def test_meanspec_json_roundtrip():
    specs = SPECS + [MultiMeanSpec.deformed(MultiMeanSpec.karcher(W3), geometric(0.5))]
    for spec in specs:
        back = meanspec_from_json(meanspec_to_json(spec))
        assert back == spec
    with pytest.raises(errors.UnknownKind):
        meanspec_from_json({"kind": "median"})


def test_mean_result_serialization():
    a = random_spd(2, (0.5, 2.0), 1)
    res = MeanResult(value=a, iterations=3, residual_dt=1e-12, enclosure_gap=None)
    js = res.to_json()
    assert js["iterations"] == 3 and js["enclosure_gap"] is None
