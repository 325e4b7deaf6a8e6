import math

import numpy as np
import pytest

from npqs import functionals as fn
from npqs.functionals import FunctionalKind as K
from npqs.functionals import ParameterError, SpaceParams
from npqs.holo import Const, Var
from npqs.integrate import SamplerConfig
from npqs.parser import parse

import oracles

CFG = SamplerConfig(seed=17, n_samples=200_000)
P1 = SpaceParams(n=1, p=2, q=1, s=1, alpha=0.5)
P7 = SpaceParams(n=1, p=7, q=1, s=1, alpha=0.5)
A0 = np.zeros(1)


def close(est, target, k=3.0, rel=0.0):
    return abs(est.value - target) <= max(k * est.std_error, rel * abs(target))


def test_space_params_gates_name_the_constraint():
    cases = {
        "q>0": dict(n=1, p=2, q=0, s=1, alpha=1),
        "p>=1": dict(n=1, p=0.5, q=1, s=1, alpha=1),
        "s>max{0,1-q/n}": dict(n=2, p=2, q=0.5, s=0.7, alpha=1),
        "alpha>q+ns-n-1": dict(n=1, p=2, q=1, s=1, alpha=0),
    }
    for name, kw in cases.items():
        with pytest.raises(ParameterError, match=re_escape(name)):
            SpaceParams(**kw)


def re_escape(s):
    import re

    return re.escape(s)


def test_space_params_flags():
    assert P7.gamma == 2.5 and P7.hw_valid and P7.hw_remark
    assert not P1.hw_valid
    assert SpaceParams(n=2, p=7, q=1, s=1, alpha=0.5).tilt == 0.0


def test_hw_gate_and_override():
    P = SpaceParams(n=1, p=4.5, q=1, s=1, alpha=0.5)  # p < 2 gamma = 5 but p > 2(q+ns) = 4
    with pytest.raises(ParameterError, match=re_escape("p>=2(n+1+alpha)")):
        fn.hw_euclid_at(Var(1), P, A0, CFG)
    est = fn.hw_euclid_at(Var(1), P, A0, CFG.with_samples(20_000), override_hw=True)
    assert math.isfinite(est.value)
    with pytest.raises(ParameterError, match=re_escape("p>2(q+ns)")):
        fn.hw_proj_at(Var(1), P1, A0, CFG, override_hw=True)


def test_centered_pullback_examples():
    assert fn.centered_pullback(Var(1), np.array([0.5]), np.array([0.25])) == pytest.approx(3 / 14)
    z = np.array([0.3, -0.2j])
    assert fn.centered_pullback(parse("z1*z2 + 4", 2), z, np.zeros(2)) == pytest.approx(0, abs=1e-15)
    assert fn.centered_pullback(Const(2), z, np.array([0.1, 0.5])) == 0


def test_n_norm_examples():
    assert fn.n_norm_at(Const(0), P1, A0, CFG).value == 0
    one = fn.n_norm_at(Const(1), P1, A0, CFG)
    assert one.value == pytest.approx(1.0, abs=1e-12)
    assert close(fn.n_norm_at(Var(1), P1, A0, CFG), 0.5)
    # |c|^p times the weight integral
    assert fn.n_norm_at(Const(3), P7, A0, CFG).value == pytest.approx(3**7, rel=1e-12)


def test_gradient_functional_examples():
    i1 = fn.gradient_functional_at(Var(1), P1, A0, K.I1_Grad, CFG)
    i3 = fn.gradient_functional_at(Var(1), P1, A0, K.I3_Radial, CFG)
    assert close(i1, 1 / 3)
    assert i3.value < i1.value
    for kind in fn.DERIVATIVE_KINDS:
        assert fn.gradient_functional_at(Const(5), P1, A0, kind, CFG).value == 0
    with pytest.raises(ParameterError):
        fn.gradient_functional_at(Var(1), P1, A0, K.NNorm, CFG)


@pytest.mark.parametrize("kind", ["NNorm", "I1_Grad", "I2_InvGrad", "I3_Radial"])
def test_outer_kinds_match_quadrature(kind):
    f = parse("z1^2 + 0.5*z1", 1)
    a = np.array([0.4 + 0.2j])
    est = fn.prepare(f, P1, K(kind), CFG).at(a)
    quad = oracles.outer_functional(f, kind, 2, 1, 1, a=a[0])
    assert close(est, quad, rel=0.01), (est, quad)


def test_d_alpha_matches_pair_quadrature():
    est = fn.d_alpha_at(Var(1), P1, A0, CFG)
    quad = oracles.pair_functional(Var(1), "DAlpha", 2, 1, 1, 0.5)
    assert close(est, quad, rel=0.01), (est, quad)


def test_difference_kinds_vanish_on_constants():
    for kind in fn.DIFFERENCE_KINDS:
        est = fn.prepare(Const(2 - 1j), P7, kind, CFG.with_samples(20_000)).at(A0)
        assert est.value == 0 and not est.diverged


def test_hw_euclid_is_seed_stable():
    a = fn.hw_euclid_at(Var(1), P7, A0, CFG)
    b = fn.hw_euclid_at(Var(1), P7, A0, CFG.with_seed(18))
    assert not a.diverged and not b.diverged
    assert abs(a.value - b.value) <= 3 * a.combined_sigma(b)


def test_hw_euclid_diverges_on_strong_kernel_power():
    f = parse("(1 - z1)^-3", 1)
    est = fn.hw_euclid_at(f, P7, A0, CFG)
    assert est.diverged
    t = est.truncated
    assert all(y > x for x, y in zip(t, t[1:]))


def test_projection_kernel_collapses_in_one_variable():
    f = parse("z1^3 - 2*z1", 1)
    e = fn.prepare(f, P7, K.HWEuclid, CFG).values
    p = fn.prepare(f, P7, K.HWProj, CFG).values
    np.testing.assert_allclose(p, e, rtol=1e-9, atol=0)


def test_kernel_dominance_on_shared_samples():
    f = parse("z1*z2 + z2^2", 2)
    P = SpaceParams(n=2, p=7, q=1, s=1, alpha=0.5)
    d = fn.prepare(f, P, K.DAlpha, CFG).values
    h = fn.prepare(f, P, K.HWProj, CFG).values
    assert np.all(d <= h * (1 + 1e-12) + 1e-300)


def test_mean_oscillation_examples():
    cfg = SamplerConfig(seed=4, n_samples=400_000)
    mo = fn.mean_oscillation(Var(1), np.zeros(1), 2, cfg)
    assert close(mo, math.sqrt(0.5))
    z = np.array([0.3 + 0.4j])
    f = parse("z1^2 - z1", 1)
    g = parse("z1^2 - z1 + 7", 1)
    assert fn.mean_oscillation(f, z, 3, cfg).value == pytest.approx(fn.mean_oscillation(g, z, 3, cfg).value, rel=1e-12)
    assert fn.mean_oscillation(Const(1), z, 2, cfg).value == 0
    with pytest.raises(ParameterError):
        fn.mean_oscillation(f, z, 0.5, cfg)


def test_mean_oscillation_fubini_path():
    j = fn.j_mean_osc_at(Var(1), P1, A0, CFG)
    d = fn.d_alpha_at(Var(1), P1, A0, CFG.with_seed(99), alpha=0.0)
    assert abs(j.value - d.value) <= 3 * j.combined_sigma(d)


def test_mean_oscillation_depends_on_a():
    f = parse("z1^2 + z2", 2)
    P = SpaceParams(n=2, p=2, q=1, s=1, alpha=0.5)
    table = fn.prepare(f, P, K.JMeanOsc, CFG)
    e0 = table.at(np.zeros(2))
    e9 = table.at(np.array([0.9, 0.0]))
    assert math.isfinite(e0.value) and math.isfinite(e9.value)
    assert abs(e0.value - e9.value) > 3 * e0.combined_sigma(e9)


def test_sup_of_zero_function():
    res = fn.sup_functional(Const(0), P7, K.NNorm, CFG.with_samples(10_000))
    assert res.value == 0 and np.allclose(res.a_star, 0)
    assert all(est.value == 0 for _, est in res.table)


def test_probe_table_is_symmetric_for_constants():
    P = SpaceParams(n=2, p=7, q=1, s=1, alpha=0.5)
    table = fn.prepare(Const(1), P, K.NNorm, CFG)
    rng = np.random.default_rng(2)
    for _ in range(5):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        a *= 0.8 / np.linalg.norm(a)
        x, y = table.at(a), table.at(-a)
        assert abs(x.value - y.value) <= 3 * x.combined_sigma(y)


def test_sup_for_polynomial_is_finite_in_every_kind():
    P = SpaceParams(n=2, p=7, q=1, s=1, alpha=0.5)
    cfg = CFG.with_samples(50_000)
    for kind in K:
        res = fn.sup_functional(Var(1), P, kind, cfg, budget=80)
        assert not res.diverged and math.isfinite(res.value), kind
        assert res.estimate.value == res.value


def test_sup_reuses_a_given_table():
    table = fn.prepare(Var(1), P7, K.NNorm, CFG)
    a = fn.sup_functional(Var(1), P7, K.NNorm, CFG, table=table, budget=80)
    b = fn.sup_functional(Var(1), P7, K.NNorm, CFG, budget=80)
    assert a.value == b.value


@pytest.mark.parametrize("kind", list(K))
def test_homogeneity(kind):
    f = parse("z1^2 - 0.5*z1 + 0.3", 1)
    g = parse("2*(z1^2 - 0.5*z1 + 0.3)", 1)
    cfg = CFG.with_samples(50_000)
    a = np.array([0.3j])
    x = fn.prepare(f, P7, kind, cfg).at(a).value
    y = fn.prepare(g, P7, kind, cfg).at(a).value
    assert y / x == pytest.approx(2**7, rel=1e-9)


def test_boundary_peak_finds_the_singular_direction():
    f = parse("(1 - dot(z,[0, 1i]))^-1", 2)
    peak = fn.boundary_peak(f, 2)
    np.testing.assert_allclose(np.abs(peak), [0, 1], atol=0.05)
    assert fn.boundary_peak(Var(1), 2) is None
