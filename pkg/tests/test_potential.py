"""Built-in potentials: analytic values, declared constants, validators."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ulamix.potential import (
    CheckReport,
    PotentialSpec,
    builtin,
    check_dissipative,
    check_lower_envelope,
    check_mixture_smooth,
    check_origin_stationary,
    descent_upper_bound,
    lower_envelope,
)

# name, dim, params for every registry entry exercised below
BUILTIN_CASES = [
    ("gaussian", 1, {}),
    ("gaussian", 2, {}),
    ("power", 1, {"alpha": 0.5}),
    ("power", 2, {"alpha": 0.5}),
    ("gauss_plus_power", 2, {"alpha": 0.5}),
    ("gaussian_mixture_2", 1, {"m": 2.0}),
    ("gaussian_mixture_2", 2, {"m": 2.0}),
    ("pseudo_huber", 2, {}),
]


def _case_id(case):
    name, dim, params = case
    extra = ",".join(f"{k}={v}" for k, v in params.items())
    return f"{name}-d{dim}" + (f"-{extra}" if extra else "")


@pytest.fixture(params=BUILTIN_CASES, ids=_case_id)
def any_builtin(request):
    name, dim, params = request.param
    return builtin(name, dim, params)


class TestRegistry:
    def test_gaussian_is_identity_quadratic(self):
        spec = builtin("gaussian", 2)
        x = np.array([1.5, -0.5])
        assert spec.value(x) == pytest.approx(0.5 * (1.5**2 + 0.25), rel=1e-14)
        np.testing.assert_allclose(spec.grad(x), x, rtol=1e-14)
        assert spec.smooth_terms == ((1.0, 1.0),)
        assert spec.dissip == (1.0, 0.0, 2.0)
        assert spec.poincare_gamma == 1.0

    def test_power_gradient_and_constants(self):
        spec = builtin("power", 1, {"alpha": 0.5})
        assert spec.grad(np.array([0.25]))[0] == pytest.approx(0.5, rel=1e-14)
        assert spec.L == pytest.approx(2.0**0.5, rel=1e-15)
        assert spec.dissip == (1.0, 0.0, 1.5)

    def test_power_subgradient_at_origin(self):
        spec = builtin("power", 2, {"alpha": 0.5})
        np.testing.assert_array_equal(spec.grad(np.zeros(2)), np.zeros(2))

    def test_pseudo_huber_constants(self):
        spec = builtin("pseudo_huber", 2)
        assert spec.smooth_terms == ((1.0, 1.0),)
        assert spec.dissip == (0.5, 1.0, 1.0)
        x = np.array([3.0, 4.0])
        assert spec.value(x) == pytest.approx(math.sqrt(26.0), rel=1e-14)

    def test_mixture_matches_two_component_log_density(self):
        spec = builtin("gaussian_mixture_2", 1, {"m": 2.0})

        def direct(x):
            return -np.log(np.exp(-((x - 2) ** 2) / 2) + np.exp(-((x + 2) ** 2) / 2))

        xs = np.linspace(-5, 5, 41)
        vals = np.array([spec.value(np.array([x])) for x in xs])
        ref = direct(xs)
        # defined up to an additive constant
        np.testing.assert_allclose(vals - vals[0], ref - ref[0], atol=1e-10)

    def test_mixture_origin_gradient_vanishes_by_symmetry(self):
        spec = builtin("gaussian_mixture_2", 1, {"m": 2.0})
        assert abs(spec.grad(np.zeros(1))[0]) <= 1e-12

    def test_mixture_value_finite_far_out(self):
        # log-cosh must not overflow
        spec = builtin("gaussian_mixture_2", 1, {"m": 2.0})
        assert np.isfinite(spec.value(np.array([500.0])))
        assert np.isfinite(spec.grad(np.array([-500.0]))[0])

    def test_mixture_constants(self):
        spec = builtin("gaussian_mixture_2", 1, {"m": 2.0})
        assert spec.L == pytest.approx(1.0 + 4.0, rel=1e-15)
        assert spec.dissip == (0.5, 8.0, 2.0)
        assert spec.convexity_radius == pytest.approx(math.acosh(2.0) / 2.0)
        assert builtin("gaussian_mixture_2", 2, {"m": 2.0}).convexity_radius is None
        assert builtin("gaussian_mixture_2", 1, {"m": 0.5}).convexity_radius == 0.0

    def test_gauss_plus_power_terms_sorted(self):
        spec = builtin("gauss_plus_power", 2, {"alpha": 0.5})
        alphas = [a for (_, a) in spec.smooth_terms]
        assert alphas == sorted(alphas)
        assert spec.n_terms == 2
        assert spec.alpha == 0.5

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            builtin("cauchy", 1)

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            builtin("power", 1, {"alpha": 1.5})
        with pytest.raises(ValueError):
            builtin("power", 1, {"alpha": 0.0})


class TestSpecValidation:
    def test_unsorted_exponents_rejected(self):
        with pytest.raises(ValueError):
            PotentialSpec(
                dim=1,
                value=lambda x: 0.0,
                grad=lambda x: np.zeros(1),
                smooth_terms=[(1.0, 1.0), (1.0, 0.5)],
                dissip=(1.0, 0.0, 2.0),
            )

    def test_exponent_out_of_range_rejected(self):
        for bad in (0.0, 1.5, -0.2):
            with pytest.raises(ValueError):
                PotentialSpec(
                    dim=1,
                    value=lambda x: 0.0,
                    grad=lambda x: np.zeros(1),
                    smooth_terms=[(1.0, bad)],
                    dissip=(1.0, 0.0, 2.0),
                )

    def test_report_consistency_enforced(self):
        with pytest.raises(ValueError):
            CheckReport("MixtureSmooth", passed=True, worst_ratio=2.0, witness=None)

    @given(ratio=st.floats(min_value=0.0, max_value=10.0, allow_nan=False))
    def test_report_pass_iff_ratio_at_most_one(self, ratio):
        rep = CheckReport("Dissipative", passed=ratio <= 1.0, worst_ratio=ratio, witness=None)
        assert rep.passed == (rep.worst_ratio <= 1.0)

    def test_eligibility_predicates(self):
        g = builtin("gaussian", 1)
        assert g.eligibility() == {"two_alpha_le_beta": True, "two_alpha_sq_le_beta": True}
        ph = builtin("pseudo_huber", 1)
        assert ph.eligibility()["two_alpha_le_beta"] is False
        assert ph.eligibility()["two_alpha_sq_le_beta"] is False
        pw = builtin("power", 1, {"alpha": 0.5})
        assert pw.eligibility()["two_alpha_le_beta"] is True


class TestGradientConsistency:
    def test_grad_matches_central_differences(self, any_builtin, rng):
        spec = any_builtin
        h = 1e-5
        for _ in range(20):
            x = rng.uniform(-4, 4, size=spec.dim)
            if np.linalg.norm(x) < 0.3:
                x = x + 0.5  # keep away from the non-differentiable origin
            g = np.asarray(spec.grad(x), dtype=float)
            fd = np.empty(spec.dim)
            for j in range(spec.dim):
                e = np.zeros(spec.dim)
                e[j] = h
                fd[j] = (spec.value(x + e) - spec.value(x - e)) / (2 * h)
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


class TestValidators:
    def test_declared_constants_pass(self, any_builtin):
        spec = any_builtin
        smooth = check_mixture_smooth(spec, n_pairs=10**4, radius=10.0, seed=0)
        dissip = check_dissipative(spec, n_points=10**4, radius=10.0, seed=1)
        assert smooth.passed, f"worst_ratio={smooth.worst_ratio}"
        assert dissip.passed, f"worst_ratio={dissip.worst_ratio}"

    def test_envelope_and_origin_reports_pass(self, any_builtin):
        spec = any_builtin
        env = check_lower_envelope(spec, n_points=10**4, radius=10.0, seed=2)
        assert env.passed, f"worst_ratio={env.worst_ratio}"
        org = check_origin_stationary(spec)
        assert org.passed

    def test_understated_holder_constant_fails_with_witness(self):
        base = builtin("gaussian", 2)
        claimed = PotentialSpec(
            dim=2,
            value=base.value,
            grad=base.grad,
            smooth_terms=[(0.5, 1.0)],
            dissip=base.dissip,
        )
        rep = check_mixture_smooth(claimed, n_pairs=200, radius=5.0, seed=0)
        assert not rep.passed
        assert rep.worst_ratio > 1.0
        assert rep.witness is not None

    def test_overstated_dissipativity_fails(self):
        base = builtin("gaussian", 2)
        claimed = PotentialSpec(
            dim=2,
            value=base.value,
            grad=base.grad,
            smooth_terms=base.smooth_terms,
            dissip=(2.0, 0.0, 2.0),
        )
        rep = check_dissipative(claimed, n_points=200, radius=5.0, seed=0)
        assert not rep.passed

    def test_gaussian_smoothness_ratio_is_tight(self):
        # equality case: ||x-y|| = L ||x-y||
        rep = check_mixture_smooth(builtin("gaussian", 2), n_pairs=500, radius=5.0, seed=3)
        assert rep.worst_ratio == pytest.approx(1.0, rel=1e-12)

    def test_power_holder_constant_on_dense_grid(self):
        # sup over a dense pair grid of ||grad(x)-grad(y)|| / (L |x-y|^alpha)
        spec = builtin("power", 1, {"alpha": 0.5})
        xs = np.linspace(-5, 5, 401)
        g = np.sign(xs) * np.sqrt(np.abs(xs))
        num = np.abs(g[:, None] - g[None, :])
        den = spec.L * np.abs(xs[:, None] - xs[None, :]) ** 0.5
        mask = den > 0
        assert np.max(num[mask] / den[mask]) <= 1.0 + 1e-12

    def test_pseudo_huber_dissipativity_on_grid(self):
        xs = np.linspace(-100, 100, 20001)
        lhs = xs**2 / np.sqrt(1 + xs**2)
        rhs = 0.5 * np.abs(xs) - 1.0
        assert np.min(lhs - rhs) >= 0.0

    def test_validator_seeds_are_reproducible(self):
        spec = builtin("gauss_plus_power", 2, {"alpha": 0.5})
        a = check_mixture_smooth(spec, n_pairs=100, radius=8.0, seed=7)
        b = check_mixture_smooth(spec, n_pairs=100, radius=8.0, seed=7)
        assert a.worst_ratio == b.worst_ratio


class TestEnvelopeAndDescent:
    def test_gaussian_envelope_closed_form(self):
        spec = builtin("gaussian", 2)
        x = np.array([1.0, -2.0])
        # b=0 collapses the correction terms
        assert lower_envelope(spec, x) == pytest.approx(np.dot(x, x) / 4.0, rel=1e-12)

    def test_pseudo_huber_envelope_at_origin(self):
        spec = builtin("pseudo_huber", 1)
        # a/2beta*0 + U(0) - L/(alpha+1) R^2 - b/beta with R = (2b/a)^(1/beta) = 4
        assert lower_envelope(spec, np.zeros(1)) == pytest.approx(1.0 - 8.0 - 1.0, rel=1e-12)

    def test_envelope_below_potential_everywhere(self, any_builtin, rng):
        spec = any_builtin
        xs = rng.uniform(-10, 10, size=(10**4, spec.dim))
        vals = np.array([spec.value(x) for x in xs])
        envs = np.array([lower_envelope(spec, x) for x in xs])
        assert np.all(vals >= envs - 1e-9)

    def test_descent_upper_bound_on_random_pairs(self, any_builtin, rng):
        spec = any_builtin
        xs = rng.uniform(-6, 6, size=(10**4, spec.dim))
        ys = rng.uniform(-6, 6, size=(10**4, spec.dim))
        for x, y in zip(xs[:200], ys[:200]):
            assert spec.value(y) <= descent_upper_bound(spec, x, y) + 1e-9
        # vectorized sweep over the full batch
        bounds = np.array([descent_upper_bound(spec, x, y) for x, y in zip(xs, ys)])
        vals = np.array([spec.value(y) for y in ys])
        assert np.all(vals <= bounds + 1e-9)

    @given(t=st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
    def test_envelope_property_1d(self, t):
        spec = builtin("gaussian_mixture_2", 1, {"m": 2.0})
        x = np.array([t])
        assert spec.value(x) >= lower_envelope(spec, x) - 1e-9
