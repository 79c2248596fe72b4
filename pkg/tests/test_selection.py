import math

import numpy as np
import pytest
from scipy.stats import norm

from orbmeta.selection import (
    SelectionSpec,
    eval_weight,
    p_value,
    parse_spec,
    weight_as_function_of_y,
    weight_breakpoints,
)

DEFAULT_SPECS = ("A", "B:3", "C:3", "D:1.5:7", "D:7:1.5", "DGM:1.5")


class TestPValue:
    def test_zero_effect_is_half(self):
        assert p_value(0.0, 1.0, "one") == pytest.approx(0.5, abs=1e-15)

    def test_one_sided_quantile(self):
        assert p_value(1.6449, 1.0, "one") == pytest.approx(0.05, abs=1e-4)

    def test_two_sided_quantile(self):
        assert p_value(1.96, 1.0, "two") == pytest.approx(0.05, abs=1e-4)

    def test_matches_normal_cdf(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            y, sigma = rng.normal(), rng.uniform(0.1, 3.0)
            assert p_value(y, sigma, "one") == pytest.approx(
                float(norm.cdf(-y / sigma)), abs=1e-14
            )
            assert p_value(y, sigma, "two") == pytest.approx(
                2 * (1 - float(norm.cdf(abs(y / sigma)))), abs=1e-14
            )

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            p_value(0.5, 0.0)


class TestEvalWeight:
    def test_step_function(self):
        spec = SelectionSpec("A")
        assert eval_weight(spec, 0.05) == 1.0  # inclusive at the threshold
        assert eval_weight(spec, 0.050001) == 0.0
        assert eval_weight(spec, 0.0) == 1.0

    def test_b_power_tail(self):
        spec = SelectionSpec("B", beta=3.0)
        assert eval_weight(spec, 0.1) == pytest.approx(0.125, abs=1e-12)
        assert eval_weight(spec, 0.04) == 1.0

    def test_c_below_threshold(self):
        spec = SelectionSpec("C", gamma=3.0)
        assert eval_weight(spec, 0.025) == pytest.approx(0.875, abs=1e-12)
        assert eval_weight(spec, 0.06) == 0.0

    def test_d_at_threshold_is_omega(self):
        for beta, gamma in ((1.5, 7.0), (7.0, 1.5)):
            spec = SelectionSpec("D", beta=beta, gamma=gamma)
            assert eval_weight(spec, 0.05) == pytest.approx(0.5, abs=1e-12)

    def test_dgm_endpoints(self):
        spec = SelectionSpec("DGM", gamma=1.5)
        assert eval_weight(spec, 0.0) == 1.0
        assert eval_weight(spec, 1.0) == pytest.approx(math.exp(-4.0), abs=1e-12)

    def test_vectorized_matches_scalar(self):
        spec = parse_spec("D:1.5:7")
        ps = np.linspace(0.0, 1.0, 57)
        vec = eval_weight(spec, ps)
        scal = np.array([eval_weight(spec, float(p)) for p in ps])
        np.testing.assert_allclose(vec, scal, rtol=0, atol=0)

    def test_out_of_range_p_rejected(self):
        with pytest.raises(ValueError):
            eval_weight(SelectionSpec("A"), 1.2)

    @pytest.mark.parametrize("token", DEFAULT_SPECS)
    def test_monotone_nonincreasing(self, token):
        spec = parse_spec(token)
        grid = np.linspace(0.0, 1.0, 2001)
        w = eval_weight(spec, grid)
        assert np.all(np.diff(w) <= 1e-12)

    @pytest.mark.parametrize("token", DEFAULT_SPECS)
    def test_range(self, token):
        spec = parse_spec(token)
        grid = np.linspace(0.0, 1.0, 2001)
        w = eval_weight(spec, grid)
        assert np.all(w >= 0.0) and np.all(w <= 1.0)

    def test_boundary_continuity(self):
        a = 0.05
        eps = 1e-9
        # B continuous at alpha: both pieces equal 1
        spec_b = SelectionSpec("B", beta=3.0)
        assert eval_weight(spec_b, a) == 1.0
        assert eval_weight(spec_b, a + eps) == pytest.approx(1.0, abs=1e-6)
        # D continuous at alpha: both pieces equal omega_alpha
        spec_d = SelectionSpec("D", beta=2.0, gamma=3.0, omega_alpha=0.5)
        assert eval_weight(spec_d, a) == pytest.approx(0.5, abs=1e-12)
        assert eval_weight(spec_d, a + eps) == pytest.approx(0.5, abs=1e-6)
        # A jumps by 1; C meets 0 from both sides
        spec_a = SelectionSpec("A")
        assert eval_weight(spec_a, a) - eval_weight(spec_a, a + eps) == 1.0
        spec_c = SelectionSpec("C", gamma=3.0)
        assert eval_weight(spec_c, a) == pytest.approx(0.0, abs=1e-7)
        assert eval_weight(spec_c, a + eps) == 0.0


class TestWeightAsFunctionOfY:
    def test_step_one_sided(self):
        w = weight_as_function_of_y(SelectionSpec("A"), 1.0)
        assert w(2.0) == 1.0  # p = 0.023 <= 0.05
        assert w(0.0) == 0.0  # p = 0.5

    def test_dgm_limit(self):
        w = weight_as_function_of_y(SelectionSpec("DGM", gamma=1.5), 1.0)
        assert w(40.0) == pytest.approx(1.0, abs=1e-12)

    def test_composition_matches_two_call_paths(self):
        spec = SelectionSpec("B", beta=3.0)
        w = weight_as_function_of_y(spec, 2.0)
        for y in (-1.5, 0.0, 0.7, 3.0, 5.0):
            p = p_value(y, 2.0, "one")
            assert w(y) == pytest.approx(eval_weight(spec, p), abs=1e-14)


class TestSpecParsing:
    def test_round_trip_labels(self):
        for token in ("A", "B:3", "C:3", "D:1.5:7", "D:7:1.5", "DGM:1.5", "A@two"):
            assert parse_spec(token).label() == token

    def test_d_order_is_beta_gamma(self):
        spec = parse_spec("D:1.5:7")
        assert spec.beta == 1.5 and spec.gamma == 7.0

    def test_two_sided_suffix(self):
        spec = parse_spec("B:2@two")
        assert spec.p_side == "two" and spec.beta == 2.0

    def test_rejects_garbage(self):
        for bad in ("E", "B", "D:1", "DGM", "B:0", "A:1", ""):
            with pytest.raises(ValueError):
                parse_spec(bad)

    def test_alpha_passthrough(self):
        assert parse_spec("A", alpha=0.1).alpha == 0.1

    def test_missing_parameters_rejected(self):
        with pytest.raises(ValueError):
            SelectionSpec("B")
        with pytest.raises(ValueError):
            SelectionSpec("D", beta=1.0)
        with pytest.raises(ValueError):
            SelectionSpec("DGM")


class TestBreakpoints:
    def test_one_sided_single_breakpoint(self):
        (bp,) = weight_breakpoints(SelectionSpec("A"), 2.0)
        assert bp == pytest.approx(2.0 * 1.6448536269514722, abs=1e-9)

    def test_two_sided_symmetric(self):
        lo, hi = weight_breakpoints(SelectionSpec("A", p_side="two"), 1.0)
        assert lo == pytest.approx(-hi, abs=1e-12)
        assert hi == pytest.approx(1.959963984540054, abs=1e-9)

    def test_dgm_smooth(self):
        assert weight_breakpoints(SelectionSpec("DGM", gamma=0.5), 1.0) == ()
