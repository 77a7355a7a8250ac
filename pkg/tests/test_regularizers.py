import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regret_forge.core import DomainSpec
from regret_forge.regularizers import (
    AdaGradState,
    EntropyRegularizer,
    QuadraticRegularizer,
    RateSchedule,
    ZeroRegularizer,
    alpha_exact,
    phi_eval,
    phi_inf,
    psd_sqrt,
    quadratic_diag,
    timeless_rate,
)


def test_entropy_uniform_value():
    reg = EntropyRegularizer(lambda t: 1.0, 2)
    assert math.isclose(phi_eval(reg, 0, [0.5, 0.5]), -math.log(2), rel_tol=1e-15)


def test_entropy_vertex_is_zero():
    reg = EntropyRegularizer(lambda t: 1.0, 2)
    assert phi_eval(reg, 3, [1.0, 0.0]) == 0.0


def test_entropy_outside_simplex():
    reg = EntropyRegularizer(lambda t: 1.0, 2)
    with pytest.raises(ValueError):
        phi_eval(reg, 0, [0.7, 0.7])


def test_quadratic_diag_value():
    reg = quadratic_diag(1.0, 2.0, 2)
    assert phi_eval(reg, 0, [1.0, 1.0]) == 0.5


def test_entropy_inf():
    reg = EntropyRegularizer(lambda t: 1.0, 4)
    assert math.isclose(phi_inf(reg, 0, DomainSpec.simplex(4)), -math.log(4), rel_tol=1e-15)


def test_quadratic_inf_zero_feasible():
    reg = quadratic_diag(1.0, 1.0, 3)
    assert phi_inf(reg, 0, DomainSpec.box([-1] * 3, [1] * 3)) == 0.0


def test_quadratic_inf_clipped_corner():
    reg = quadratic_diag(1.0, 1.0, 2)
    box = DomainSpec.box([1, 1], [2, 2])
    assert math.isclose(phi_inf(reg, 0, box), 1.0)
    full = QuadraticRegularizer(1.0, np.eye(2)[None], variant="full")
    assert math.isclose(phi_inf(full, 0, box), 1.0, rel_tol=1e-9)


def test_alpha_constant_is_zero():
    reg = EntropyRegularizer(lambda t: 0.3, 3)
    for w in ([1 / 3] * 3, [1, 0, 0], [0.2, 0.3, 0.5]):
        assert alpha_exact(reg, 5, w) == 0.0


def test_alpha_inverse_sqrt_uniform():
    reg = EntropyRegularizer(lambda t: 1.0 / math.sqrt(t) if t else 1.0, 2)
    want = (math.sqrt(2) - 1) * (-math.log(2))
    assert math.isclose(alpha_exact(reg, 2, [0.5, 0.5]), want, rel_tol=1e-14)
    assert math.isclose(want, -0.287111, abs_tol=1e-6)


def test_alpha_quadratic_one_gradient():
    reg = QuadraticRegularizer.from_gradients("diagonal", [[1.0, 0.0]], 1.0, 1.0)
    assert math.isclose(alpha_exact(reg, 1, [1.0, 0.0]), 0.5)


def test_zero_regularizer():
    z = ZeroRegularizer()
    assert phi_eval(z, 4, [0.2, 0.8]) == 0.0
    assert alpha_exact(z, 4, [0.2, 0.8]) == 0.0


def test_quadratic_not_pd():
    reg = QuadraticRegularizer(1.0, np.array([[1.0, -1.0]]))
    with pytest.raises(ValueError):
        phi_eval(reg, 0, [1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.lists(st.floats(0.01, 1), min_size=2, max_size=6))
def test_monotone_entropy_increments(t, raw):
    w = np.array(raw) / sum(raw)
    reg = EntropyRegularizer(lambda s: 1.0 / math.sqrt(s + 1), len(w))
    assert alpha_exact(reg, t, w) <= 0.0


def test_schedule_presets():
    assert RateSchedule("constant", 0.5).rate(10) == 0.5
    assert math.isclose(RateSchedule("paper-sec6").rate(4), 0.5)
    s = RateSchedule("decreasing-hedge-std", 1.0, d=10)
    assert math.isclose(s.rate(3), math.sqrt(math.log(10) / 3))
    assert RateSchedule.parse("decreasing").scale == 2.0
    assert RateSchedule.parse("sec6:0.5").scale == 0.5
    with pytest.raises(ValueError):
        RateSchedule.parse("bogus")
    with pytest.raises(ValueError):
        RateSchedule("constant", -1.0)
    with pytest.raises(ValueError):
        RateSchedule("table", table=(0.5, 0.6))


@pytest.mark.parametrize("spec", ["constant:0.3", "inverse-sqrt", "decreasing:1", "paper-sec6", "decreasing"])
@pytest.mark.parametrize("d", [2, 7])
def test_rates_positive_nonincreasing(spec, d):
    r = RateSchedule.parse(spec, d).rates(500)
    assert np.all(r > 0) and np.all(np.diff(r) <= 0)
    assert len(r) == 501


def test_timeless_rate_examples():
    assert math.isclose(timeless_rate(0, 2), -math.log(0.75))
    assert math.isclose(timeless_rate(0, 2), 0.287682, abs_tol=1e-6)
    assert math.isclose(timeless_rate(32 * math.log(2), 2), -math.log(0.75), rel_tol=1e-12)
    for L in (1e3, 1e6, 1e9):
        r = timeless_rate(L, 2)
        assert 0 < r and r >= math.sqrt(2 * math.log(2) / L)
    assert timeless_rate(1e12, 2) < 1e-5


def test_adagrad_state_diagonal():
    st_ = AdaGradState("diagonal", 2, 1.0)
    st_.update([3.0, 0.0]).update([4.0, 1.0])
    np.testing.assert_allclose(st_.grad_sq_sums, [25.0, 1.0])
    np.testing.assert_allclose(st_.H(), [6.0, 2.0])


def test_adagrad_state_full_and_trace_monotone():
    rng = np.random.default_rng(3)
    st_ = AdaGradState("full", 4, 0.5)
    prev = 0.0
    G = np.zeros((4, 4))
    for _ in range(30):
        g = rng.normal(size=4)
        G += np.outer(g, g)
        st_.update(g)
        S = st_.H() - 0.5 * np.eye(4)
        np.testing.assert_allclose(S @ S, G, rtol=1e-8, atol=1e-10)
        assert st_.trace_sqrt >= prev - 1e-12
        prev = st_.trace_sqrt


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    G = np.array([[2.0, 1.0], [1.0, 2.0]])
    S = psd_sqrt(G)
    assert np.linalg.norm(S @ S - G) / np.linalg.norm(G) < 1e-8
    # eigenvalues 1 and 3 along (1,-1) and (1,1)
    a, b = (1 + math.sqrt(3)) / 2, (math.sqrt(3) - 1) / 2
    np.testing.assert_allclose(S, [[a, b], [b, a]], atol=1e-12)


def test_psd_sqrt_errors():
    with pytest.raises(ValueError):
        psd_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        psd_sqrt(np.eye(65))
    # tiny negative eigenvalue is clamped
    S = psd_sqrt(np.diag([1.0, -1e-13]))
    np.testing.assert_allclose(S, np.diag([1.0, 0.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_psd_sqrt_of_square(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d))
    S = A @ A.T
    R = psd_sqrt(S @ S)
    assert np.abs(R - S).max() <= 1e-7 * max(1.0, np.abs(S).max())


def test_psd_sqrt_rank_deficient():
    g = np.array([1.0, 2.0, 2.0])
    G = np.outer(g, g)
    S = psd_sqrt(G)
    np.testing.assert_allclose(S, G / 3.0, atol=1e-12)
