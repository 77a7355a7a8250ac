import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regret_forge import bounds
from regret_forge.adversary import canonical, piecewise_outcomes, random_dtol
from regret_forge.core import DomainSpec, LossSequence, ModeError
from regret_forge.engines import (
    ConvexLossOracle,
    ForecastState,
    HedgeLearner,
    best_fixed_point,
    eg_forecast,
    ftrl_residual,
    ftrl_solve,
    hedge_weights,
    run_adagrad_ftrl,
    run_ftrl,
    run_hedge,
    run_linearized_eg,
)
from regret_forge.regularizers import (
    EntropyRegularizer,
    QuadraticRegularizer,
    RateSchedule,
    ZeroRegularizer,
    quadratic_diag,
)
from regret_forge.transform import dh_regret


def test_hedge_weights_equal_losses():
    for s in (RateSchedule("constant", 3.0), RateSchedule("paper-sec6"), None):
        np.testing.assert_allclose(hedge_weights(s, [0.0, 0.0], 1), [0.5, 0.5])


def test_hedge_weights_rate_one():
    w = hedge_weights(RateSchedule("constant", 1.0), [0.0, 1.0], 5)
    np.testing.assert_allclose(w, [1 / (1 + math.exp(-1)), 1 / (1 + math.e)], rtol=1e-14)
    assert math.isclose(w[0], 0.731059, abs_tol=1e-6)


def test_hedge_weights_sec6_round2():
    w = hedge_weights(RateSchedule("paper-sec6"), [0.0, 1.0], 2)
    assert math.isclose(w[0], 1 / (1 + math.exp(-1 / math.sqrt(2))), rel_tol=1e-14)
    assert math.isclose(w[0], 0.669762, abs_tol=1e-6)


def test_hedge_weights_overflow_safe():
    w = hedge_weights(RateSchedule("constant", 1.0), [1e6, 1e6 + 1, 2e6], 1)
    assert abs(w.sum() - 1) < 1e-12 and np.all(np.isfinite(w))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=6), st.floats(-50, 50), st.integers(1, 100))
def test_hedge_weight_shift_invariance(L, c, t):
    s = RateSchedule("inverse-sqrt", 1.3)
    a = hedge_weights(s, L, t)
    b = hedge_weights(s, np.array(L) + c, t)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_run_hedge_all_zero():
    seq = LossSequence(np.zeros((20, 3)), "binary")
    for s in (RateSchedule("decreasing"), RateSchedule("constant", 0.4), None):
        assert run_hedge(s, seq).regret == 0.0


def test_run_hedge_rejects_general():
    with pytest.raises(ModeError):
        run_hedge(RateSchedule("constant"), LossSequence(np.array([[-1.0, 2.0]]), "general"))


def test_run_hedge_matches_streaming_learner():
    seq = random_dtol(200, 4, binary=False, seed=5)
    for s in (RateSchedule("decreasing", d=4), RateSchedule("timeless", d=4), None):
        traj = run_hedge(s, seq)
        h = HedgeLearner(s, 4)
        pts = []
        for loss in seq.losses:
            pts.append(h.weights())
            h.update(loss)
        np.testing.assert_allclose(traj.points, pts, atol=1e-12)
        assert abs(h.ledger.algo_cum - traj.ledger.algo_cum) < 1e-9


def test_constant_rate_nonnegative_prefix():
    for seed in range(20):
        seq = random_dtol(300, 3, seed=seed)
        assert run_hedge(RateSchedule("constant", 0.8), seq).regret_series.min() >= -1e-9


def test_canonical16_agrees_with_transform_evaluator():
    traj = run_hedge(RateSchedule("paper-sec6"), canonical(16))
    assert traj.regret < 0
    assert abs(traj.regret - dh_regret(canonical(16))) <= 1e-12


def test_trajectory_csv_columns():
    traj = run_hedge(RateSchedule("constant"), random_dtol(3, 2, seed=1))
    lines = traj.to_csv().split("\n")
    assert lines[0] == "round,w1,w2,algo_loss,regret_prefix"
    assert len([x for x in lines if x]) == 4
    empty = run_hedge(RateSchedule("constant"), LossSequence(np.zeros((0, 2)), "binary"))
    assert empty.to_csv() == "round,w1,w2,algo_loss,regret_prefix\n"


def test_oracle_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 3))
    f = ConvexLossOracle.quadratic(M @ M.T, rng.normal(size=3), 0.3)
    g = ConvexLossOracle.black_box(lambda w: float(np.sum(np.exp(w))), lambda w: np.exp(w))
    for oracle in (f, g, ConvexLossOracle.linear([1.0, -2.0, 0.5])):
        for _ in range(5):
            w = rng.uniform(-1, 1, size=3)
            h = 1e-6
            fd = np.array([(oracle.value(w + h * e) - oracle.value(w - h * e)) / (2 * h) for e in np.eye(3)])
            np.testing.assert_allclose(oracle.grad(w), fd, rtol=1e-5, atol=1e-7)


def test_ftrl_no_losses_entropy_is_uniform():
    w = ftrl_solve([], EntropyRegularizer(lambda t: 1.0, 4), 0, DomainSpec.simplex(4))
    np.testing.assert_allclose(w, 0.25)


def test_ftrl_unconstrained_quadratic():
    g = np.array([0.3, -0.2])
    sched = quadratic_diag(1.0, 2.0, 2)
    box = DomainSpec.box([-10, -10], [10, 10])
    np.testing.assert_allclose(ftrl_solve([ConvexLossOracle.linear(g)], sched, 0, box), -2.0 * g)
    full = QuadraticRegularizer(2.0, np.eye(2)[None], variant="full")
    np.testing.assert_allclose(ftrl_solve([ConvexLossOracle.linear(g)], full, 0, box), -2.0 * g, atol=1e-10)


def test_ftrl_two_quadratics_vs_grid():
    f1 = ConvexLossOracle.quadratic([[2.0, 0.5], [0.5, 1.0]], [-1.5, 0.4])
    f2 = ConvexLossOracle.quadratic([[1.0, 0.0], [0.0, 3.0]], [0.2, -2.5])
    box = DomainSpec.box([0, 0], [1, 1])
    sched = quadratic_diag(1.0, 1.0, 2)
    w = ftrl_solve([f1, f2], sched, 0, box, tol=1e-10)
    xs = np.linspace(0, 1, 1000)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = 0.5 * np.einsum("ni,ij,nj->n", P, f1.A + f2.A + np.eye(2), P) + P @ (f1.b + f2.b)
    best = P[np.argmin(vals)]
    np.testing.assert_allclose(w, best, atol=1e-3)
    obj = lambda v: f1.value(v) + f2.value(v) + sched.value(0, v)  # noqa: E731
    assert obj(w) <= vals.min() + 1e-4


def test_ftrl_black_box_entropy():
    f = ConvexLossOracle.black_box(lambda w: float(np.sum((w - 0.1) ** 2)), lambda w: 2 * (w - 0.1))
    sched = EntropyRegularizer(lambda t: 0.5, 3)
    dom = DomainSpec.simplex(3)
    w = ftrl_solve([f, ConvexLossOracle.linear([0.3, 0.0, 0.1])], sched, 0, dom)
    assert ftrl_residual([f, ConvexLossOracle.linear([0.3, 0.0, 0.1])], sched, 0, dom, w) < 1e-8


def _optimality(losses, sched, domain, w, rng, tol=1e-8):
    g = sum(f.grad(w) for f in losses) if losses else np.zeros(domain.d)
    if isinstance(sched, QuadraticRegularizer):
        H = sched.H_at(0)
        Hm = np.diag(H) if sched.variant == "diagonal" else H
        g = g + Hm @ (w - sched.center) / sched.eta
    for _ in range(100):
        if domain.kind == "simplex":
            v = rng.dirichlet(np.ones(domain.d))
        else:
            v = rng.uniform(domain.lower, domain.upper)
        assert g @ (v - w) >= -tol * np.linalg.norm(v - w)


def test_ftrl_optimality_certificate():
    rng = np.random.default_rng(2)
    box = DomainSpec.box([-0.5, 0, -1], [0.5, 2, 0.2])
    losses = [ConvexLossOracle.quadratic(np.diag(rng.uniform(0, 1, 3)), rng.normal(size=3)) for _ in range(4)]
    for sched in (quadratic_diag(0.7, 1.5, 3), QuadraticRegularizer(1.5, np.array([[[2, 0.3, 0], [0.3, 1, 0], [0, 0, 1]]]))):
        w = ftrl_solve(losses, sched, 0, box)
        _optimality(losses, sched, box, w, rng)
    sx = DomainSpec.simplex(3)
    lin = [ConvexLossOracle.linear(rng.uniform(size=3)) for _ in range(3)]
    w = ftrl_solve(lin + losses[:1], ZeroRegularizer(), 0, sx)
    _optimality(lin + losses[:1], ZeroRegularizer(), sx, w, rng, tol=1e-6)


def test_adagrad_one_dim_hand_solution():
    dom = DomainSpec.box([-1.0], [1.0], grad_bound_inf=1.0, grad_bound_2=1.0)
    for T in (2, 5, 40):
        losses = [ConvexLossOracle.linear([1.0])] * T
        for variant in ("diagonal", "full"):
            traj = run_adagrad_ftrl(variant, losses, dom, eta=2.0, delta=1.0)
            assert traj.points[0, 0] == 0.0
            np.testing.assert_allclose(traj.points[1:, 0], -1.0, atol=1e-12)
            assert math.isclose(traj.regret, 1.0, abs_tol=1e-12)


def test_adagrad_zero_losses():
    dom = DomainSpec.box([-1, -1], [1, 2], grad_bound_inf=1.0, grad_bound_2=1.0)
    traj = run_adagrad_ftrl("diagonal", [ConvexLossOracle.linear([0.0, 0.0])] * 10, dom, 1.0, 1.0)
    assert np.all(traj.points == 0.0) and traj.regret == 0.0


def test_adagrad_random_sandwich():
    rng = np.random.default_rng(9)
    dom = DomainSpec.box([-1, -0.5, -0.2], [0.3, 1, 0.8], grad_bound_inf=1.0, grad_bound_2=math.sqrt(3))
    g = rng.uniform(-1, 1, size=(500, 3))
    losses = [ConvexLossOracle.linear(x) for x in g]
    for variant, eta, delta in (("diagonal", dom.diameter_inf, 1.0), ("full", dom.diameter_2, math.sqrt(3))):
        traj = run_adagrad_ftrl(variant, losses, dom, eta, delta)
        lo, hi = bounds.adagrad_bounds(traj.grads, dom, variant, eta, delta)
        assert lo - 1e-6 <= traj.regret <= hi + 1e-6
        assert all(dom.contains(w) for w in traj.points)


def test_adagrad_nonlinear_losses():
    dom = DomainSpec.box([-1, -1], [1, 1], grad_bound_inf=2.0, grad_bound_2=3.0)
    rng = np.random.default_rng(4)
    losses = [ConvexLossOracle.quadratic(np.eye(2) * 0.5, rng.uniform(-1, 1, 2)) for _ in range(15)]
    traj = run_adagrad_ftrl("full", losses, dom, 1.0, 1.0)
    assert np.isfinite(traj.regret)
    assert bounds.lb_general(traj, domain=dom) <= traj.linear_regret + 1e-6


def test_run_ftrl_entropy_linear_matches_hedge():
    seq = random_dtol(60, 3, binary=False, seed=8)
    sched = EntropyRegularizer(lambda t: 0.9, 3)
    traj = run_ftrl([ConvexLossOracle.linear(l) for l in seq.losses], sched, DomainSpec.simplex(3))
    ref = run_hedge(RateSchedule("constant", 0.9), seq)
    np.testing.assert_allclose(traj.points, ref.points, atol=1e-12)
    assert abs(traj.regret - ref.regret) < 1e-9


def test_best_fixed_point_box():
    f = ConvexLossOracle.quadratic(np.eye(2), [-3.0, 0.2])
    w = best_fixed_point([f], DomainSpec.box([0, 0], [1, 1]))
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-9)


def test_eg_forecast_examples():
    s = ForecastState()
    assert eg_forecast(s) == 0.5
    s.update(0.5, 0.0)
    assert math.isclose(s.grad_sum, 0.5)
    assert math.isclose(eg_forecast(s), 1 / (1 + math.exp(0.5 / math.sqrt(2))), rel_tol=1e-14)
    assert math.isclose(eg_forecast(s), 0.412521, abs_tol=1e-6)


def test_eg_forecast_monotone_in_gradient_sum():
    vals = [eg_forecast(ForecastState(grad_sum=G, round=4)) for G in np.linspace(0, 2000, 50)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-200


def test_linearized_single_round():
    traj = run_linearized_eg([0])
    assert traj.algo_losses[0] == 0.125
    assert traj.meta["p_star"] == 0.0
    assert traj.regret == 0.125


def test_linearized_two_rounds_comparator():
    traj = run_linearized_eg([0, 1])
    assert traj.meta["p_star"] == 0.5
    comp = traj.ledger.algo_cum - traj.regret
    assert math.isclose(comp, 0.25, rel_tol=1e-15)


def test_linearized_against_streaming_state():
    y = piecewise_outcomes(200)
    traj = run_linearized_eg(y)
    s = ForecastState()
    for t, yt in enumerate(y):
        p = eg_forecast(s)
        assert abs(p - traj.points[t, 0]) < 1e-12
        s.update(p, yt)
    assert abs(s.grad_sum - math.fsum(s.grads)) < 1e-12


def test_linearized_claims():
    T = 100_000
    traj = run_linearized_eg(piecewise_outcomes(T))
    p = traj.points[:, 0]
    assert traj.regret <= -3 * T / 64 + 10 * math.sqrt(T)
    assert p[: T // 2].max() <= 0.5 + 1e-12
    first = int(np.argmax(p < 1 / 16)) + 1
    assert p[first - 1] < 1 / 16 and first <= 1880


def test_linearized_is_hedge_on_gradients():
    y = piecewise_outcomes(50)
    traj = run_linearized_eg(y)
    seq = LossSequence(traj.grads, "general")
    # same weights as Hedge on (g_t, 0) with rate 1/sqrt(t)
    L = np.zeros(2)
    for t in range(50):
        w = hedge_weights(RateSchedule("paper-sec6"), L, t + 1)
        np.testing.assert_allclose(w, traj.points[t], atol=1e-12)
        L += seq.losses[t]
