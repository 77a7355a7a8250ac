import json
import math

import numpy as np
import pytest

from regret_forge import bounds
from regret_forge.adversary import canonical, random_dtol
from regret_forge.core import DomainSpec, LossSequence
from regret_forge.engines import ConvexLossOracle, run_adagrad_ftrl, run_hedge
from regret_forge.regularizers import EntropyRegularizer, RateSchedule


def test_lb_constant_is_zero():
    traj = run_hedge(RateSchedule("constant", 0.5), random_dtol(100, 3, seed=1))
    assert bounds.lb_general(traj) == 0.0
    assert bounds.lb_worst_case(traj) == 0.0


def test_lb_ftl_is_zero():
    traj = run_hedge(None, random_dtol(100, 3, seed=1))
    assert bounds.lb_general(traj) == 0.0
    assert traj.regret >= 0.0


def test_lb_decreasing_d2_T100():
    env = -0.5 * math.sqrt(100 * math.log(2))
    assert math.isclose(env, -4.1628, abs_tol=1e-4)
    for seed in range(10):
        traj = run_hedge(RateSchedule("decreasing", d=2), random_dtol(100, 2, seed=seed))
        lb = bounds.lb_general(traj)
        assert lb >= env
        assert bounds.lb_worst_case(traj) >= env
        assert lb <= traj.regret + 1e-6
        assert bounds.lb_worst_case(traj) <= lb + 1e-12


def test_lb_matches_manual_alpha_sum():
    traj = run_hedge(RateSchedule("paper-sec6"), canonical(16))
    reg = traj.regularizer
    a = [reg.alpha(t, traj.points[t - 1]) for t in range(1, 17)]
    want = -math.log(2) / reg.eta(16) + math.log(2) / reg.eta(0) - math.fsum(a)
    assert abs(bounds.lb_general(traj) - want) < 1e-12


def test_ub_zero_losses():
    seq = LossSequence(np.zeros((10, 2)), "binary")
    traj = run_hedge(RateSchedule("constant", 0.5), seq)
    parts = bounds.certify(traj).components
    assert parts["dual_norm_sum"] == 0.0
    assert math.isclose(bounds.ub_general(traj), parts["phi_at_comparator"])


def test_ub_constant_rate_closed_form():
    eta, d, T = 0.3, 4, 200
    seq = random_dtol(T, d, seed=2)
    traj = run_hedge(RateSchedule("constant", eta), seq)
    full = np.sum(seq.losses.max(axis=1))
    want = math.log(d) / eta + eta / 2 * full
    assert math.isclose(bounds.ub_general(traj), want, rel_tol=1e-12)
    assert bounds.ub_general(traj) <= math.log(d) / eta + eta / 2 * T + 1e-12


def test_certify_report():
    traj = run_hedge(RateSchedule("decreasing", d=2), canonical(200))
    rep = bounds.certify(traj)
    assert rep.lower <= rep.upper
    assert rep.certified
    doc = json.loads(rep.to_json())
    assert set(doc["components"]) == set(bounds.COMPONENT_KEYS)
    assert doc["certified"] is True


def test_hedge_sandwich_examples():
    lo, hi = bounds.hedge_sandwich(100, 2)
    assert math.isclose(lo, -4.16277, abs_tol=1e-5) and math.isclose(hi, 8.32555, abs_tol=1e-5)
    lo, hi = bounds.hedge_sandwich(1, 2)
    assert math.isclose(lo, -0.41628, abs_tol=1e-5) and math.isclose(hi, 0.83255, abs_tol=1e-5)
    for T in (3, 77, 10_000):
        lo, hi = bounds.hedge_sandwich(T, 2)
        assert lo == -hi / 2
    with pytest.raises(ValueError):
        bounds.hedge_sandwich(0, 2)


def test_timeless_lb_examples():
    assert bounds.timeless_lb(0, 2) == 0.0
    v = bounds.timeless_lb(200, 2)
    assert math.isclose(v, -math.sqrt(100 * math.log(2)) + 4 * math.log(2), rel_tol=1e-14)
    assert math.isclose(v, -5.5529, abs_tol=1e-4)
    assert bounds.timeless_lb(8, 2) == 0.0
    with pytest.raises(ValueError):
        bounds.timeless_lb(-1, 2)


def _linear(g):
    return [ConvexLossOracle.linear(x) for x in g]


def test_adagrad_bounds_example():
    box = DomainSpec.box([0, 0], [1, 1], grad_bound_inf=1.0, grad_bound_2=1.0)
    g = np.tile([1.0, 0.0], (4, 1))
    lo, hi = bounds.adagrad_bounds(g, box, "diagonal")
    assert math.isclose(lo, -1.0) and math.isclose(hi, 4.0)
    lo, hi = bounds.adagrad_bounds(np.zeros((0, 2)), box, "diagonal")
    assert lo == 0.0 and math.isclose(hi, 2.0)


def test_adagrad_bounds_full_identity():
    box = DomainSpec.box([-1, -1], [1, 1], grad_bound_inf=1.0, grad_bound_2=1.0)
    lo, _ = bounds.adagrad_bounds(np.eye(2), box, "full")
    assert math.isclose(lo, -box.diameter_2, rel_tol=1e-12)


def test_adagrad_mistuned():
    box = DomainSpec.box([0, 0], [1, 1], grad_bound_inf=1.0, grad_bound_2=1.0)
    with pytest.raises(ValueError, match="delta"):
        bounds.adagrad_bounds(np.ones((2, 2)), box, "diagonal", eta=1.0, delta=2.0)
    with pytest.raises(ValueError, match="eta"):
        bounds.adagrad_bounds(np.ones((2, 2)), box, "full", eta=1.0, delta=1.0)


def _instance(seed, T=400, d=4):
    rng = np.random.default_rng(seed)
    lo = -rng.uniform(0.1, 1.1, d)
    hi = rng.uniform(0.1, 1.1, d)
    box = DomainSpec.box(lo, hi, grad_bound_inf=1.0, grad_bound_2=math.sqrt(d))
    return box, rng.uniform(-1, 1, (T, d))


@pytest.mark.parametrize("seed", range(5))
def test_adagrad_dual_sums_and_telescoping(seed):
    box, g = _instance(seed)
    L = _linear(g)
    eta = box.diameter_inf
    traj = run_adagrad_ftrl("diagonal", L, box, eta, 1.0)
    dual = bounds.certify(traj, box).components["dual_norm_sum"]
    s = np.sqrt((traj.grads**2).sum(axis=0)).sum()
    assert dual <= 2 * eta * s + 1e-9
    a = bounds.alpha_series(traj)
    wmax = np.abs(traj.points).max()
    assert a.sum() <= wmax**2 / (2 * eta) * s + 1e-9
    rep = bounds.certify(traj, box)
    assert rep.certified

    eta = box.diameter_2
    traj = run_adagrad_ftrl("full", L, box, eta, math.sqrt(4))
    dual = bounds.certify(traj, box).components["dual_norm_sum"]
    G = traj.grads.T @ traj.grads
    tr = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(G), 0, None)))
    assert dual <= 2 * eta * tr + 1e-9
    lo, hi = bounds.adagrad_bounds(traj.grads, box, "full", eta, 2.0)
    assert math.isclose(lo, -(box.diameter_2 / 2) * tr, rel_tol=1e-9)
    assert lo - 1e-6 <= traj.regret <= hi + 1e-6


def test_lb_requires_domain_for_quadratic():
    box, g = _instance(0, T=5)
    traj = run_adagrad_ftrl("diagonal", _linear(g), box, 1.0, 1.0)
    with pytest.raises(ValueError):
        bounds.lb_general(traj)


def test_lb_schedule_mismatch():
    traj = run_hedge(RateSchedule("constant"), random_dtol(10, 2, seed=0))
    with pytest.raises(ValueError):
        bounds.lb_general(traj, EntropyRegularizer(np.ones(3), 2))


@pytest.mark.parametrize("spec", ["decreasing", "decreasing:1", "paper-sec6", "inverse-sqrt:0.3", "timeless"])
def test_sandwich_over_hedge_presets(spec):
    for d in (2, 6):
        sched = RateSchedule.parse(spec, d)
        for seed in range(3):
            seq = random_dtol(500, d, binary=bool(seed % 2), seed=seed)
            rep = bounds.certify(run_hedge(sched, seq))
            assert rep.certified, (spec, d, seed, rep.as_dict())
