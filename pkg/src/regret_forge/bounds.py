"""Regret upper bounds and best-case lower bounds evaluated on concrete runs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainSpec
from .engines import EngineTrajectory
from .regularizers import (
    EntropyRegularizer,
    QuadraticRegularizer,
    Regularizer,
    ZeroRegularizer,
    psd_sqrt,
    timeless_rate,
)

__all__ = [
    "BoundReport",
    "CERT_TOL",
    "adagrad_bounds",
    "alpha_series",
    "certify",
    "hedge_sandwich",
    "lb_general",
    "lb_worst_case",
    "timeless_lb",
    "timeless_rate",
    "ub_general",
]

CERT_TOL = 1e-6
COMPONENT_KEYS = ("phi_inf_T", "phi_inf_0", "alpha_sum", "dual_norm_sum", "phi_at_comparator")


@dataclass
class BoundReport:
    lower: float
    upper: float
    regret: float
    components: dict = field(default_factory=dict)
    tol: float = CERT_TOL

    @property
    def certified(self) -> bool:
        return self.lower - self.tol <= self.regret <= self.upper + self.tol

    def as_dict(self) -> dict:
        comps = {k: self.components.get(k) for k in COMPONENT_KEYS}
        return {"lower": self.lower, "upper": self.upper, "regret": self.regret,
                "certified": self.certified, "components": comps}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _default_domain(traj, domain):
    if domain is not None:
        return domain
    if isinstance(traj.regularizer, QuadraticRegularizer):
        raise ValueError("quadratic regularizer needs an explicit domain")
    return DomainSpec.simplex(traj.points.shape[1])


def _etas(sched: EntropyRegularizer, T: int) -> np.ndarray:
    if callable(sched._eta):
        e = np.array([sched.eta(t) for t in range(T + 1)])
    else:
        e = np.asarray(sched._eta, dtype=np.float64)
        if e.shape[0] < T + 1:
            raise ValueError(f"schedule covers {e.shape[0] - 1} rounds, trajectory has {T}")
        e = e[: T + 1]
    if np.any(~(e > 0)):
        raise ValueError("learning rates must be positive")
    return e


def _negentropy_rows(W):
    W = np.asarray(W, dtype=np.float64)
    safe = np.where(W > 0, W, 1.0)
    return (W * np.log(safe)).sum(axis=1)


def alpha_series(traj: EngineTrajectory, sched: Regularizer | None = None) -> np.ndarray:
    """alpha_t = Phi_t(w_t) - Phi_{t-1}(w_t) for t = 1..T at the played points."""
    sched = traj.regularizer if sched is None else sched
    T = traj.T
    if isinstance(sched, ZeroRegularizer):
        return np.zeros(T)
    if isinstance(sched, EntropyRegularizer):
        e = _etas(sched, T)
        inv = 1.0 / e
        return (inv[1:] - inv[:-1]) * _negentropy_rows(traj.points)
    if isinstance(sched, QuadraticRegularizer):
        if sched.horizon < T:
            raise ValueError(f"regularizer covers {sched.horizon} rounds, trajectory has {T}")
        V = traj.points - sched.center
        dH = np.diff(sched.H[: T + 1], axis=0)
        if sched.variant == "diagonal":
            q = np.einsum("ti,ti,ti->t", V, dH, V)
        else:
            q = np.einsum("ti,tij,tj->t", V, dH, V)
        return q / (2.0 * sched.eta)
    raise ValueError(f"unsupported regularizer {type(sched).__name__}")


def _lb_parts(traj, sched, domain):
    sched = traj.regularizer if sched is None else sched
    domain = _default_domain(traj, domain)
    T = traj.T
    a = alpha_series(traj, sched)
    return {
        "phi_inf_T": float(sched.inf(T, domain)),
        "phi_inf_0": float(sched.inf(0, domain)),
        "alpha_sum": math.fsum(a.tolist()),
    }


def lb_general(traj: EngineTrajectory, sched: Regularizer | None = None, domain: DomainSpec | None = None) -> float:
    """inf Phi_T - inf Phi_0 - sum_t alpha_t with exact alpha_t."""
    p = _lb_parts(traj, sched, domain)
    return p["phi_inf_T"] - p["phi_inf_0"] - p["alpha_sum"]


def lb_worst_case(traj: EngineTrajectory, sched: Regularizer | None = None, domain: DomainSpec | None = None) -> float:
    """Lower bound with data-free increments alpha_t >= sup_w (Phi_t - Phi_{t-1})(w)."""
    sched = traj.regularizer if sched is None else sched
    domain = _default_domain(traj, domain)
    T = traj.T
    if isinstance(sched, ZeroRegularizer):
        return 0.0
    if isinstance(sched, EntropyRegularizer):
        inv = 1.0 / _etas(sched, T)
        # negentropy ranges over [-log d, 0]
        a = np.maximum(0.0, -(inv[1:] - inv[:-1])) * math.log(domain.d)
        return sched.inf(T, domain) - sched.inf(0, domain) - math.fsum(a.tolist())
    if isinstance(sched, QuadraticRegularizer):
        corners = np.maximum(np.abs(domain.lower - sched.center), np.abs(domain.upper - sched.center))
        H = sched.H[: T + 1]
        if sched.variant == "diagonal":
            a = (np.diff(H, axis=0) @ (corners**2)) / (2.0 * sched.eta)
        else:
            r2 = float(corners @ corners)
            a = np.array([np.linalg.eigvalsh(H[t] - H[t - 1]).max() for t in range(1, T + 1)]) * r2 / (2.0 * sched.eta)
        return sched.inf(T, domain) - sched.inf(0, domain) - math.fsum(np.maximum(a, 0.0).tolist())
    raise ValueError(f"unsupported regularizer {type(sched).__name__}")


def _dual_terms(traj, sched):
    T = traj.T
    g = traj.grads
    if isinstance(sched, EntropyRegularizer):
        e = _etas(sched, T)
        return e[:-1] * np.abs(g).max(axis=1) ** 2 if T else np.zeros(0)
    if isinstance(sched, QuadraticRegularizer):
        if sched.horizon < T:
            raise ValueError("regularizer shorter than trajectory")
        H = sched.H[:T]
        if sched.variant == "diagonal":
            return sched.eta * np.einsum("ti,ti->t", g * g, 1.0 / H)
        return sched.eta * np.array([g[t] @ np.linalg.solve(H[t], g[t]) for t in range(T)])
    raise ValueError(f"no strong-convexity norm known for {type(sched).__name__}")


def _ub_parts(traj, sched, comparator, domain):
    sched = traj.regularizer if sched is None else sched
    T = traj.T
    dual = math.fsum(_dual_terms(traj, sched).tolist())
    if comparator is None:
        comparator = traj.comparator
    if isinstance(sched, EntropyRegularizer):
        d = traj.points.shape[1]
        if comparator is None:
            comparator = np.eye(d)[int(np.argmin(traj.ledger.expert_cum))]
        shift = math.log(d) / sched.eta(T)
        phi = sched.value(T, comparator) + shift
    else:
        if comparator is None:
            raise ValueError("comparator point required")
        phi = sched.value(T, comparator)
    return {"dual_norm_sum": dual, "phi_at_comparator": float(phi)}


def ub_general(traj: EngineTrajectory, sched: Regularizer | None = None, comparator=None,
               domain: DomainSpec | None = None) -> float:
    """Phi_T(u) + 1/2 sum_t ||g_t||^2_{(t-1),*}, entropy shifted to be nonnegative."""
    p = _ub_parts(traj, sched, comparator, domain)
    return p["phi_at_comparator"] + 0.5 * p["dual_norm_sum"]


def certify(traj: EngineTrajectory, domain: DomainSpec | None = None, comparator=None,
            regret: float | None = None, upper: bool = True) -> BoundReport:
    """Sandwich a run between its exact-alpha lower bound and the FTRL upper bound."""
    comps = _lb_parts(traj, None, domain)
    lower = comps["phi_inf_T"] - comps["phi_inf_0"] - comps["alpha_sum"]
    hi = math.inf
    if upper and not isinstance(traj.regularizer, ZeroRegularizer):
        comps.update(_ub_parts(traj, None, comparator, domain))
        hi = comps["phi_at_comparator"] + 0.5 * comps["dual_norm_sum"]
    r = traj.linear_regret if regret is None else regret
    return BoundReport(lower, hi, r, comps)


def hedge_sandwich(T: int, d: int) -> tuple[float, float]:
    """(-1/2 sqrt(T log d), sqrt(T log d))."""
    if T < 1 or d < 2:
        raise ValueError("need T >= 1 and d >= 2")
    u = math.sqrt(T * math.log(d))
    return -0.5 * u, u


def timeless_lb(best_loss: float, d: int) -> float:
    """min(0, -sqrt(L* log d / 2) + 4 log d)."""
    if best_loss < 0:
        raise ValueError("best loss must be nonnegative")
    ld = math.log(d)
    return min(0.0, -math.sqrt(best_loss * ld / 2.0) + 4.0 * ld)


def adagrad_bounds(grads, domain: DomainSpec, variant: str, eta: float | None = None,
                   delta: float | None = None, rtol: float = 1e-9) -> tuple[float, float]:
    """Closed-form best-case lower and worst-case upper bounds for tuned AdaGrad FTRL."""
    g = np.asarray(grads, dtype=np.float64).reshape(-1, domain.d)
    Dinf, D2 = domain.diameter_inf, domain.diameter_2
    if variant == "diagonal":
        M, D, want = domain.grad_bound_inf, Dinf, "delta = M_inf, eta = D_inf"
    elif variant == "full":
        M, D, want = domain.grad_bound_2, D2, "delta = M_2, eta = D_2"
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if not math.isfinite(M):
        raise ValueError("domain needs a finite gradient bound")
    if delta is not None and not math.isclose(delta, M, rel_tol=rtol):
        raise ValueError(f"mistuned run: delta = {delta} violates {want}")
    if eta is not None and not math.isclose(eta, D, rel_tol=rtol):
        raise ValueError(f"mistuned run: eta = {eta} violates {want}")
    if variant == "diagonal":
        s = float(np.sqrt((g * g).sum(axis=0)).sum())
        lower = -(Dinf / 2.0) * s
        upper = (D2 * D2 / Dinf) * M + Dinf * s if Dinf > 0 else 0.0
        return lower, upper
    tr = float(np.trace(psd_sqrt(g.T @ g))) if len(g) else 0.0
    return -(D2 / 2.0) * tr, D2 * (M / 2.0 + tr)
