"""Learning algorithms: Hedge family, generic FTRL, adaptive-gradient FTRL and
linearized FTRL (exponentiated gradient) for squared-loss forecasting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from ._solvers import ConvergenceError, box_qp, entropic_simplex, pgd, simplex_residual
from .core import DomainSpec, LossSequence, ModeError, RegretLedger, format_real, project_simplex
from .regularizers import (
    AdaGradState,
    EntropyRegularizer,
    QuadraticRegularizer,
    RateSchedule,
    Regularizer,
    ZeroRegularizer,
    timeless_rate,
)

__all__ = [
    "ConvergenceError",
    "ConvexLossOracle",
    "EngineTrajectory",
    "ForecastState",
    "HedgeLearner",
    "eg_forecast",
    "ftrl_solve",
    "hedge_weights",
    "run_adagrad_ftrl",
    "run_ftrl",
    "run_hedge",
    "run_linearized_eg",
]


class ConvexLossOracle:
    """A convex loss with value and gradient.

    Build with :meth:`linear`, :meth:`quadratic` (0.5 w'Aw + b'w + c) or
    :meth:`black_box`.
    """

    def __init__(self, kind, value, grad, g=None, A=None, b=None, c=0.0):
        self.kind = kind
        self._value = value
        self._grad = grad
        self.g, self.A, self.b, self.c = g, A, b, c

    @classmethod
    def linear(cls, g):
        g = np.asarray(g, dtype=np.float64)
        return cls("linear", lambda w: float(g @ w), lambda w: g, g=g)

    @classmethod
    def quadratic(cls, A, b, c=0.0):
        A = np.asarray(A, dtype=np.float64)
        A = 0.5 * (A + A.T)
        b = np.asarray(b, dtype=np.float64)
        return cls(
            "quadratic",
            lambda w: float(0.5 * w @ A @ w + b @ w + c),
            lambda w: A @ w + b,
            A=A,
            b=b,
            c=float(c),
        )

    @classmethod
    def black_box(cls, value, grad):
        return cls("black-box", lambda w: float(value(w)), lambda w: np.asarray(grad(w), dtype=np.float64))

    def value(self, w) -> float:
        return self._value(np.asarray(w, dtype=np.float64))

    def grad(self, w) -> np.ndarray:
        return self._grad(np.asarray(w, dtype=np.float64))


@dataclass
class EngineTrajectory:
    """Record of one run. ``state`` holds the rates used (Hedge family) or the
    H_0..H_T snapshots (adaptive gradient)."""

    points: np.ndarray
    grads: np.ndarray
    ledger: RegretLedger
    regularizer: Regularizer | None = None
    state: np.ndarray | None = None
    comparator: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.points.shape[0]

    @property
    def algo_losses(self) -> np.ndarray:
        return self.ledger.algo_losses

    @property
    def regret_series(self) -> np.ndarray:
        return self.ledger.per_round_regret_to_best

    @property
    def regret(self) -> float:
        r = self.regret_series
        return float(r[-1]) if len(r) else 0.0

    @property
    def linear_regret(self) -> float:
        """Regret of the linearized game sum <g_t, w_t - w*_lin>.

        Equal to :attr:`regret` for linear losses.
        """
        if "linear_regret" in self.meta:
            return self.meta["linear_regret"]
        return self.regret

    def to_csv(self, path=None) -> str:
        d = self.points.shape[1] if self.points.ndim == 2 else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round"] + [f"w{j + 1}" for j in range(d)] + ["algo_loss", "regret_prefix"])
        reg = self.regret_series
        for t in range(self.T):
            w.writerow([t + 1] + [format_real(x) for x in self.points[t]]
                       + [format_real(self.algo_losses[t]), format_real(reg[t])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text


# Hedge family


def hedge_weights(schedule: RateSchedule | None, cum_losses, t: int) -> np.ndarray:
    """w_t from L_{t-1}; ``schedule=None`` means Follow The Leader."""
    if t < 1:
        raise ValueError("rounds are indexed from 1")
    L = np.asarray(cum_losses, dtype=np.float64)
    shifted = L - L.min()
    if schedule is None:
        mask = (shifted == 0.0).astype(np.float64)
        return mask / mask.sum()
    if schedule.adaptive:
        r = timeless_rate(float(L.min()), len(L))
    else:
        r = schedule.rate(t)
    e = np.exp(-r * shifted)
    return e / e.sum()


class HedgeLearner:
    """Streaming Hedge: call :meth:`weights`, then :meth:`update` with the loss."""

    def __init__(self, schedule: RateSchedule | None, d: int):
        self.schedule = schedule
        self.d = d
        self.L = np.zeros(d)
        self.t = 1
        self.ledger = RegretLedger(d)
        self.rates = []

    def weights(self) -> np.ndarray:
        return hedge_weights(self.schedule, self.L, self.t)

    def update(self, loss) -> float:
        loss = np.asarray(loss, dtype=np.float64)
        w = self.weights()
        a = float(w @ loss)
        self.ledger.update(a, loss)
        self.L = self.L + loss
        self.t += 1
        return a


def _hedge_mode(schedule):
    if schedule is None:
        return _kernels.MODE_FTL
    if schedule.adaptive:
        return _kernels.MODE_TIMELESS
    return _kernels.MODE_RATES


def run_hedge(schedule: RateSchedule | None, seq: LossSequence) -> EngineTrajectory:
    """Hedge (or FTL when ``schedule`` is None) over a DTOL/binary sequence."""
    if seq.mode not in ("dtol", "binary"):
        raise ModeError("Hedge needs a dtol or binary sequence")
    T, d = seq.losses.shape
    mode = _hedge_mode(schedule)
    rates = schedule.rates(T) if mode == _kernels.MODE_RATES else np.zeros(T + 1)
    w, algo, used = _kernels.hedge_run(seq.losses, rates, mode, math.log(d))
    ledger = RegretLedger.from_arrays(algo, seq.losses)
    if schedule is None:
        reg = ZeroRegularizer()
    else:
        reg = EntropyRegularizer(used, d)
    return EngineTrajectory(w, np.array(seq.losses), ledger, reg, used,
                            meta={"engine": "ftl" if schedule is None else "hedge",
                                  "schedule": None if schedule is None else schedule.spec()})


# Generic FTRL


def _all(losses, kind):
    return all(f.kind == kind for f in losses)


def _grad_sum(losses, d):
    G = np.zeros(d)
    for f in losses:
        G = G + f.g
    return G


def ftrl_solve(losses, sched: Regularizer, t: int, domain: DomainSpec, tol: float = 1e-10) -> np.ndarray:
    """argmin_w sum_s f_s(w) + Phi_t(w) over the domain."""
    d = domain.d
    losses = list(losses)
    if isinstance(sched, EntropyRegularizer):
        if domain.kind != "simplex":
            raise ValueError("entropy regularizer needs a simplex domain")
        eta = sched.eta(t)
        if _all(losses, "linear"):
            z = -eta * _grad_sum(losses, d)
            e = np.exp(z - z.max())
            return e / e.sum()
        w, _ = entropic_simplex(lambda v: _sum_grad(losses, v, d), eta, d, tol)
        return w
    if isinstance(sched, QuadraticRegularizer):
        if domain.kind != "box":
            raise ValueError("quadratic engine expects a box domain")
        H = sched.H_at(t)
        c = sched.center
        if sched.variant == "diagonal" and _all(losses, "linear"):
            return np.clip(c - sched.eta * _grad_sum(losses, d) / H, domain.lower, domain.upper)
        Hm = np.diag(H) if sched.variant == "diagonal" else H
        if all(f.kind in ("linear", "quadratic") for f in losses):
            A = Hm / sched.eta
            b = -(Hm @ c) / sched.eta
            for f in losses:
                if f.kind == "linear":
                    b = b + f.g
                else:
                    A = A + f.A
                    b = b + f.b
            w, res = box_qp(A, b, domain.lower, domain.upper, tol)
            if res > tol * max(1.0, np.abs(A).max(), np.abs(b).max()):
                raise ConvergenceError("box QP did not converge", res)
            return w

        def grad(v):
            return _sum_grad(losses, v, d) + Hm @ (v - c) / sched.eta

        L = _smoothness(grad, domain)
        w, _ = pgd(grad, domain.project, domain.center(), L, tol)
        return w
    if isinstance(sched, ZeroRegularizer):
        if _all(losses, "linear"):
            G = _grad_sum(losses, d)
            if domain.kind == "simplex":
                mask = (G - G.min() == 0.0).astype(np.float64)
                return mask / mask.sum()
            return np.where(G > 0, domain.lower, np.where(G < 0, domain.upper, domain.center()))
        grad = lambda v: _sum_grad(losses, v, d)  # noqa: E731
        L = _smoothness(grad, domain)
        w, _ = pgd(grad, domain.project, domain.center(), L, tol)
        return w
    raise ValueError(f"unsupported regularizer {type(sched).__name__}")


def _sum_grad(losses, w, d):
    g = np.zeros(d)
    for f in losses:
        g = g + f.grad(w)
    return g


def _smoothness(grad, domain, probes=8, seed=0):
    """Estimate the gradient Lipschitz constant from random domain pairs."""
    rng = np.random.default_rng(seed)
    best = 1e-12
    for _ in range(probes):
        if domain.kind == "simplex":
            a, b = rng.dirichlet(np.ones(domain.d)), rng.dirichlet(np.ones(domain.d))
        else:
            a = rng.uniform(domain.lower, domain.upper)
            b = rng.uniform(domain.lower, domain.upper)
        n = np.linalg.norm(a - b)
        if n > 0:
            best = max(best, float(np.linalg.norm(grad(a) - grad(b)) / n))
    return 2.0 * best


def ftrl_residual(losses, sched, t, domain, w) -> float:
    """Projected-gradient residual of the FTRL objective at ``w`` (0 at optimum)."""
    d = domain.d
    g = _sum_grad(list(losses), w, d)
    if isinstance(sched, QuadraticRegularizer):
        H = sched.H_at(t)
        Hm = np.diag(H) if sched.variant == "diagonal" else H
        g = g + Hm @ (w - sched.center) / sched.eta
    elif isinstance(sched, EntropyRegularizer):
        g = g + (np.log(np.maximum(w, 1e-300)) + 1.0) / sched.eta(t)
        return simplex_residual(w, g)
    if domain.kind == "simplex":
        return simplex_residual(w, g)
    return float(np.linalg.norm(w - np.clip(w - g, domain.lower, domain.upper)))


def run_ftrl(losses, sched: Regularizer, domain: DomainSpec, tol: float = 1e-10) -> EngineTrajectory:
    """Generic FTRL: w_t = argmin sum_{s<t} f_s + Phi_{t-1}, solved numerically.

    The regret is measured against the best fixed point in hindsight.
    """
    losses = list(losses)
    T, d = len(losses), domain.d
    pts = np.empty((T, d))
    grads = np.empty((T, d))
    algo = np.empty(T)
    for t in range(T):
        w = ftrl_solve(losses[:t], sched, t, domain, tol)
        pts[t] = w
        grads[t] = losses[t].grad(w)
        algo[t] = losses[t].value(w)
    wstar = best_fixed_point(losses, domain, tol) if T else domain.center()
    comp = np.array([f.value(wstar) for f in losses])
    ledger = RegretLedger.from_arrays(algo, np.zeros((T, d)), comp)
    return EngineTrajectory(pts, grads, ledger, sched, None, wstar, {"engine": "ftrl"})


# Adaptive-gradient FTRL


def best_fixed_point(losses, domain: DomainSpec, tol=1e-10) -> np.ndarray:
    """Best fixed action in hindsight for a list of convex losses."""
    return ftrl_solve(losses, ZeroRegularizer(), 0, domain, tol)


def adagrad_center(domain: DomainSpec) -> np.ndarray:
    """0 if it lies in the box, else the box midpoint."""
    if domain.contains(np.zeros(domain.d), tol=0.0):
        return np.zeros(domain.d)
    return domain.center()


def run_adagrad_ftrl(variant, losses, domain: DomainSpec, eta: float, delta: float,
                     center=None, tol: float = 1e-10) -> EngineTrajectory:
    """FTRL with Phi_t(w) = (1/2 eta) <w - c, H_t (w - c)>, H_t from gradients
    through round t."""
    if domain.kind != "box":
        raise ValueError("adaptive-gradient FTRL runs on a box domain")
    losses = list(losses)
    d = domain.d
    c = adagrad_center(domain) if center is None else np.asarray(center, dtype=np.float64)
    st = AdaGradState(variant, d, delta)
    T = len(losses)
    pts = np.empty((T, d))
    grads = np.empty((T, d))
    Hs = [st.H()]
    algo = np.empty(T)
    linear = _all(losses, "linear")
    lo, hi = domain.lower, domain.upper
    G = np.zeros(d)
    A_lin = None
    w = np.clip(c, lo, hi)
    for t in range(T):
        H = Hs[-1]
        if linear:
            if variant == "diagonal":
                w = np.clip(c - eta * G / H, lo, hi)
            else:
                A = H / eta
                w, res = box_qp(A, G - (H @ c) / eta, lo, hi, tol, w0=w)
                if res > tol * max(1.0, np.abs(A).max(), np.abs(G).max()):
                    raise ConvergenceError("box QP did not converge", res)
        else:
            sched = QuadraticRegularizer(eta, np.array([H]), c, variant)
            w = ftrl_solve(losses[:t], sched, 0, domain, tol)
        f = losses[t]
        g = f.grad(w)
        pts[t] = w
        grads[t] = g
        algo[t] = f.value(w)
        G = G + g
        Hs.append(st.update(g).H())
    if linear:
        wstar = np.where(G > 0, lo, np.where(G < 0, hi, np.clip(c, lo, hi)))
    else:
        wstar = best_fixed_point(losses, domain, tol)
    comp = np.array([f.value(wstar) for f in losses]) if T else np.zeros(0)
    ledger = RegretLedger.from_arrays(algo, grads if linear else np.zeros((T, d)), comp)
    reg = QuadraticRegularizer(eta, np.array(Hs), c, variant)
    lin_star = np.where(G > 0, lo, np.where(G < 0, hi, np.clip(c, lo, hi)))
    meta = {"engine": f"adagrad-{variant}", "eta": eta, "delta": delta,
            "linear_regret": float(np.sum(grads * pts) - G @ lin_star) if T else 0.0}
    return EngineTrajectory(pts, grads, ledger, reg, np.array(Hs), wstar, meta)


# Linearized FTRL for squared-loss forecasting


@dataclass
class ForecastState:
    grad_sum: float = 0.0
    round: int = 1
    outcomes: list = field(default_factory=list)
    grads: list = field(default_factory=list)

    def update(self, p: float, y: float) -> "ForecastState":
        g = p - y
        self.grads.append(g)
        self.outcomes.append(y)
        self.grad_sum += g
        self.round += 1
        return self


def eg_forecast(state: ForecastState, scale: float = 1.0) -> float:
    """p_t = 1 / (1 + exp(eta_t G_{t-1})), eta_t = scale / sqrt(t)."""
    if state.round < 1:
        raise ValueError("round must be >= 1")
    x = scale / math.sqrt(state.round) * state.grad_sum
    if x > 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def run_linearized_eg(outcomes, scale: float = 1.0) -> EngineTrajectory:
    """Exponentiated-gradient forecaster under loss 0.5 (p - y)^2.

    Regret is measured against the best fixed forecast p* = mean(y). The
    linearized game is Hedge on two experts with loss vectors (g_t, 0).
    """
    y = np.asarray(outcomes, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ValueError("outcomes must be nonempty")
    p = _kernels.eg_run(y, scale)
    g = p - y
    losses = 0.5 * (p - y) ** 2
    pstar = float(y.mean())
    comp = 0.5 * (pstar - y) ** 2
    ledger = RegretLedger.from_arrays(losses, np.zeros((len(y), 1)), comp)
    pts = np.column_stack([p, 1.0 - p])
    lin = np.column_stack([g, np.zeros_like(g)])
    G = float(_kernels.kahan_cumsum(g[:, None])[-1, 0])
    lin_regret = float(_kernels.kahan_cumsum((g * p)[:, None])[-1, 0]) - min(G, 0.0)
    T = len(y)
    etas = scale / np.sqrt(np.arange(1, T + 2, dtype=np.float64))
    reg = EntropyRegularizer(etas, 2)
    meta = {"engine": "linearized-eg", "p_star": pstar, "linear_regret": lin_regret}
    return EngineTrajectory(pts, lin, ledger, reg, etas, None, meta)
