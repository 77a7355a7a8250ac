"""Learning-rate schedules and time-indexed regularizer families.

Index convention: a :class:`RateSchedule` emits r_t, the rate used to play
round t from the losses of rounds 1..t-1. The regularizer Phi_t is the one
that produces the round t+1 action, so for Hedge Phi_t = (1/r_{t+1}) * negentropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._solvers import box_qp
from .core import DomainSpec

PRESETS = ("constant", "inverse-sqrt", "decreasing-hedge-std", "paper-sec6", "timeless", "table")
ALIASES = {"decreasing": "decreasing-hedge-std", "sec6": "paper-sec6", "const": "constant"}
# Rate multiplier giving the -1/2 sqrt(T log d) .. sqrt(T log d) sandwich.
DECREASING_SCALE = 2.0


def timeless_rate(best_loss: float, d: int) -> float:
    """-log(1 - min(1/4, sqrt(2 log d / L*))), with L* = 0 mapped to 1/4."""
    if best_loss < 0:
        raise ValueError("best loss must be nonnegative")
    return _kernels._pykernels._timeless_rate(float(best_loss), math.log(d))


@dataclass(frozen=True)
class RateSchedule:
    kind: str
    scale: float | None = None
    d: int = 2
    table: tuple = ()

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in PRESETS:
            raise ValueError(f"unknown schedule {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.scale is None:
            default = DECREASING_SCALE if kind == "decreasing-hedge-std" else 1.0
            object.__setattr__(self, "scale", default)
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("schedule scale must be positive and finite")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if kind == "table":
            tab = tuple(float(x) for x in self.table)
            if not tab or any(not (x > 0) for x in tab):
                raise ValueError("rate table must be nonempty and positive")
            if any(b > a for a, b in zip(tab, tab[1:])):
                raise ValueError("rate table must be non-increasing")
            object.__setattr__(self, "table", tab)

    @classmethod
    def parse(cls, text: str, d: int = 2) -> "RateSchedule":
        """Parse ``preset[:scale]``."""
        name, _, sc = text.partition(":")
        return cls(name.strip(), float(sc) if sc else None, d)

    def spec(self) -> str:
        return f"{self.kind}:{self.scale!r}"

    @property
    def adaptive(self) -> bool:
        return self.kind == "timeless"

    @property
    def constant(self) -> bool:
        return self.kind == "constant"

    def rate(self, t: int) -> float:
        """r_t for t >= 1. Timeless rates depend on data; see :func:`timeless_rate`."""
        if t < 1:
            raise ValueError("rates are indexed from t = 1")
        k = self.kind
        if k == "constant":
            return self.scale
        if k in ("inverse-sqrt", "paper-sec6"):
            return self.scale / math.sqrt(t)
        if k == "decreasing-hedge-std":
            return self.scale * math.sqrt(math.log(self.d) / t) if self.d > 1 else self.scale / math.sqrt(t)
        if k == "table":
            return self.scale * self.table[min(t, len(self.table)) - 1]
        raise ValueError("timeless rates need the best cumulative loss")

    def rates(self, T: int) -> np.ndarray:
        """r_1..r_{T+1} as an array (timeless: not available without data)."""
        t = np.arange(1, T + 2, dtype=np.float64)
        k = self.kind
        if k == "constant":
            return np.full(T + 1, self.scale)
        if k in ("inverse-sqrt", "paper-sec6"):
            return self.scale / np.sqrt(t)
        if k == "decreasing-hedge-std":
            ld = math.log(self.d) if self.d > 1 else 1.0
            return self.scale * np.sqrt(ld / t)
        return np.array([self.rate(int(i)) for i in t])


class Regularizer:
    """Common interface: value(t, w), inf(t, domain), alpha(t, w)."""

    kind = "abstract"

    def value(self, t, w):
        raise NotImplementedError

    def inf(self, t, domain):
        raise NotImplementedError

    def alpha(self, t, w):
        if t < 1:
            raise ValueError("alpha is defined for t >= 1")
        return self.value(t, w) - self.value(t - 1, w)


def negentropy(w) -> float:
    w = np.asarray(w, dtype=np.float64)
    pos = w > 0
    return float(np.sum(w[pos] * np.log(np.maximum(w[pos], 1e-300))))


class EntropyRegularizer(Regularizer):
    """Phi_t(w) = (1/eta_t) sum_j w_j log w_j on the simplex.

    ``eta`` is a callable t -> eta_t or a sequence indexed from t = 0.
    """

    kind = "scaled-entropy"

    def __init__(self, eta, d: int | None = None):
        self._eta = eta
        self.d = d

    @classmethod
    def for_hedge(cls, schedule: RateSchedule, used_rates=None):
        """Regularizer family of Hedge: eta_t = r_{t+1}.

        ``used_rates`` (r_1..r_{T+1}) is required for data-dependent schedules.
        """
        if used_rates is not None:
            return cls(np.asarray(used_rates, dtype=np.float64), schedule.d)
        if schedule.adaptive:
            raise ValueError("data-dependent schedule needs the rates the run used")
        return cls(lambda t: schedule.rate(t + 1), schedule.d)

    def eta(self, t: int) -> float:
        e = self._eta(t) if callable(self._eta) else self._eta[t]
        e = float(e)
        if not e > 0:
            raise ValueError(f"eta_{t} must be positive, got {e}")
        return e

    def value(self, t, w):
        w = np.asarray(w, dtype=np.float64)
        _check_simplex_point(w)
        return negentropy(w) / self.eta(t)

    def inf(self, t, domain: DomainSpec):
        if domain.kind != "simplex":
            raise ValueError("entropy regularizer needs a simplex domain")
        return -math.log(domain.d) / self.eta(t)

    def alpha(self, t, w):
        if t < 1:
            raise ValueError("alpha is defined for t >= 1")
        w = np.asarray(w, dtype=np.float64)
        _check_simplex_point(w)
        return (1.0 / self.eta(t) - 1.0 / self.eta(t - 1)) * negentropy(w)


class ZeroRegularizer(Regularizer):
    """Phi_t = 0, i.e. Follow The Leader."""

    kind = "zero"

    def value(self, t, w):
        return 0.0

    def inf(self, t, domain):
        return 0.0

    def alpha(self, t, w):
        return 0.0


def _check_simplex_point(w, tol=1e-9):
    if w.ndim != 1 or np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
        raise ValueError("point is outside the simplex")


class AdaGradState:
    """Running gradient statistics for the adaptive quadratic regularizer."""

    def __init__(self, variant: str, d: int, delta: float):
        if variant not in ("diagonal", "full"):
            raise ValueError(f"unknown variant {variant!r}")
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.variant = variant
        self.d = d
        self.delta = float(delta)
        self.grad_sq_sums = np.zeros(d)
        self.outer_sum = np.zeros((d, d)) if variant == "full" else None
        self.round = 0
        self._sqrt = np.zeros((d, d)) if variant == "full" else None
        self._basis = None

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.grad_sq_sums)

    def update(self, g) -> "AdaGradState":
        g = np.asarray(g, dtype=np.float64).reshape(-1)
        if g.shape[0] != self.d:
            raise ValueError("gradient dimension mismatch")
        self.grad_sq_sums = self.grad_sq_sums + g * g
        if self.variant == "full":
            self.outer_sum = self.outer_sum + np.outer(g, g)
            self._sqrt, self._basis = psd_sqrt(self.outer_sum, basis=self._basis, return_basis=True)
        self.round += 1
        return self

    def H(self) -> np.ndarray:
        """H_t as a vector of diagonal entries (diagonal) or a matrix (full)."""
        if self.variant == "diagonal":
            return self.delta + self.s
        return self.delta * np.eye(self.d) + self._sqrt

    @property
    def trace_sqrt(self) -> float:
        if self.variant == "diagonal":
            return float(self.s.sum())
        return float(np.trace(self._sqrt))


class QuadraticRegularizer(Regularizer):
    """Phi_t(w) = (1/2 eta) <w - c, H_t (w - c)>.

    ``H`` holds H_0..H_T: shape (T+1, d) for the diagonal variant or
    (T+1, d, d) for the full one.
    """

    def __init__(self, eta: float, H, center=None, variant: str | None = None):
        if not eta > 0:
            raise ValueError("eta must be positive")
        self.eta = float(eta)
        H = np.asarray(H, dtype=np.float64)
        if variant is None:
            variant = "diagonal" if H.ndim == 2 else "full"
        self.variant = variant
        self.kind = "quadratic-diag" if variant == "diagonal" else "quadratic-full"
        self.H = H
        self.d = H.shape[1]
        self.center = np.zeros(self.d) if center is None else np.asarray(center, dtype=np.float64)

    @classmethod
    def from_gradients(cls, variant, grads, delta, eta, center=None):
        grads = np.asarray(grads, dtype=np.float64)
        if grads.ndim != 2:
            raise ValueError("gradients must be a (T, d) array")
        d = grads.shape[1]
        st = AdaGradState(variant, d, delta)
        Hs = [st.H()]
        for g in grads:
            Hs.append(st.update(g).H())
        return cls(eta, np.array(Hs), center, variant)

    @property
    def horizon(self) -> int:
        return self.H.shape[0] - 1

    def H_at(self, t: int) -> np.ndarray:
        if not 0 <= t <= self.horizon:
            raise ValueError(f"round {t} outside the recorded state 0..{self.horizon}")
        return self.H[t]

    def _check_pd(self, Ht):
        if self.variant == "diagonal":
            if np.any(Ht <= 0):
                raise ValueError("adaptive state is not positive definite")
        elif np.any(np.linalg.eigvalsh(0.5 * (Ht + Ht.T)) <= 0):
            raise ValueError("adaptive state is not positive definite")

    def _quad(self, Ht, v):
        if self.variant == "diagonal":
            return float(v @ (Ht * v))
        return float(v @ Ht @ v)

    def value(self, t, w):
        Ht = self.H_at(t)
        self._check_pd(Ht)
        v = np.asarray(w, dtype=np.float64) - self.center
        return self._quad(Ht, v) / (2.0 * self.eta)

    def alpha(self, t, w):
        if t < 1:
            raise ValueError("alpha is defined for t >= 1")
        v = np.asarray(w, dtype=np.float64) - self.center
        return self._quad(self.H_at(t) - self.H_at(t - 1), v) / (2.0 * self.eta)

    def argmin(self, t, domain: DomainSpec) -> np.ndarray:
        if domain.contains(self.center, tol=0.0):
            return self.center.copy()
        if domain.kind == "simplex":
            raise ValueError("quadratic infimum is only implemented for boxes")
        Ht = self.H_at(t)
        self._check_pd(Ht)
        if self.variant == "diagonal":
            return np.clip(self.center, domain.lower, domain.upper)
        w, _ = box_qp(Ht / self.eta, -(Ht @ self.center) / self.eta, domain.lower, domain.upper)
        return w

    def inf(self, t, domain: DomainSpec):
        return self.value(t, self.argmin(t, domain))


def quadratic_diag(delta: float, eta: float, d: int, center=None) -> QuadraticRegularizer:
    """Diagonal regularizer before any gradient, H_0 = delta I."""
    return QuadraticRegularizer(eta, np.full((1, d), float(delta)), center, "diagonal")


def phi_eval(sched: Regularizer, t: int, w, domain: DomainSpec | None = None) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    if domain is not None and not domain.contains(w):
        raise ValueError("point is outside the domain")
    return sched.value(t, w)


def phi_inf(sched: Regularizer, t: int, domain: DomainSpec) -> float:
    return sched.inf(t, domain)


def alpha_exact(sched: Regularizer, t: int, w_t) -> float:
    return sched.alpha(t, w_t)


MAX_SQRT_DIM = 64


def psd_sqrt(G, basis=None, return_basis=False):
    """Symmetric PSD square root via cyclic Jacobi.

    ``basis`` warm-starts the rotation from a previous eigenbasis, which makes
    rank-one updated sequences cheap.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("matrix must be square")
    d = G.shape[0]
    if d > MAX_SQRT_DIM:
        raise ValueError(f"psd_sqrt supports d <= {MAX_SQRT_DIM}, got {d}")
    norm = float(np.linalg.norm(G))
    if np.abs(G - G.T).max(initial=0.0) > 1e-12 * max(1.0, norm):
        raise ValueError("matrix is not symmetric")
    sym = 0.5 * (G + G.T)
    evals, V, sweeps = _kernels.jacobi_eigh(sym, basis, 1e-12, 100)
    if sweeps >= 100:
        raise RuntimeError("Jacobi iteration did not converge")
    if evals.min(initial=0.0) < -1e-10 * max(1.0, norm):
        raise ValueError("matrix is indefinite")
    root = np.sqrt(np.maximum(evals, 0.0))
    S = (V * root) @ V.T
    S = 0.5 * (S + S.T)
    return (S, V) if return_basis else S
