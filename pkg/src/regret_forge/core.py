"""Loss sequences, domains and regret bookkeeping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

MODES = ("general", "dtol", "binary")


class DimensionError(ValueError):
    pass


class ModeError(ValueError):
    pass


def check_losses(losses: np.ndarray, mode: str) -> None:
    """Validate a (T, d) loss matrix against a mode."""
    if mode not in MODES:
        raise ModeError(f"unknown mode {mode!r}")
    if losses.ndim != 2 or losses.shape[1] < 1:
        raise DimensionError("losses must be a (T, d) array with d >= 1")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    if mode == "dtol" and losses.size and (losses.min() < 0.0 or losses.max() > 1.0):
        raise ModeError("dtol losses must lie in [0, 1]")
    if mode == "binary":
        if losses.size and not np.all((losses == 0.0) | (losses == 1.0)):
            raise ModeError("binary losses must be 0 or 1")


@dataclass(frozen=True)
class LossSequence:
    """Rounds of per-expert losses, stored as a read-only (T, d) array."""

    losses: np.ndarray
    mode: str = "dtol"

    def __post_init__(self):
        arr = np.array(self.losses, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        check_losses(arr, self.mode)
        arr.setflags(write=False)
        object.__setattr__(self, "losses", arr)

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    @property
    def d(self) -> int:
        return self.losses.shape[1]

    def __len__(self):
        return self.T

    def __eq__(self, other):
        if not isinstance(other, LossSequence):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.losses, other.losses)

    def __hash__(self):
        return hash((self.mode, self.losses.shape, self.losses.tobytes()))

    def with_losses(self, losses) -> "LossSequence":
        return LossSequence(losses, self.mode)

    def to_csv(self, path=None) -> str:
        """Write ``j1..jd`` header plus one row per round (17 significant digits)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"j{j + 1}" for j in range(self.d)])
        for row in self.losses:
            w.writerow([format_real(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    @classmethod
    def from_csv(cls, source, mode: str = "dtol") -> "LossSequence":
        """Read the CSV format produced by :meth:`to_csv`; validates ``mode``."""
        if isinstance(source, (str, Path)) and Path(source).exists():
            text = Path(source).read_text()
        else:
            text = str(source)
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = rows[0]
        expected = [f"j{j + 1}" for j in range(len(header))]
        if header != expected:
            raise ValueError(f"bad header {header!r}; expected {expected!r}")
        body = [r for r in rows[1:] if r]
        if any(len(r) != len(header) for r in body):
            raise DimensionError("ragged CSV rows")
        arr = np.array([[float(v) for v in r] for r in body], dtype=np.float64).reshape(len(body), len(header))
        return cls(arr, mode)


def format_real(x: float) -> str:
    return format(float(x), ".17g")


def check_simplex(w, tol: float = 1e-12) -> np.ndarray:
    """Return ``w`` as an array after checking it is a probability vector."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or np.any(w < 0.0) or abs(w.sum() - 1.0) > tol:
        raise ValueError("not a point of the probability simplex")
    return w


@dataclass(frozen=True)
class DomainSpec:
    """Feasible set: the simplex or an axis-aligned box.

    Diameters are derived; gradient bounds describe the loss family and are
    supplied by the caller.
    """

    kind: str
    d: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    grad_bound_inf: float = math.inf
    grad_bound_2: float = math.inf

    def __post_init__(self):
        if self.kind not in ("simplex", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "box":
            lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (self.d,)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (self.d,)).copy()
            if np.any(hi < lo):
                raise ValueError("box upper bound below lower bound")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        if self.grad_bound_inf < 0 or self.grad_bound_2 < 0:
            raise ValueError("gradient bounds must be nonnegative")

    @classmethod
    def simplex(cls, d, grad_bound_inf=1.0, grad_bound_2=None):
        if grad_bound_2 is None:
            grad_bound_2 = math.sqrt(d) * grad_bound_inf
        return cls("simplex", d, grad_bound_inf=grad_bound_inf, grad_bound_2=grad_bound_2)

    @classmethod
    def box(cls, lower, upper, d=None, grad_bound_inf=math.inf, grad_bound_2=math.inf):
        if d is None:
            d = np.broadcast(np.asarray(lower), np.asarray(upper)).size
        return cls("box", int(d), lower, upper, grad_bound_inf, grad_bound_2)

    @property
    def diameter_inf(self) -> float:
        if self.kind == "simplex":
            return 1.0 if self.d > 1 else 0.0
        return float(np.max(self.upper - self.lower)) if self.d else 0.0

    @property
    def diameter_2(self) -> float:
        if self.kind == "simplex":
            return math.sqrt(2.0) if self.d > 1 else 0.0
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            return False
        if self.kind == "simplex":
            return bool(np.all(w >= -tol) and abs(w.sum() - 1.0) <= tol)
        return bool(np.all(w >= self.lower - tol) and np.all(w <= self.upper + tol))

    def project(self, v) -> np.ndarray:
        """Euclidean projection onto the domain."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "box":
            return np.clip(v, self.lower, self.upper)
        return project_simplex(v)

    def center(self) -> np.ndarray:
        if self.kind == "simplex":
            return np.full(self.d, 1.0 / self.d)
        return 0.5 * (self.lower + self.upper)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class RegretLedger:
    """Running algorithm and expert (or comparator) cumulative losses.

    Every running sum is compensated. With ``comparator=True`` the ledger tracks
    a caller-chosen fixed comparator's per-round loss instead of taking the
    minimum over experts.
    """

    def __init__(self, dim: int, comparator: bool = False):
        if dim < 1:
            raise DimensionError("dimension must be >= 1")
        self.dim = dim
        self.comparator = comparator
        k = 1 + dim + (1 if comparator else 0)
        self._cols = k
        self._prefix = np.empty((16, k))
        self._raw = np.empty((16, k))
        self._sum = np.zeros(k)
        self._comp = np.zeros(k)
        self.round = 0

    @classmethod
    def from_arrays(cls, algo_losses, losses, comparator_losses=None) -> "RegretLedger":
        losses = np.asarray(losses, dtype=np.float64)
        algo = np.asarray(algo_losses, dtype=np.float64).reshape(-1)
        T, d = losses.shape
        if algo.shape[0] != T:
            raise DimensionError("algorithm and expert loss lengths differ")
        cols = [algo[:, None], losses]
        if comparator_losses is not None:
            cols.append(np.asarray(comparator_losses, dtype=np.float64).reshape(T, 1))
        raw = np.hstack(cols)
        led = cls(d, comparator=comparator_losses is not None)
        led._raw = raw
        led._prefix = _kernels.kahan_cumsum(raw) if T else np.empty((0, raw.shape[1]))
        led.round = T
        if T:
            # keep the compensated state consistent for further updates
            led._sum = led._prefix[-1].copy()
            led._comp = np.zeros(raw.shape[1])
        return led

    def _grow(self):
        n = max(16, 2 * self._prefix.shape[0])
        for name in ("_prefix", "_raw"):
            old = getattr(self, name)
            new = np.empty((n, self._cols))
            new[: self.round] = old[: self.round]
            setattr(self, name, new)

    def update(self, algo_loss: float, loss, comparator_loss: float | None = None) -> "RegretLedger":
        loss = np.asarray(loss, dtype=np.float64).reshape(-1)
        if loss.shape[0] != self.dim:
            raise DimensionError(f"loss has dimension {loss.shape[0]}, ledger has {self.dim}")
        if not math.isfinite(algo_loss):
            raise ValueError("algorithm loss must be finite")
        if self.comparator != (comparator_loss is not None):
            raise ValueError("comparator loss required exactly when the ledger tracks a comparator")
        row = np.empty(self._cols)
        row[0] = algo_loss
        row[1 : 1 + self.dim] = loss
        if self.comparator:
            row[-1] = comparator_loss
        if self.round >= self._prefix.shape[0]:
            self._grow()
        t = self._sum + row
        big = np.abs(self._sum) >= np.abs(row)
        self._comp += np.where(big, (self._sum - t) + row, (row - t) + self._sum)
        self._sum = t
        self._raw[self.round] = row
        self._prefix[self.round] = t + self._comp
        self.round += 1
        return self

    @property
    def algo_series(self) -> np.ndarray:
        return self._prefix[: self.round, 0]

    @property
    def expert_series(self) -> np.ndarray:
        return self._prefix[: self.round, 1 : 1 + self.dim]

    @property
    def algo_losses(self) -> np.ndarray:
        return self._raw[: self.round, 0]

    @property
    def expert_losses(self) -> np.ndarray:
        return self._raw[: self.round, 1 : 1 + self.dim]

    @property
    def algo_cum(self) -> float:
        return float(self.algo_series[-1]) if self.round else 0.0

    @property
    def expert_cum(self) -> np.ndarray:
        return self.expert_series[-1].copy() if self.round else np.zeros(self.dim)

    @property
    def per_round_regret_to_best(self) -> np.ndarray:
        """R_t for t = 1..T."""
        if self.comparator:
            return self.algo_series - self._prefix[: self.round, -1]
        return self.algo_series - self.expert_series.min(axis=1)


def ledger_update(ledger: RegretLedger, algo_loss: float, loss, comparator_loss=None) -> RegretLedger:
    return ledger.update(algo_loss, loss, comparator_loss)


@dataclass(frozen=True)
class RegretReport:
    final_regret: float
    prefix_min: float
    prefix_min_round: int
    prefix_max: float
    prefix_max_round: int
    series: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "final_regret": self.final_regret,
            "prefix_min": self.prefix_min,
            "prefix_min_round": self.prefix_min_round,
            "prefix_max": self.prefix_max,
            "prefix_max_round": self.prefix_max_round,
        }


def regret_report(ledger: RegretLedger) -> RegretReport:
    if ledger.round == 0:
        raise ValueError("regret report needs at least one round")
    r = ledger.per_round_regret_to_best
    imin = int(np.argmin(r))
    imax = int(np.argmax(r))
    return RegretReport(float(r[-1]), float(r[imin]), imin + 1, float(r[imax]), imax + 1, r.copy())
