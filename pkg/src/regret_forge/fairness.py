"""Interleaved Hedge over grouped streams and group fairness measurements."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .adversary import GroupedStream
from .core import RegretLedger
from .engines import HedgeLearner
from .regularizers import RateSchedule


@dataclass
class GroupLedgers:
    ledgers: list
    groups: np.ndarray
    learners: list

    @property
    def n_groups(self) -> int:
        return len(self.ledgers)

    @property
    def counts(self) -> np.ndarray:
        return np.array([led.round for led in self.ledgers])

    @property
    def global_rounds(self) -> int:
        return len(self.groups)

    def counts_at(self, prefix: int) -> np.ndarray:
        return np.bincount(self.groups[:prefix], minlength=self.n_groups)

    def avg_losses_at(self, prefix: int | None = None) -> np.ndarray:
        prefix = self.global_rounds if prefix is None else prefix
        n = self.counts_at(prefix)
        if np.any(n == 0):
            raise ValueError(f"some group has no rounds in the first {prefix}")
        return np.array([led.algo_series[k - 1] / k for led, k in zip(self.ledgers, n)])


def run_interleaved(stream: GroupedStream, schedule) -> GroupLedgers:
    """One Hedge copy per group, each advancing only on its own rounds.

    ``schedule`` is a RateSchedule, None (FTL), or a callable g -> schedule.
    """
    pick = schedule if callable(schedule) and not isinstance(schedule, RateSchedule) else (lambda g: schedule)
    learners = [HedgeLearner(pick(g), stream.d) for g in range(stream.n_groups)]
    for g, loss in zip(stream.groups, stream.losses):
        learners[g].update(loss)
    return GroupLedgers([h.ledger for h in learners], np.array(stream.groups), learners)


def fairness_gap(ledgers: GroupLedgers, prefix: int | None = None) -> float:
    """max over group pairs of |avg loss(g) - avg loss(g')|."""
    avg = ledgers.avg_losses_at(prefix)
    return float(avg.max() - avg.min())


def anytime_bound(d: int, T0: int) -> float:
    """(3/2) sqrt(log d / T0)."""
    return 1.5 * math.sqrt(math.log(d) / T0)


def horizon_bound(d: int, T0: int) -> float:
    """sqrt(log d / T0)."""
    return math.sqrt(math.log(d) / T0)


def fairness_report(ledgers: GroupLedgers, prefixes, bound_fn=anytime_bound, d: int = 2, tol: float = 1e-6) -> list:
    """Rows {prefix, gap, bound, satisfied} with T0 = smallest group count."""
    rows = []
    for p in prefixes:
        T0 = int(ledgers.counts_at(p).min())
        gap = fairness_gap(ledgers, p)
        b = bound_fn(d, T0)
        rows.append({"prefix": int(p), "gap": gap, "bound": b, "satisfied": bool(gap <= b + tol)})
    return rows


def report_json(rows) -> str:
    return "\n".join(json.dumps(r, sort_keys=True) for r in rows) + ("\n" if rows else "")


def _per_group_averages(stream: GroupedStream):
    """Prefix-by-prefix per-group average expert losses, shape (N, G, d)."""
    N, G, d = len(stream), stream.n_groups, stream.d
    onehot = np.zeros((N, G))
    onehot[np.arange(N), stream.groups] = 1.0
    sums = np.cumsum(onehot[:, :, None] * stream.losses[:, None, :], axis=0)
    counts = np.cumsum(onehot, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = sums / counts[:, :, None]
    return avg, counts


def check_isolation_fairness(stream: GroupedStream, anytime: bool = True, tol: float = 0.0,
                             prefixes: str | list = "sync") -> dict:
    """Worst cross-group spread of an expert's average loss.

    Fixed-horizon mode looks only at the full stream. Anytime mode checks every
    prefix in ``prefixes``: "sync" (groups seen equally often), "all" (every
    prefix where all groups are nonempty) or an explicit list.
    """
    avg, counts = _per_group_averages(stream)
    N = len(stream)
    if not anytime:
        idx = [N]
    elif prefixes == "sync":
        idx = stream.sync_prefixes()
    elif prefixes == "all":
        idx = [p for p in range(1, N + 1) if counts[p - 1].min() > 0]
    else:
        idx = list(prefixes)
    worst, at, expert = 0.0, None, None
    for p in idx:
        if counts[p - 1].min() == 0:
            continue
        a = avg[p - 1]
        spread = a.max(axis=0) - a.min(axis=0)
        j = int(np.argmax(spread))
        if at is None or spread[j] > worst:
            worst, at, expert = float(spread[j]), int(p), j
    fair = worst <= tol
    return {"worst_violation": worst, "prefix": at, "expert": expert, "fair": fair,
            "checked": len(idx), "tol": tol}


def approximate_regret(ledger: RegretLedger, eps: float) -> float:
    """L_hat_T - (1 + eps) min_j L_{T,j}."""
    return ledger.algo_cum - (1.0 + eps) * float(ledger.expert_cum.min())
