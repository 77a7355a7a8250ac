"""Regret-preserving and regret-non-increasing rewrites of two-expert binary
sequences under Decreasing Hedge (eta_t = scale / sqrt(t)), canonicalization,
and the exhaustive best-case search."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .adversary import CanonicalForm, canonical, decode, encode
from .core import LossSequence, ModeError

SEARCH_MAX_T = 17
WITNESS_CAP = 100
SEARCH_EPS = 1e-12
DENSE_MAX_T = 1024


# Evaluation


@lru_cache(maxsize=16)
def _table(T: int, scale: float) -> np.ndarray:
    tab = _kernels.prob_table(T, scale)
    tab.setflags(write=False)
    return tab


def _table_for(T, scale):
    n = 16
    while n < T:
        n *= 2
    return _table(n, float(scale))


class DHEvaluator:
    """Memoized Decreasing Hedge regret for binary two-expert sequences."""

    def __init__(self, scale: float = 1.0, cache_size: int = 1 << 16):
        self.scale = float(scale)
        self._memo: dict[bytes, float] = {}
        self._cap = cache_size

    def regret_codes(self, codes) -> np.ndarray:
        """Regrets for a batch of code rows (N, T)."""
        codes = np.atleast_2d(np.asarray(codes, dtype=np.int8))
        T = codes.shape[1]
        if T <= DENSE_MAX_T:
            return _kernels.dh_binary_regret(codes, _table_for(T, self.scale))
        return np.array([self._regret_long(c) for c in codes])

    def _regret_long(self, codes):
        L = decode(codes).losses
        rates = self.scale / np.sqrt(np.arange(1, len(codes) + 2, dtype=np.float64))
        _, algo, _ = _kernels.hedge_run(L, rates, _kernels.MODE_RATES, math.log(2))
        cum = _kernels.kahan_cumsum(np.column_stack([algo, L]))[-1]
        return float(cum[0] - min(cum[1], cum[2]))

    def __call__(self, seq) -> float:
        codes = encode(seq) if isinstance(seq, LossSequence) else np.asarray(seq, dtype=np.int8)
        key = codes.tobytes()
        hit = self._memo.get(key)
        if hit is None:
            hit = float(self.regret_codes(codes[None, :])[0])
            if len(self._memo) >= self._cap:
                self._memo.clear()
            self._memo[key] = hit
        return hit


_DEFAULT = DHEvaluator()


def dh_regret(seq, scale: float = 1.0) -> float:
    if scale == 1.0:
        return _DEFAULT(seq)
    return DHEvaluator(scale)(seq)


# Profiles and rewrites


@dataclass(frozen=True)
class DeltaProfile:
    deltas: np.ndarray
    leader_changes: list
    first_strict_leader: int | None


def _check_binary2(seq):
    if seq.mode != "binary" or seq.d != 2:
        raise ModeError("needs a binary two-expert sequence")


def delta_profile(seq: LossSequence) -> DeltaProfile:
    """Delta_t = L_{2,t} - L_{1,t} for t = 1..T and the leader-change rounds."""
    _check_binary2(seq)
    L = seq.losses
    deltas = np.cumsum(L[:, 1] - L[:, 0]).astype(np.int64)
    changes = []
    last = 0
    first = None
    for t, dt in enumerate(deltas, start=1):
        if dt == 0:
            continue
        s = 1 if dt > 0 else -1
        if first is None:
            first = 1 if s > 0 else 2
        if last and s != last:
            changes.append(t)
        last = s
    return DeltaProfile(deltas, changes, first)


@dataclass(frozen=True)
class Rewrite:
    seq: LossSequence
    rule: str
    round: int
    valid: bool


def add_constant(seq: LossSequence, t: int, c: float) -> LossSequence:
    """Shift both experts' losses at round t (1-based) by c."""
    if not 1 <= t <= seq.T:
        raise ValueError("round out of range")
    L = np.array(seq.losses)
    L[t - 1] += c
    if seq.mode == "binary" and not np.all((L[t - 1] == 0) | (L[t - 1] == 1)):
        raise ValueError("shift leaves binary losses outside {0, 1}")
    if seq.mode == "dtol" and (L[t - 1].min() < 0 or L[t - 1].max() > 1):
        raise ValueError("shift leaves losses outside [0, 1]")
    return seq.with_losses(L)


def switch_at(seq: LossSequence, t: int) -> Rewrite:
    """Swap the two experts from round t onward; regret-preserving iff Delta_{t-1} = 0."""
    if not 1 <= t <= seq.T:
        raise ValueError("round out of range")
    if seq.d != 2:
        raise ModeError("switching is defined for two experts")
    L = np.array(seq.losses)
    prev = 0.0 if t == 1 else float(L[: t - 1, 1].sum() - L[: t - 1, 0].sum())
    L[t - 1 :] = L[t - 1 :, ::-1]
    return Rewrite(seq.with_losses(L), "switch", t, prev == 0.0)


_SWAP_RULES = {(2, 0): "swap-a", (0, 1): "swap-b", (2, 1): "swap-c"}


def swap_at(seq: LossSequence, t: int) -> Rewrite:
    """Exchange rounds t and t+1, tagged with the matching swapping rule."""
    if not 1 <= t < seq.T:
        raise ValueError("need 1 <= t < T")
    _check_binary2(seq)
    codes = encode(seq)
    prev = int(seq.losses[: t - 1, 1].sum() - seq.losses[: t - 1, 0].sum())
    rule = _SWAP_RULES.get((int(codes[t - 1]), int(codes[t])), "unguarded")
    need = 1 if rule == "swap-c" else 0
    ok = rule != "unguarded" and prev >= need
    out = codes.copy()
    out[t - 1], out[t] = codes[t], codes[t - 1]
    return Rewrite(decode(out), rule if ok else "unguarded", t, ok)


def remove_leader_changes(seq: LossSequence, audit: list | None = None, ev=None) -> LossSequence:
    """Switch at the start of each sign change until Delta_t >= 0 everywhere."""
    _check_binary2(seq)
    ev = ev or _DEFAULT
    prof = delta_profile(seq)
    if prof.first_strict_leader == 2:
        seq = _log(audit, ev, seq, switch_at(seq, 1))
    for _ in range(seq.T + 1):
        deltas = delta_profile(seq).deltas
        neg = np.flatnonzero(deltas < 0)
        if not len(neg):
            return seq
        t = int(neg[0]) + 1  # first round with Delta_t < 0; Delta_{t-1} = 0
        rw = switch_at(seq, t)
        assert rw.valid
        seq = _log(audit, ev, seq, rw)
    raise RuntimeError("leader-change removal did not terminate")


@dataclass(frozen=True)
class AuditEntry:
    rule: str
    round: int
    regret_before: float
    regret_after: float

    @property
    def delta(self) -> float:
        return self.regret_after - self.regret_before

    def as_dict(self) -> dict:
        return {"rule": self.rule, "round": self.round,
                "regret_before": self.regret_before, "regret_after": self.regret_after}


def _log(audit, ev, before, rw):
    if audit is not None:
        audit.append(AuditEntry(rw.rule, rw.round, ev(before), ev(rw.seq)))
    return rw.seq


def _codes_rewrite(seq, codes, rule, t):
    return Rewrite(decode(codes), rule, t, True)


@dataclass
class Canonicalization:
    seq: LossSequence
    audit: list = field(default_factory=list)


_ORDER = {1: 0, 0: 1, 2: 2}


def canonicalize(seq: LossSequence, scale: float = 1.0) -> Canonicalization:
    """Rewrite ``seq`` into Canonical(T) through a chain of audited steps."""
    _check_binary2(seq)
    T = seq.T
    if T % 2 or T < 16:
        raise ValueError(f"canonicalize needs an even horizon 2K >= 16, got {T}")
    ev = _DEFAULT if scale == 1.0 else DHEvaluator(scale)
    audit: list[AuditEntry] = []

    # (1,1) -> (0,0)
    for t in np.flatnonzero(encode(seq) == 3) + 1:
        seq = _log(audit, ev, seq, Rewrite(add_constant(seq, int(t), -1.0), "const-shift", int(t), True))

    seq = remove_leader_changes(seq, audit, ev)

    # bubble (0,1) left and (1,0) right
    changed = True
    while changed:
        changed = False
        codes = encode(seq)
        for i in range(T - 1):
            if _ORDER[int(codes[i])] > _ORDER[int(codes[i + 1])]:
                rw = swap_at(seq, i + 1)
                assert rw.valid, rw
                seq = _log(audit, ev, seq, rw)
                codes = encode(seq)
                changed = True

    form = CanonicalForm.from_sequence(seq)
    assert form is not None and form.a >= form.b
    a, c, b = form.a, form.c, form.b

    def block(a, c, b, rule, t):
        nonlocal seq
        rw = Rewrite(CanonicalForm(a, c, b).to_sequence(), rule, t, True)
        seq = _log(audit, ev, seq, rw)

    if a == 0 and b == 0:
        # all zero rounds: not reachable by the block lemmas, jump straight
        rw = Rewrite(canonical(T), "all-zero", 1, True)
        seq = _log(audit, ev, seq, rw)
        return Canonicalization(seq, audit)

    if c % 2:
        # last (0,1) becomes (0,0)
        c_codes = encode(seq).copy()
        c_codes[a - 1] = 0
        seq = _log(audit, ev, seq, _codes_rewrite(seq, c_codes, "c-even", a))
        a, c = a - 1, c + 1

    while a > b:
        codes = encode(seq).copy()
        codes[a - 1] = 2
        seq = _log(audit, ev, seq, _codes_rewrite(seq, codes, "equalize", a))
        for t in range(a, a + c):
            rw = swap_at(seq, t)
            assert rw.rule == "swap-a", rw
            seq = _log(audit, ev, seq, rw)
        a, b = a - 1, b + 1

    while c >= 4 and (a >= 4 or c >= 3 + 3 / a + 1 / a**2):
        block(a + 1, c - 2, b + 1, "zero-shrink", a + 1)
        a, c, b = a + 1, c - 2, b + 1

    if c == 0:
        block(a - 1, 2, b - 1, "zero-insert", a)
        a, c, b = a - 1, 2, b - 1

    if (a, c, b) != (T // 2 - 1, 2, T // 2 - 1):
        raise RuntimeError(f"pipeline ended at block form {(a, c, b)}")
    return Canonicalization(seq, audit)


def block_form_best(T: int, scale: float = 1.0) -> tuple[float, CanonicalForm]:
    """Minimum regret over (0,1)^a (0,0)^c (1,0)^b with a + b + c = T."""
    forms = [CanonicalForm(a, c, T - a - c) for a in range(T + 1) for c in range(T + 1 - a)]
    codes = np.array([encode(f.to_sequence()) for f in forms], dtype=np.int8)
    regs = DHEvaluator(scale).regret_codes(codes)
    i = int(np.argmin(regs))
    return float(regs[i]), forms[i]


# Exhaustive search


@dataclass
class SearchResult:
    min_regret: float
    witnesses: list
    sequences_examined: int

    def witness_codes(self) -> np.ndarray:
        if not self.witnesses:
            return np.zeros((0, 0), dtype=np.int8)
        return np.array([encode(w) for w in self.witnesses], dtype=np.int8)


def _search_task(args):
    T, prefix, scale, cap, eps = args
    table = _table_for(T, scale)
    best, count, wit, wreg = _kernels.search_min(T, np.asarray(prefix, dtype=np.int8), table, cap, eps)
    return best, int(count), wit, wreg


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("REGRET_FORGE_WORKERS", "1")))
    except ValueError:
        return 1


def brute_force_best(T: int, workers: int | None = None, scale: float = 1.0,
                     cap: int = WITNESS_CAP, eps: float = SEARCH_EPS) -> SearchResult:
    """Exact minimum regret over all of {(0,0),(0,1),(1,0)}^T."""
    if T > SEARCH_MAX_T:
        raise ValueError(f"exhaustive search budget exceeded: T = {T} > {SEARCH_MAX_T}")
    if T < 1:
        raise ValueError("T must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    depth = 0
    while depth < T and 3**depth < 8 * workers and depth < 4:
        depth += 1
    prefixes = [np.array(_digits(i, depth), dtype=np.int8) for i in range(3**depth)]
    tasks = [(T, p, float(scale), cap, eps) for p in prefixes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_search_task, tasks))
    else:
        parts = [_search_task(t) for t in tasks]
    best = min(p[0] for p in parts)
    count = sum(p[1] for p in parts)
    keep = []
    # prefixes are enumerated in lexicographic order, so concatenation is sorted
    for b, _, wit, wreg in parts:
        if b > best + eps:
            continue
        for row, r in zip(wit, wreg):
            if r <= best + eps and len(keep) < cap:
                keep.append(row)
    return SearchResult(float(best), [decode(r) for r in keep], count)


def _digits(idx, n):
    out = [0] * n
    for i in range(n - 1, -1, -1):
        idx, out[i] = divmod(idx, 3)
    return out
