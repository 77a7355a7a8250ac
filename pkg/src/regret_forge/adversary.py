"""Sequence constructions: canonical best-case sequences, the forecasting
counterexample, seeded random baselines and grouped streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LossSequence

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Outputs ``offset .. offset+n-1`` of the splitmix64 stream started at ``seed``."""
    with np.errstate(over="ignore"):
        i = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + i * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def uniform01(seed: int, n: int, offset: int = 0) -> np.ndarray:
    return (splitmix64(seed, n, offset) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def random_dtol(T: int, d: int, binary: bool = True, seed: int = 0) -> LossSequence:
    """Seeded random losses, uniform on {0,1} (binary) or [0,1]."""
    if T < 0 or d < 1:
        raise ValueError("need T >= 0 and d >= 1")
    z = splitmix64(seed, T * d)
    if binary:
        x = (z >> np.uint64(63)).astype(np.float64)
    else:
        x = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return LossSequence(x.reshape(T, d), "binary" if binary else "dtol")


@dataclass(frozen=True)
class CanonicalForm:
    """(0,1)^a (0,0)^c (1,0)^b."""

    a: int
    c: int
    b: int

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0:
            raise ValueError("block lengths must be nonnegative")

    @property
    def T(self) -> int:
        return self.a + self.b + self.c

    def to_sequence(self) -> LossSequence:
        rows = [[0.0, 1.0]] * self.a + [[0.0, 0.0]] * self.c + [[1.0, 0.0]] * self.b
        return LossSequence(np.array(rows).reshape(-1, 2), "binary")

    @classmethod
    def from_sequence(cls, seq: LossSequence) -> "CanonicalForm | None":
        """The block form of ``seq`` or None if it is not of that shape."""
        codes = encode(seq)
        a = int(np.argmax(codes != 1)) if np.any(codes != 1) else len(codes)
        rest = codes[a:]
        c = int(np.argmax(rest != 0)) if np.any(rest != 0) else len(rest)
        tail = rest[c:]
        if np.all(tail == 2):
            return cls(a, c, len(tail))
        return None


def encode(seq: LossSequence) -> np.ndarray:
    """Codes 0=(0,0), 1=(0,1), 2=(1,0), 3=(1,1)."""
    if seq.d != 2 or seq.mode != "binary":
        raise ValueError("needs a binary two-expert sequence")
    L = seq.losses.astype(np.int8)
    return (2 * L[:, 0] + L[:, 1]).astype(np.int8)


_ROWS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)


def decode(codes) -> LossSequence:
    return LossSequence(_ROWS[np.asarray(codes, dtype=np.int64)].reshape(-1, 2), "binary")


def canonical(T: int) -> LossSequence:
    """(0,1)^{K-1} (0,0)^2 (1,0)^{K-1} with K = T/2."""
    if T % 2 or T < 16:
        raise ValueError(f"canonical sequence needs an even horizon 2K >= 16, got {T}")
    K = T // 2
    return CanonicalForm(K - 1, 2, K - 1).to_sequence()


def piecewise_outcomes(T: int) -> np.ndarray:
    """T/2 zeros followed by T/2 ones."""
    if T % 2 or T < 2:
        raise ValueError("piecewise outcomes need an even horizon")
    return np.repeat([0.0, 1.0], T // 2)


@dataclass(frozen=True)
class LinearizedConfig:
    q0: float = 1.0 / 16.0
    q1: float = 0.75
    T: int = 100_000

    def __post_init__(self):
        if not 0 < self.q0 < 0.5 < self.q1 < 1:
            raise ValueError("need 0 < q0 < 1/2 < q1 < 1")
        if self.T % 2:
            raise ValueError("T must be even")


def segment_predictions(cfg: LinearizedConfig) -> tuple[int, float]:
    """(t1, t3 coefficient): first-segment length bound and third-segment slope."""
    q0, q1 = cfg.q0, cfg.q1
    lg = math.log((1 - q0) / q0)
    u = (lg + math.sqrt(lg * lg + 4 * q0 * q0)) / (2 * q0)
    t1 = math.ceil(u * u)
    return t1, q0 / (2 * (1 - q1))


def t3_root(cfg: LinearizedConfig) -> float:
    """u^2 for the positive root u of the third-segment quadratic.

    This is the (real) round index by which p_t >= q1 is guaranteed; the
    third segment length is about ``t3_root - T/2``.
    """
    q0, q1, T = cfg.q0, cfg.q1, cfg.T
    t1, _ = segment_predictions(cfg)
    lg = math.log(q1 / (1 - q1))
    const = (1 - q1 + q0) / 2 * T + t1 * (0.5 - q0) + 1 - q1
    u = (lg + math.sqrt(lg * lg + 4 * (1 - q1) * const)) / (2 * (1 - q1))
    return u * u


@dataclass(frozen=True)
class GroupedStream:
    groups: np.ndarray
    losses: np.ndarray
    n_groups: int
    sync_period: int | None = None

    def __post_init__(self):
        g = np.asarray(self.groups, dtype=np.int64)
        L = np.asarray(self.losses, dtype=np.float64)
        if L.ndim != 2 or len(g) != len(L):
            raise ValueError("groups and losses must align")
        if len(g) and (g.min() < 0 or g.max() >= self.n_groups):
            raise ValueError("group id out of range")
        g.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "groups", g)
        object.__setattr__(self, "losses", L)

    def __len__(self):
        return len(self.groups)

    @property
    def d(self) -> int:
        return self.losses.shape[1]

    def subsequence(self, g: int) -> LossSequence:
        return LossSequence(self.losses[self.groups == g], "dtol")

    def sync_prefixes(self) -> list[int]:
        """Prefix lengths at which every group has been seen equally often."""
        if self.sync_period:
            return list(range(self.sync_period, len(self) + 1, self.sync_period))
        counts = np.zeros(self.n_groups, dtype=np.int64)
        out = []
        for i, g in enumerate(self.groups):
            counts[g] += 1
            if counts.min() == counts.max():
                out.append(i + 1)
        return out


def grouped_stream(base: LossSequence, groups: int, pattern: str = "round-robin", seed: int = 0) -> GroupedStream:
    """Interleave ``base`` over groups.

    round-robin: every base round is shown to groups 0..G-1 in turn.
    block-permuted: like round-robin but each block visits groups in a seeded
    random order. pair-shuffled: round-robin where each group sees ``base``
    with seeded swaps inside consecutive pairs (fair every 2G rounds).
    random: each base round goes to one independent uniform group.
    """
    if groups < 2:
        raise ValueError("need at least two groups")
    T = base.T
    L = base.losses
    if pattern == "round-robin":
        gid = np.tile(np.arange(groups), T)
        return GroupedStream(gid, np.repeat(L, groups, axis=0), groups, groups)
    if pattern == "block-permuted":
        keys = uniform01(seed, T * groups).reshape(T, groups)
        gid = np.argsort(keys, axis=1, kind="stable").ravel()
        return GroupedStream(gid, np.repeat(L, groups, axis=0), groups, groups)
    if pattern == "pair-shuffled":
        # group g sees base with a seeded subset of consecutive pairs swapped;
        # per-expert totals agree whenever each group has seen an even count
        if T % 2:
            raise ValueError("pair-shuffled pattern needs an even base length")
        flips = (splitmix64(seed, groups * (T // 2)) >> np.uint64(63)).reshape(groups, T // 2)
        flips[0] = 0
        idx = np.arange(T).reshape(-1, 2)
        rows = np.empty((T, groups, L.shape[1]))
        for g in range(groups):
            order = np.where(flips[g][:, None] == 1, idx[:, ::-1], idx).ravel()
            rows[:, g] = L[order]
        gid = np.tile(np.arange(groups), T)
        return GroupedStream(gid, rows.reshape(T * groups, -1), groups, 2 * groups)
    if pattern == "random":
        gid = (splitmix64(seed, T) % np.uint64(groups)).astype(np.int64)
        return GroupedStream(gid, np.array(L), groups, None)
    raise ValueError(f"unknown pattern {pattern!r}")
