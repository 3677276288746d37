"""Non-IID federation generators: Dirichlet quantity/label skews and manual skew.

Randomness comes from Philox streams keyed by ``(seed, stream, key)`` so that a
class's draws do not depend on the order in which other classes are handled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasiblePartitionError, ParseError

_U64 = (1 << 64) - 1

# stream ids for _rng
_SHUFFLE, _LABEL, _QUANTITY, _SHARED, _FILL = range(5)


class SkewKind(str, Enum):
    IID = "IID"
    QS = "QS"
    LS = "LS"
    LQS = "LQS"
    MS = "MS"

    @classmethod
    def parse(cls, text: str) -> "SkewKind":
        return cls(text.strip().upper())


@dataclass(frozen=True)
class SkewConfig:
    kind: SkewKind
    participants: int
    seed: int = 0
    alpha_quantity: float | None = None
    alpha_label: float | None = None
    shared_classes: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "kind", SkewKind(self.kind))
        object.__setattr__(self, "shared_classes", frozenset(int(c) for c in self.shared_classes))
        if self.participants < 1:
            raise ValueError("participants must be >= 1")
        needs_q = self.kind in (SkewKind.QS, SkewKind.LQS)
        needs_l = self.kind in (SkewKind.LS, SkewKind.LQS)
        for needed, name in ((needs_q, "alpha_quantity"), (needs_l, "alpha_label")):
            value = getattr(self, name)
            if needed and value is None:
                raise ValueError(f"{self.kind.value} requires {name}")
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def alpha(self) -> float | None:
        """The alpha that characterises the skew (label alpha for LS/LQS)."""
        if self.kind in (SkewKind.LS, SkewKind.LQS):
            return self.alpha_label
        if self.kind is SkewKind.QS:
            return self.alpha_quantity
        return None


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Participant id for each pool index."""

    assignment: np.ndarray
    participants: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assignment must be 1-d")
        if a.size and (a.min() < 0 or a.max() >= self.participants):
            raise ValueError("participant id outside [0, P)")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def __eq__(self, other):
        if not isinstance(other, PartitionPlan):
            return NotImplemented
        return self.participants == other.participants and np.array_equal(
            self.assignment, other.assignment
        )

    def __len__(self) -> int:
        return self.assignment.size

    def indices(self) -> list[np.ndarray]:
        """Pool indices held by each participant, in ascending order."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(np.bincount(self.assignment, minlength=self.participants))[:-1]
        return np.split(order, bounds)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.participants).tolist()


def _rng(seed: int, stream: int, key: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & _U64, stream, key])
    return np.random.Generator(np.random.Philox(ss))


def _dirichlet(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    p = rng.dirichlet(np.full(size, alpha))
    # tiny alphas can underflow every component to 0
    if not np.isfinite(p).all() or p.sum() <= 0:
        p = np.zeros(size)
        p[rng.integers(size)] = 1.0
    return p / p.sum()


def _class_groups(labels: np.ndarray, class_count: int) -> list[np.ndarray]:
    return [np.flatnonzero(labels == j) for j in range(class_count)]


def _iid(n: int, cfg: SkewConfig) -> np.ndarray:
    order = _rng(cfg.seed, _SHUFFLE).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    for pid, chunk in enumerate(np.array_split(order, cfg.participants)):
        assignment[chunk] = pid
    return assignment


def _quantity_sizes(n: int, cfg: SkewConfig) -> np.ndarray:
    rng = _rng(cfg.seed, _QUANTITY)
    return rng.multinomial(n, _dirichlet(rng, cfg.alpha_quantity, cfg.participants))


def _qs(n: int, cfg: SkewConfig) -> np.ndarray:
    sizes = _quantity_sizes(n, cfg)
    order = _rng(cfg.seed, _SHUFFLE).permutation(n)
    return _fill_by_counts(order, sizes)


def _fill_by_counts(indices: np.ndarray, counts: Sequence[int]) -> np.ndarray:
    out = np.empty(len(indices), dtype=np.int64)
    start = 0
    for pid, c in enumerate(counts):
        out[start : start + c] = pid
        start += c
    return out


def _ls(labels: np.ndarray, class_count: int, cfg: SkewConfig) -> np.ndarray:
    assignment = np.empty(labels.size, dtype=np.int64)
    for j, idx in enumerate(_class_groups(labels, class_count)):
        rng = _rng(cfg.seed, _LABEL, j)
        shares = _dirichlet(rng, cfg.alpha_label, cfg.participants)
        counts = rng.multinomial(idx.size, shares)
        assignment[rng.permutation(idx)] = _fill_by_counts(idx, counts)
    return assignment


def _lqs(labels: np.ndarray, class_count: int, cfg: SkewConfig) -> np.ndarray:
    """Quantity-skew sizes filled class by class with label-skew preferences.

    Each class draws Dirichlet shares over participants; the shares are scaled
    by every participant's remaining capacity and overflow is re-dealt to
    participants that still have room, so final sizes match the quantity draw.
    """
    capacity = _quantity_sizes(labels.size, cfg).astype(np.int64)
    assignment = np.empty(labels.size, dtype=np.int64)
    for j, idx in enumerate(_class_groups(labels, class_count)):
        rng = _rng(cfg.seed, _LABEL, j)
        shares = _dirichlet(rng, cfg.alpha_label, cfg.participants)
        fill = _rng(cfg.seed, _FILL, j)
        counts = np.zeros(cfg.participants, dtype=np.int64)
        remaining = idx.size
        while remaining:
            room = capacity - counts
            w = shares * room
            if w.sum() <= 0:
                w = room.astype(float)
            draw = fill.multinomial(remaining, w / w.sum())
            draw = np.minimum(draw, room)
            counts += draw
            remaining -= int(draw.sum())
        capacity -= counts
        assignment[rng.permutation(idx)] = _fill_by_counts(idx, counts)
    return assignment


def dirichlet_partition(
    labels: Sequence[int], cfg: SkewConfig, class_count: int | None = None
) -> PartitionPlan:
    """Split a labelled pool into ``cfg.participants`` disjoint partitions."""
    labels = np.asarray(labels, dtype=np.int64)
    if cfg.kind is SkewKind.MS:
        raise ValueError("use manual_skew_partition for MS")
    if labels.size == 0:
        raise InfeasiblePartitionError("cannot partition an empty pool")
    if cfg.participants > labels.size:
        raise InfeasiblePartitionError(
            f"{cfg.participants} participants exceed pool size {labels.size}"
        )
    c = class_count if class_count is not None else int(labels.max()) + 1
    if cfg.kind is SkewKind.IID:
        a = _iid(labels.size, cfg)
    elif cfg.kind is SkewKind.QS:
        a = _qs(labels.size, cfg)
    elif cfg.kind is SkewKind.LS:
        a = _ls(labels, c, cfg)
    else:
        a = _lqs(labels, c, cfg)
    return PartitionPlan(a, cfg.participants)


def manual_skew_partition(
    labels: Sequence[int],
    participants: int,
    shared_classes: Iterable[int] = (),
    seed: int = 0,
    class_count: int | None = None,
) -> PartitionPlan:
    """Each participant solely owns some classes; shared classes are split evenly.

    Non-shared classes are dealt round-robin in index order, so participant
    ``k`` owns the ``k``-th, ``k+P``-th, ... dedicated class.
    """
    labels = np.asarray(labels, dtype=np.int64)
    shared = sorted(set(int(c) for c in shared_classes))
    c = class_count if class_count is not None else (int(labels.max()) + 1 if labels.size else 0)
    if participants < 1:
        raise ValueError("participants must be >= 1")
    if any(s < 0 or s >= c for s in shared):
        raise InfeasiblePartitionError(f"shared classes {shared} outside [0, {c})")
    if c < participants + len(shared):
        raise InfeasiblePartitionError(
            f"{c} classes cannot give {participants} participants a sole class "
            f"with {len(shared)} shared"
        )
    assignment = np.empty(labels.size, dtype=np.int64)
    dedicated = [j for j in range(c) if j not in shared]
    for k, j in enumerate(dedicated):
        assignment[labels == j] = k % participants
    for j in shared:
        idx = _rng(seed, _SHARED, j).permutation(np.flatnonzero(labels == j))
        for pid, chunk in enumerate(np.array_split(idx, participants)):
            assignment[chunk] = pid
    return PartitionPlan(assignment, participants)


def owners_by_class(plan: PartitionPlan, labels: Sequence[int], class_count: int) -> list[set[int]]:
    """Set of participants holding at least one sample of each class."""
    labels = np.asarray(labels, dtype=np.int64)
    owners: list[set[int]] = [set() for _ in range(class_count)]
    for lab, pid in zip(labels.tolist(), plan.assignment.tolist()):
        owners[lab].add(pid)
    return owners


def partition(labels: Sequence[int], cfg: SkewConfig, class_count: int | None = None) -> PartitionPlan:
    if cfg.kind is SkewKind.MS:
        return manual_skew_partition(labels, cfg.participants, cfg.shared_classes, cfg.seed, class_count)
    return dirichlet_partition(labels, cfg, class_count)


def write_plan(plan: PartitionPlan, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pool_index", "participant_id"])
        for i, pid in enumerate(plan.assignment.tolist()):
            w.writerow([i, pid])


def read_plan(path: str | Path, participants: int | None = None) -> PartitionPlan:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["pool_index", "participant_id"]:
        raise ParseError("expected header pool_index,participant_id", 1)
    pairs = {}
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            i, pid = (int(x) for x in row)
        except ValueError:
            raise ParseError(f"malformed row {row!r}", lineno) from None
        if i in pairs:
            raise ParseError(f"pool index {i} assigned twice", lineno)
        pairs[i] = pid
    if sorted(pairs) != list(range(len(pairs))):
        raise ParseError("pool indices must cover 0..N-1")
    assignment = np.array([pairs[i] for i in range(len(pairs))], dtype=np.int64)
    p = participants if participants is not None else int(assignment.max(initial=-1)) + 1
    return PartitionPlan(assignment, p)


def read_labels(path: str | Path) -> np.ndarray:
    """Read a one-column label file; an optional non-numeric header line is skipped."""
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(int(row[-1]))
            except ValueError:
                if lineno == 1:
                    continue
                raise ParseError(f"not an integer label: {row!r}", lineno) from None
    return np.asarray(values, dtype=np.int64)
