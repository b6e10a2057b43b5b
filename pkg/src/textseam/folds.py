"""Fold assignment for cross-labeling.

Instances are shuffled once under a fixed seed and dealt round-robin
into k folds, so fold sizes differ by at most one.  Cross-labeling then
trains on every fold but one and predicts the held-out fold, giving each
instance a prediction from a model that never saw it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, Sequence

from .corpus import InstanceId
from .errors import ConfigError, IdMismatchError


@dataclass(frozen=True)
class FoldAssignment:
    seed: int
    k: int
    by_id: dict[InstanceId, int]

    def fold_ids(self, fold: int) -> list[InstanceId]:
        return [i for i, f in self.by_id.items() if f == fold]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for f in self.by_id.values():
            counts[f] += 1
        return counts


def _sort_key(instance_id: InstanceId) -> tuple[int, str]:
    # Mixed int and str ids sort as (type rank, stringified value) so the
    # pre-shuffle order never depends on input order.
    if isinstance(instance_id, int):
        return (0, f"{instance_id:024d}")
    return (1, instance_id)


def split(ids: Sequence[InstanceId], k: int, seed: int) -> FoldAssignment:
    """Assign each id to one of ``k`` folds, deterministically in ``seed``.

    Args:
        ids: Instance ids, unique, in any order.
        k: Fold count, between 2 and ``len(ids)``.
        seed: Shuffle seed.

    Returns:
        A :class:`FoldAssignment`; fold sizes differ by at most one.

    Raises:
        IdMismatchError: on duplicate ids.
        ConfigError: on an unusable ``k``.
    """
    if not 2 <= k <= len(ids):
        raise ConfigError(f"fold count {k} unusable for {len(ids)} instances")
    seen: set[InstanceId] = set()
    dups: list[InstanceId] = []
    for i in ids:
        if i in seen and i not in dups:
            dups.append(i)
        seen.add(i)
    if dups:
        raise IdMismatchError("duplicate ids in fold split", dups)
    ordered = sorted(ids, key=_sort_key)
    random.Random(seed).shuffle(ordered)
    return FoldAssignment(seed=seed, k=k, by_id={i: pos % k for pos, i in enumerate(ordered)})


def cross_label_plan(assignment: FoldAssignment) -> list[tuple[list[InstanceId], list[InstanceId]]]:
    """Per fold: (train ids from all other folds, predict ids of the fold)."""
    plan = []
    for fold in range(assignment.k):
        train = [i for i, f in assignment.by_id.items() if f != fold]
        plan.append((train, assignment.fold_ids(fold)))
    return plan


def save_assignment(assignment: FoldAssignment, stream: IO[str]) -> None:
    """Persist as JSON with a sorted, type-preserving id list."""
    pairs = sorted(assignment.by_id.items(), key=lambda kv: _sort_key(kv[0]))
    json.dump(
        {"seed": assignment.seed, "k": assignment.k, "assignment": [[i, f] for i, f in pairs]},
        stream,
        ensure_ascii=False,
    )


def load_assignment(stream: IO[str]) -> FoldAssignment:
    try:
        obj = json.load(stream)
        seed = obj["seed"]
        k = obj["k"]
        pairs = obj["assignment"]
        by_id: dict[InstanceId, int] = {}
        for instance_id, fold in pairs:
            if isinstance(instance_id, bool) or not isinstance(instance_id, (int, str)):
                raise ConfigError(f"fold id must be text or integer, got {instance_id!r}")
            if instance_id in by_id:
                raise IdMismatchError("duplicate ids in fold file", [instance_id])
            if not isinstance(fold, int) or not 0 <= fold < k:
                raise ConfigError(f"fold {fold!r} outside [0, {k}) for id {instance_id!r}")
            by_id[instance_id] = fold
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unreadable fold file: {exc}") from exc
    return FoldAssignment(seed=seed, k=k, by_id=by_id)
