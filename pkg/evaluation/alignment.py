"""Unit-cost Levenshtein alignment with an explicit edit script."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, List, Optional, Sequence

import numpy as np


class EditKind(str, Enum):
    """Alignment operations."""
    MATCH = "match"
    SUB = "sub"
    INS = "ins"
    DEL = "del"


@dataclass(frozen=True)
class EditOp:
    kind: EditKind
    ref: Optional[Hashable] = None
    hyp: Optional[Hashable] = None


@dataclass
class AlignmentResult:
    """Error counts of one reference/hypothesis pair."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int
    script: List[EditOp] = field(default_factory=list)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        """Error rate as a fraction; infinite for an empty reference with errors."""
        if self.ref_len == 0:
            return math.inf if self.errors else 0.0
        return self.errors / self.ref_len


def align(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> AlignmentResult:
    """
    Minimal unit-cost alignment of ``hyp`` against ``ref``.

    Among equal-cost scripts the backtrace prefers a substitution (or match),
    then an insertion, then a deletion, so the result is deterministic.

    Args:
        ref: Reference tokens (possibly empty)
        hyp: Hypothesis tokens (possibly empty)

    Returns:
        AlignmentResult with counts and the ordered edit script
    """
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diagonal = cost[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            cost[i, j] = min(diagonal, cost[i, j - 1] + 1, cost[i - 1, j] + 1)

    script: List[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if cost[i, j] == cost[i - 1, j - 1] + (0 if same else 1):
                script.append(EditOp(EditKind.MATCH if same else EditKind.SUB, ref[i - 1], hyp[j - 1]))
                i, j = i - 1, j - 1
                continue
        if j > 0 and cost[i, j] == cost[i, j - 1] + 1:
            script.append(EditOp(EditKind.INS, None, hyp[j - 1]))
            j -= 1
        else:
            script.append(EditOp(EditKind.DEL, ref[i - 1], None))
            i -= 1
    script.reverse()

    counts = {kind: 0 for kind in EditKind}
    for op in script:
        counts[op.kind] += 1
    return AlignmentResult(
        substitutions=counts[EditKind.SUB],
        deletions=counts[EditKind.DEL],
        insertions=counts[EditKind.INS],
        ref_len=n,
        script=script,
    )


def apply_edit_script(ref: Sequence[Hashable], script: Sequence[EditOp]) -> List[Hashable]:
    """Replay an edit script on ``ref``; returns the hypothesis it describes."""
    output: List[Hashable] = []
    position = 0
    for op in script:
        if op.kind == EditKind.INS:
            output.append(op.hyp)
            continue
        if position >= len(ref) or ref[position] != op.ref:
            raise ValueError(f"Edit script does not fit the reference at position {position}")
        if op.kind == EditKind.MATCH:
            output.append(ref[position])
        elif op.kind == EditKind.SUB:
            output.append(op.hyp)
        position += 1
    if position != len(ref):
        raise ValueError(f"Edit script consumed {position} of {len(ref)} reference tokens")
    return output
