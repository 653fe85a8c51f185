"""Corpus WER / CER with pooled error counts."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Union

from lyrics_asr.corpus.text import normalize_text
from lyrics_asr.exceptions import ScoringError

from evaluation.alignment import align

logger = logging.getLogger(__name__)

TSV_HEADER = "utt_id\tN\tS\tD\tI\twer"


class ScoreUnit(str, Enum):
    """Token unit scored."""
    WORD = "word"
    CHAR = "char"


def score_units(text: str, unit: ScoreUnit) -> List[str]:
    """Normalized words, or characters with spaces removed."""
    normalized = normalize_text(text)
    if unit == ScoreUnit.WORD:
        return normalized.split()
    return [char for char in normalized if char != " "]


@dataclass
class UtteranceScore:
    utt_id: str
    ref_len: int
    substitutions: int
    deletions: int
    insertions: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return 100.0 * self.errors / self.ref_len


@dataclass
class ScoreReport:
    """Per-utterance rows plus pooled totals."""

    unit: ScoreUnit
    rows: List[UtteranceScore] = field(default_factory=list)
    excluded: List[str] = field(default_factory=list)

    @property
    def ref_len(self) -> int:
        return sum(row.ref_len for row in self.rows)

    @property
    def substitutions(self) -> int:
        return sum(row.substitutions for row in self.rows)

    @property
    def deletions(self) -> int:
        return sum(row.deletions for row in self.rows)

    @property
    def insertions(self) -> int:
        return sum(row.insertions for row in self.rows)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def error_rate(self) -> float:
        """100 * (S + D + I) / N over all scored utterances."""
        if self.ref_len == 0:
            raise ScoringError("No utterance with a nonempty reference to score")
        return 100.0 * self.errors / self.ref_len

    def to_dict(self) -> Dict[str, object]:
        return {
            "unit": self.unit.value,
            "utterances": len(self.rows),
            "N": self.ref_len,
            "S": self.substitutions,
            "D": self.deletions,
            "I": self.insertions,
            "error_rate": self.error_rate,
            "excluded": list(self.excluded),
        }

    def to_tsv(self) -> str:
        lines = [TSV_HEADER]
        for row in self.rows:
            lines.append(f"{row.utt_id}\t{row.ref_len}\t{row.substitutions}\t{row.deletions}\t"
                         f"{row.insertions}\t{row.wer:.2f}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        label = "WER" if self.unit == ScoreUnit.WORD else "CER"
        lines = [
            f"# {label} Report",
            "",
            f"- **Utterances:** {len(self.rows)}",
            f"- **Reference units:** {self.ref_len}",
            f"- **Substitutions / Deletions / Insertions:** "
            f"{self.substitutions} / {self.deletions} / {self.insertions}",
            f"- **{label}:** {self.error_rate:.2f}%",
        ]
        if self.excluded:
            lines.append(f"- **Excluded (empty reference):** {', '.join(self.excluded)}")
        lines += ["", "| Utterance | N | S | D | I | Error rate |", "|---|---|---|---|---|---|"]
        for row in self.rows:
            lines.append(f"| {row.utt_id} | {row.ref_len} | {row.substitutions} | {row.deletions} | "
                         f"{row.insertions} | {row.wer:.2f} |")
        return "\n".join(lines) + "\n"


def _check_ids(refs: Mapping[str, str], hyps: Mapping[str, str]) -> None:
    missing = sorted(set(refs) - set(hyps))
    extra = sorted(set(hyps) - set(refs))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing hypotheses for {missing}")
        if extra:
            parts.append(f"hypotheses without reference {extra}")
        raise ScoringError("Utterance ids do not match: " + "; ".join(parts))


def score_corpus(refs: Mapping[str, str], hyps: Mapping[str, str],
                 unit: Union[ScoreUnit, str] = ScoreUnit.WORD) -> ScoreReport:
    """
    Align every utterance and pool the counts.

    Utterances whose normalized reference is empty are left out of the
    pooled counts and listed in ``excluded``.

    Args:
        refs: Reference transcript per utterance id
        hyps: Hypothesis text per utterance id (same id set)
        unit: ``word`` or ``char``

    Returns:
        ScoreReport with rows sorted by utterance id

    Raises:
        ScoringError: Id sets differ
    """
    _check_ids(refs, hyps)
    unit = ScoreUnit(unit)
    report = ScoreReport(unit=unit)
    for utt_id in sorted(refs):
        ref = score_units(refs[utt_id], unit)
        if not ref:
            report.excluded.append(utt_id)
            continue
        result = align(ref, score_units(hyps[utt_id], unit))
        report.rows.append(UtteranceScore(utt_id, result.ref_len, result.substitutions,
                                          result.deletions, result.insertions))
    if report.excluded:
        logger.warning(f"Excluded {len(report.excluded)} utterances with empty references: {report.excluded}")
    return report


def wer(refs: Mapping[str, str], hyps: Mapping[str, str]) -> float:
    """Corpus word error rate in percent."""
    return score_corpus(refs, hyps, ScoreUnit.WORD).error_rate


def cer(refs: Mapping[str, str], hyps: Mapping[str, str]) -> float:
    """Corpus character error rate in percent (spaces not scored)."""
    return score_corpus(refs, hyps, ScoreUnit.CHAR).error_rate


def write_score_report(report: ScoreReport, path: Union[str, Path]) -> Path:
    """
    Write ``<path>`` as the per-utterance TSV and a markdown table beside it.

    Returns:
        Path of the TSV file
    """
    tsv_path = Path(path)
    tsv_path.parent.mkdir(parents=True, exist_ok=True)
    tsv_path.write_text(report.to_tsv(), encoding="utf-8")
    tsv_path.with_suffix(".md").write_text(report.to_markdown(), encoding="utf-8")
    logger.info(f"Wrote score report ({report.error_rate:.2f}% over {len(report.rows)} utterances) to {tsv_path}")
    return tsv_path
