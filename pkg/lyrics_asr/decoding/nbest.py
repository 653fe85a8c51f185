"""N-best result files: ``utt_id rank combined am lm text`` per line."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List

from lyrics_asr.exceptions import NBestFormatError

logger = logging.getLogger(__name__)

NBEST_FIELDS = ("utt_id", "rank", "combined", "am", "lm", "text")


@dataclass(frozen=True)
class NBestRecord:
    utt_id: str
    rank: int
    combined: float
    am: float
    lm: float
    text: str


def write_nbest(records: Iterable[NBestRecord], path: str) -> None:
    """Write records as UTF-8 tab-separated lines (floats in round-trip precision)."""
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            for value in (record.utt_id, record.text):
                if "\t" in value or "\n" in value:
                    raise NBestFormatError(f"Tab or newline inside N-best field of {record.utt_id}")
            f.write(f"{record.utt_id}\t{record.rank}\t{record.combined!r}\t{record.am!r}\t{record.lm!r}\t{record.text}\n")


def read_nbest(path: str) -> List[NBestRecord]:
    """
    Parse an N-best file; ranks of each utterance must run 1, 2, ... in order.

    Raises:
        NBestFormatError: Wrong field count, bad numbers, broken rank sequence
    """
    records: List[NBestRecord] = []
    last_rank: Dict[str, int] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().split("\n")
    except OSError as e:
        logger.error(f"Error reading N-best file {path}: {e}")
        raise NBestFormatError(f"Cannot read N-best file {path}: {e}") from e
    if lines and lines[-1] == "":
        lines.pop()
    for number, line in enumerate(lines, start=1):
        fields = line.split("\t")
        if len(fields) != len(NBEST_FIELDS):
            raise NBestFormatError(f"{path}:{number}: expected {len(NBEST_FIELDS)} fields, got {len(fields)}")
        try:
            record = NBestRecord(fields[0], int(fields[1]), float(fields[2]), float(fields[3]), float(fields[4]),
                                 fields[5])
        except ValueError as e:
            raise NBestFormatError(f"{path}:{number}: {e}") from e
        if record.rank != last_rank.get(record.utt_id, 0) + 1:
            raise NBestFormatError(f"{path}:{number}: rank {record.rank} out of sequence for {record.utt_id}")
        last_rank[record.utt_id] = record.rank
        records.append(record)
    return records


def best_texts(records: Iterable[NBestRecord]) -> Dict[str, str]:
    """Rank-1 text per utterance."""
    return {record.utt_id: record.text for record in records if record.rank == 1}
