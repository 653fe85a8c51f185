"""ARPA text format for back-off n-gram models."""

import logging
import math
import re
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lyrics_asr.corpus.vocabulary import EOS_ID, SOS_ID
from lyrics_asr.exceptions import LMFormatError
from lyrics_asr.lm.ngram import Context, NGramLM

logger = logging.getLogger(__name__)

# log10 probabilities at or below this value stand for zero
LOG10_ZERO = -99.0
LN10 = math.log(10.0)

_COUNT_LINE = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION_LINE = re.compile(r"^\\(\d+)-grams:$")


def _log10(value: float) -> float:
    return math.log10(value) if value > 0 else LOG10_ZERO


def write_arpa(lm: NGramLM, path: str, symbols: Sequence[str]) -> None:
    """
    Write every seen n-gram with its interpolated log10 probability.

    Orders below the highest also carry the back-off weight
    ``d * N1+(h) / c(h)`` of the n-gram used as a context (0.0 when the
    n-gram never occurs as a context).

    Args:
        lm: Trained model
        path: Output file
        symbols: Token string for every id (no whitespace)
    """
    if len(symbols) != lm.vocab_size:
        raise LMFormatError(f"{len(symbols)} symbols given for a vocabulary of {lm.vocab_size}")
    for symbol in symbols:
        if not symbol or any(char.isspace() for char in symbol):
            raise LMFormatError(f"ARPA symbols must be nonempty without whitespace: {symbol!r}")

    sections: List[List[Tuple[Context, float]]] = []
    unigrams = [((int(token),), _log10(lm.prob(int(token), ()))) for token in lm.predictable]
    if lm.sos_id in lm.non_predictable:
        unigrams.append(((lm.sos_id,), LOG10_ZERO))
    sections.append(sorted(unigrams))
    for length in range(2, lm.order + 1):
        entries = []
        for gram in lm.seen_ngrams(length):
            entries.append((gram, _log10(float(lm.distribution(gram[:-1])[gram[-1]]))))
        sections.append(sorted(entries))

    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for length, entries in enumerate(sections, start=1):
            f.write(f"ngram {length}={len(entries)}\n")
        f.write("\n")
        for length, entries in enumerate(sections, start=1):
            f.write(f"\\{length}-grams:\n")
            for gram, log_prob in entries:
                words = " ".join(symbols[token] for token in gram)
                if length < lm.order:
                    has_context = bool(lm.counts[length].get(gram))
                    bow = _log10(lm.backoff_mass(gram)) if has_context else 0.0
                    f.write(f"{log_prob:.8f}\t{words}\t{bow:.8f}\n")
                else:
                    f.write(f"{log_prob:.8f}\t{words}\n")
            f.write("\n")
        f.write("\\end\\\n")
    logger.info(f"Wrote {lm.order}-gram ARPA model to {path}")


class BackoffNGramLM:
    """
    Back-off model read from ARPA::

        P(w | h) = p(h w)               if h w is listed
                 = bow(h) * P(w | h')   otherwise (bow = 1 for unlisted h)
    """

    def __init__(self, order: int, vocab_size: int, entries: Dict[Context, Tuple[float, float]],
                 sos_id: int = SOS_ID, eos_id: int = EOS_ID):
        self.order = order
        self.vocab_size = vocab_size
        self.sos_id = sos_id
        self.eos_id = eos_id
        self._entries = entries
        self._children: Dict[Context, Dict[int, float]] = {}
        for gram, (log_prob, _) in entries.items():
            self._children.setdefault(gram[:-1], {})[gram[-1]] = log_prob
        self._distribution = lru_cache(maxsize=65536)(self._compute_distribution)

    def _bow(self, context: Context) -> float:
        entry = self._entries.get(context)
        return entry[1] if entry is not None else 0.0

    def _compute_distribution(self, context: Context) -> np.ndarray:
        log10_probs = np.full(self.vocab_size, -np.inf)
        for k in range(len(context) + 1):
            history = context[len(context) - k:] if k else ()
            if k:
                log10_probs = log10_probs + self._bow(history)
            for token, log_prob in self._children.get(history, {}).items():
                log10_probs[token] = -np.inf if log_prob <= LOG10_ZERO else log_prob
        return log10_probs * LN10

    def next_log_probs(self, prefix: Sequence[int]) -> np.ndarray:
        context = tuple(prefix[-(self.order - 1):]) if self.order > 1 else ()
        return self._distribution(context).copy()

    def __repr__(self) -> str:
        return f"BackoffNGramLM(order={self.order}, vocab_size={self.vocab_size}, entries={len(self._entries)})"


def read_arpa(path: str, symbols: Sequence[str], sos_id: int = SOS_ID, eos_id: int = EOS_ID) -> BackoffNGramLM:
    """
    Parse an ARPA file over a known symbol table.

    Raises:
        LMFormatError: Missing sections, count mismatches, unknown symbols
    """
    ids = {symbol: index for index, symbol in enumerate(symbols)}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [line.strip() for line in f]
    except OSError as e:
        logger.error(f"Error reading ARPA file {path}: {e}")
        raise LMFormatError(f"Cannot read ARPA file {path}: {e}") from e

    declared: Dict[int, int] = {}
    entries: Dict[Context, Tuple[float, float]] = {}
    found: Dict[int, int] = {}
    section: Optional[int] = None
    in_data = False
    ended = False
    for number, line in enumerate(lines, start=1):
        if not line:
            continue
        if line == "\\data\\":
            in_data = True
            continue
        if line == "\\end\\":
            ended = True
            break
        match = _SECTION_LINE.match(line)
        if match:
            section = int(match.group(1))
            in_data = False
            found[section] = 0
            continue
        if in_data:
            count = _COUNT_LINE.match(line)
            if not count:
                raise LMFormatError(f"{path}:{number}: bad count line {line!r}")
            declared[int(count.group(1))] = int(count.group(2))
            continue
        if section is None:
            raise LMFormatError(f"{path}:{number}: n-gram line outside a section")
        fields = line.split()
        if len(fields) not in (section + 1, section + 2):
            raise LMFormatError(f"{path}:{number}: expected {section} words in {line!r}")
        try:
            log_prob = float(fields[0])
            bow = float(fields[section + 1]) if len(fields) == section + 2 else 0.0
        except ValueError as e:
            raise LMFormatError(f"{path}:{number}: {e}") from e
        words = fields[1: section + 1]
        unknown = [word for word in words if word not in ids]
        if unknown:
            raise LMFormatError(f"{path}:{number}: unknown symbols {unknown}")
        entries[tuple(ids[word] for word in words)] = (log_prob, bow)
        found[section] += 1

    if not declared:
        raise LMFormatError(f"{path}: missing \\data\\ header")
    if not ended:
        raise LMFormatError(f"{path}: missing \\end\\ marker")
    for length, count in declared.items():
        if found.get(length) != count:
            raise LMFormatError(f"{path}: {length}-grams declared {count}, found {found.get(length, 0)}")
    order = max(declared)
    logger.info(f"Read {order}-gram ARPA model with {len(entries)} entries from {path}")
    return BackoffNGramLM(order, len(symbols), entries, sos_id, eos_id)
