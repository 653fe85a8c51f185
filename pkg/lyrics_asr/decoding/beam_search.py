"""Beam search over the attention decoder with shallow LM fusion and CTC prefix scores."""

import logging
import math
from dataclasses import dataclass
from typing import Any, FrozenSet, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from lyrics_asr.decoding.ctc_prefix_score import CTCPrefixScorer
from lyrics_asr.decoding.hypothesis import BeamConfig, Hypothesis
from lyrics_asr.exceptions import ConfigError
from lyrics_asr.lm.base import LanguageModel, lm_score

logger = logging.getLogger(__name__)


class StepDecoder(Protocol):
    """What the search needs from an acoustic model."""

    vocab_size: int
    sos_id: int
    eos_id: int
    non_emitting_ids: FrozenSet[int]

    def decoder_step_cached(self, prefix: Sequence[int], enc_states: Any,
                            cache: Any = None) -> Tuple[np.ndarray, Any]:
        ...


@dataclass
class _Beam:
    prefix: Tuple[int, ...]
    am_logp: float
    lm_logp: float
    combined: float
    cache: Any = None
    ctc_state: Optional[np.ndarray] = None
    ctc_score: float = 0.0


def max_decode_length(enc_states: Any, cfg: BeamConfig) -> int:
    """``max(1, floor(max_len_ratio * H))``."""
    return max(1, int(math.floor(cfg.max_len_ratio * len(enc_states))))


def _check_lm(model: StepDecoder, cfg: BeamConfig, lm: Optional[LanguageModel]) -> Optional[LanguageModel]:
    if lm is None:
        if cfg.lm_weight > 0:
            raise ConfigError(f"lm_weight={cfg.lm_weight} requires a language model")
        return None
    if lm.vocab_size != model.vocab_size:
        raise ConfigError(f"LM vocabulary size {lm.vocab_size} != model vocabulary size {model.vocab_size}")
    if (lm.sos_id, lm.eos_id) != (model.sos_id, model.eos_id):
        raise ConfigError("LM and model disagree on sos/eos ids")
    if cfg.lm_weight == 0:
        logger.warning("A language model is attached with lm_weight=0; it will be ignored")
        return None
    return lm


def _ctc_scorer(model: Any, enc_states: Any, cfg: BeamConfig) -> Optional[CTCPrefixScorer]:
    if cfg.ctc_weight == 0:
        return None
    if not hasattr(model, "ctc_log_probs"):
        raise ConfigError("ctc_weight > 0 requires a model with a CTC head")
    return CTCPrefixScorer(model.ctc_log_probs(enc_states), model.blank_id, model.eos_id)


def beam_search(
    model: StepDecoder,
    enc_states: Any,
    cfg: BeamConfig,
    lm: Optional[LanguageModel] = None,
    max_len: Optional[int] = None,
) -> List[Hypothesis]:
    """
    N-best list of finished hypotheses sorted by combined score.

    Every step extends every running hypothesis by each emitting token; the
    best ``beam_size`` candidates survive and those ending in eos leave the
    beam. At the last step only eos may be emitted. Ties go to the lower
    token sequence, then the shorter one.

    Args:
        model: Acoustic model exposing ``decoder_step_cached``
        enc_states: Encoder states of one utterance
        cfg: Beam settings
        lm: Language model; required iff ``cfg.lm_weight > 0``
        max_len: Decoder steps (default ``max_decode_length``)

    Returns:
        At most ``nbest`` (or ``beam_size``) hypotheses
    """
    lm = _check_lm(model, cfg, lm)
    steps = max_decode_length(enc_states, cfg) if max_len is None else max_len
    if steps < 1:
        raise ConfigError(f"max_len must be at least 1, got {steps}")
    scorer = _ctc_scorer(model, enc_states, cfg)
    lm_weight = cfg.lm_weight if lm is not None else 0.0
    emitting = [token for token in range(model.vocab_size) if token not in model.non_emitting_ids]

    running = [_Beam(prefix=(model.sos_id,), am_logp=0.0, lm_logp=0.0, combined=0.0,
                     ctc_state=scorer.initial_state() if scorer is not None else None)]
    finished: List[Hypothesis] = []
    for step in range(steps):
        allowed = [model.eos_id] if step == steps - 1 else emitting
        candidates: List[_Beam] = []
        for beam in running:
            att_logp, cache = model.decoder_step_cached(beam.prefix, enc_states, beam.cache)
            lm_logp = lm.next_log_probs(beam.prefix) if lm is not None else None
            if scorer is not None:
                ctc_scores, ctc_states = scorer(beam.prefix, allowed, beam.ctc_state)
            for index, token in enumerate(allowed):
                am_inc = float(att_logp[token])
                ctc_state, ctc_score = None, 0.0
                if scorer is not None:
                    ctc_score = float(ctc_scores[index])
                    ctc_state = ctc_states[index]
                    am_inc = (1.0 - cfg.ctc_weight) * am_inc + cfg.ctc_weight * (ctc_score - beam.ctc_score)
                lm_inc = float(lm_logp[token]) if lm_logp is not None else 0.0
                if not (math.isfinite(am_inc) and math.isfinite(lm_inc)):
                    continue
                prefix = beam.prefix + (token,)
                am, lm_total = beam.am_logp + am_inc, beam.lm_logp + lm_inc
                combined = Hypothesis.combine(am, lm_total, len(prefix) - 1, lm_weight, cfg.length_bonus)
                candidates.append(_Beam(prefix, am, lm_total, combined, cache, ctc_state, ctc_score))
        candidates.sort(key=lambda c: (-c.combined, c.prefix))
        running = []
        for candidate in candidates[: cfg.beam_size]:
            if candidate.prefix[-1] == model.eos_id:
                finished.append(Hypothesis(candidate.prefix[1:], candidate.am_logp, candidate.lm_logp,
                                           candidate.combined, True))
            else:
                running.append(candidate)
        logger.debug(f"Step {step}: {len(running)} running, {len(finished)} finished")
        if not running:
            break
    finished.sort(key=Hypothesis.sort_key)
    return finished[: cfg.nbest or cfg.beam_size]


def greedy_decode(model: StepDecoder, enc_states: Any, max_len: int) -> List[int]:
    """
    Argmax decoding (lowest id on ties) until eos or ``max_len`` steps.

    Returns:
        Tokens without eos; empty for ``max_len == 0``
    """
    emitting = np.array([token for token in range(model.vocab_size) if token not in model.non_emitting_ids])
    prefix = [model.sos_id]
    cache = None
    for step in range(max_len):
        if step == max_len - 1:
            break
        log_probs, cache = model.decoder_step_cached(prefix, enc_states, cache)
        token = int(emitting[int(np.argmax(log_probs[emitting]))])
        if token == model.eos_id:
            break
        prefix.append(token)
    return prefix[1:]


def rescore(
    model: StepDecoder,
    enc_states: Any,
    tokens: Sequence[int],
    cfg: BeamConfig,
    lm: Optional[LanguageModel] = None,
) -> Hypothesis:
    """Score a finished token sequence independently of any search."""
    tokens = tuple(tokens)
    prefix = [model.sos_id]
    att_total = 0.0
    for token in tokens:
        log_probs, _ = model.decoder_step_cached(prefix, enc_states, None)
        att_total += float(log_probs[token])
        prefix.append(token)
    am = att_total
    scorer = _ctc_scorer(model, enc_states, cfg)
    if scorer is not None:
        state, score = scorer.initial_state(), 0.0
        prefix = [model.sos_id]
        for token in tokens:
            scores, states = scorer(prefix, [token], state)
            score, state = float(scores[0]), states[0]
            prefix.append(token)
        am = (1.0 - cfg.ctc_weight) * att_total + cfg.ctc_weight * score
    use_lm = lm is not None and cfg.lm_weight > 0
    lm_total = lm_score(lm, tokens) if use_lm else 0.0
    combined = Hypothesis.combine(am, lm_total, len(tokens), cfg.lm_weight if use_lm else 0.0, cfg.length_bonus)
    return Hypothesis(tokens, am, lm_total, combined, bool(tokens) and tokens[-1] == model.eos_id)
