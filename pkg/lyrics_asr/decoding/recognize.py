"""Corpus-level decoding with a thread pool."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from lyrics_asr.corpus.vocabulary import Vocabulary
from lyrics_asr.decoding.beam_search import beam_search, greedy_decode, max_decode_length
from lyrics_asr.decoding.hypothesis import BeamConfig, Hypothesis
from lyrics_asr.decoding.nbest import NBestRecord
from lyrics_asr.features.stack import FeatureStack
from lyrics_asr.lm.base import LanguageModel
from lyrics_asr.models.recognizer import RecognizerModel

logger = logging.getLogger(__name__)


@dataclass
class DecodeResult:
    utt_id: str
    tokens: List[int]
    text: str
    hypotheses: List[Hypothesis] = field(default_factory=list)

    def nbest_records(self, vocab: Vocabulary) -> List[NBestRecord]:
        return [
            NBestRecord(self.utt_id, rank, hyp.combined, hyp.am_logp, hyp.lm_logp,
                        vocab.detokenize(hyp.text_tokens(vocab.eos_id)))
            for rank, hyp in enumerate(self.hypotheses, start=1)
        ]


def decode_utterance(
    model: RecognizerModel,
    vocab: Vocabulary,
    stack: FeatureStack,
    utt_id: str,
    cfg: BeamConfig,
    lm: Optional[LanguageModel] = None,
    greedy: bool = False,
) -> DecodeResult:
    """Encode one utterance and search it."""
    enc_states = model.encode(stack)
    if greedy:
        tokens = greedy_decode(model, enc_states, max_decode_length(enc_states, cfg))
        return DecodeResult(utt_id, tokens, vocab.detokenize(tokens))
    hypotheses = beam_search(model, enc_states, cfg, lm)
    tokens = list(hypotheses[0].text_tokens(model.eos_id)) if hypotheses else []
    return DecodeResult(utt_id, tokens, vocab.detokenize(tokens), hypotheses)


def decode_corpus(
    model: RecognizerModel,
    vocab: Vocabulary,
    features: Callable[[str], FeatureStack],
    utt_ids: Sequence[str],
    cfg: BeamConfig,
    lm: Optional[LanguageModel] = None,
    num_workers: int = 1,
    greedy: bool = False,
) -> List[DecodeResult]:
    """
    Decode utterances independently; results come back sorted by utterance id.

    Args:
        model: Recognizer (switched to eval mode)
        vocab: Output vocabulary
        features: Feature lookup by utterance id
        utt_ids: Utterances to decode
        cfg: Beam settings
        lm: Optional language model for shallow fusion
        num_workers: Decoding threads
        greedy: Use argmax decoding instead of beam search

    Returns:
        One DecodeResult per utterance
    """
    model.eval()
    start = time.time()

    def run(utt_id: str) -> DecodeResult:
        return decode_utterance(model, vocab, features(utt_id), utt_id, cfg, lm, greedy)

    ordered = sorted(utt_ids)
    if num_workers > 1:
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            results = list(pool.map(run, ordered))
    else:
        results = [run(utt_id) for utt_id in ordered]
    mode = "greedy" if greedy else f"beam {cfg.beam_size}"
    logger.info(f"Decoded {len(results)} utterances ({mode}) in {time.time() - start:.1f}s")
    return results
