"""Beam-search decoding with shallow fusion and CTC prefix scoring."""

from lyrics_asr.decoding.beam_search import beam_search, greedy_decode, max_decode_length, rescore
from lyrics_asr.decoding.ctc_prefix_score import CTCPrefixScorer
from lyrics_asr.decoding.hypothesis import BeamConfig, Hypothesis
from lyrics_asr.decoding.nbest import NBestRecord, best_texts, read_nbest, write_nbest
from lyrics_asr.decoding.recognize import DecodeResult, decode_corpus, decode_utterance

__all__ = [
    "BeamConfig",
    "CTCPrefixScorer",
    "DecodeResult",
    "Hypothesis",
    "NBestRecord",
    "beam_search",
    "best_texts",
    "decode_corpus",
    "decode_utterance",
    "greedy_decode",
    "max_decode_length",
    "read_nbest",
    "rescore",
    "write_nbest",
]
