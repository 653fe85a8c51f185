"""Search hypotheses and beam configuration."""

from dataclasses import dataclass
from typing import Tuple

from pydantic import BaseModel, Field


class BeamConfig(BaseModel):
    """Beam-search settings."""

    beam_size: int = Field(10, ge=1, description="Hypotheses kept per step")
    lm_weight: float = Field(0.3, ge=0.0, le=1.0, description="Shallow-fusion LM weight")
    length_bonus: float = Field(0.0, allow_inf_nan=False, description="Score added per emitted token (eos included)")
    max_len_ratio: float = Field(1.0, gt=0.0, le=1.0, description="Decoder steps as a fraction of encoder frames")
    ctc_weight: float = Field(0.0, ge=0.0, le=1.0, description="Weight of the CTC prefix score in the AM score")
    nbest: int = Field(0, ge=0, description="Hypotheses returned (0 = beam_size)")


@dataclass(frozen=True)
class Hypothesis:
    """
    A scored token sequence.

    ``tokens`` excludes sos and, once finished, ends in eos.
    ``combined = am_logp + lm_weight * lm_logp + length_bonus * len(tokens)``.
    """

    tokens: Tuple[int, ...]
    am_logp: float
    lm_logp: float
    combined: float
    finished: bool

    @staticmethod
    def combine(am_logp: float, lm_logp: float, length: int, lm_weight: float, length_bonus: float) -> float:
        lm_term = lm_weight * lm_logp if lm_weight else 0.0
        return am_logp + lm_term + length_bonus * length

    def recompute(self, lm_weight: float, length_bonus: float) -> float:
        """Combined score rebuilt from its parts."""
        return self.combine(self.am_logp, self.lm_logp, len(self.tokens), lm_weight, length_bonus)

    def text_tokens(self, eos_id: int) -> Tuple[int, ...]:
        """Tokens without the final eos."""
        if self.tokens and self.tokens[-1] == eos_id:
            return self.tokens[:-1]
        return self.tokens

    def sort_key(self) -> Tuple[float, Tuple[int, ...]]:
        return (-self.combined, self.tokens)
