"""CTC prefix probabilities for joint attention/CTC decoding."""

import logging
from typing import Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

LOG_ZERO = -1e10


class CTCPrefixScorer:
    """
    Log-probability that a CTC path over ``log_probs`` starts with a prefix.

    States are (H, 2) arrays of forward variables for paths ending in a
    non-blank (column 0) or a blank (column 1). For eos the score is the
    probability of the complete sequence.
    """

    def __init__(self, log_probs: np.ndarray, blank: int, eos: int):
        self.x = np.asarray(log_probs, dtype=np.float64)
        self.blank = blank
        self.eos = eos
        self.input_length = self.x.shape[0]

    def initial_state(self) -> np.ndarray:
        r = np.full((self.input_length, 2), LOG_ZERO)
        r[0, 1] = self.x[0, self.blank]
        for t in range(1, self.input_length):
            r[t, 1] = r[t - 1, 1] + self.x[t, self.blank]
        return r

    def __call__(self, prefix: Sequence[int], candidates: Sequence[int],
                 state: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Extend ``prefix`` (starting with sos) by each candidate token.

        Args:
            prefix: Current prefix including sos
            candidates: Token ids to score
            state: State of ``prefix``

        Returns:
            (prefix scores per candidate, (len(candidates), H, 2) states)
        """
        cs = np.asarray(candidates, dtype=np.int64)
        output_length = len(prefix) - 1
        r = np.full((self.input_length, 2, len(cs)), LOG_ZERO)
        xs = self.x[:, cs]
        if output_length == 0:
            r[0, 0] = xs[0]
        r_sum = np.logaddexp(state[:, 0], state[:, 1])
        last = prefix[-1]
        log_phi = np.repeat(r_sum[:, None], len(cs), axis=1)
        if output_length > 0:
            # A repeated label needs a blank in between
            for i, token in enumerate(cs):
                if token == last:
                    log_phi[:, i] = state[:, 1]
        start = max(output_length, 1)
        if start > self.input_length:
            log_psi = np.full(len(cs), LOG_ZERO)
            log_psi[cs == self.eos] = r_sum[-1]
            return log_psi, np.moveaxis(r, 2, 0)
        log_psi = r[start - 1, 0].copy()
        for t in range(start, self.input_length):
            r[t, 0] = np.logaddexp(r[t - 1, 0], log_phi[t - 1]) + xs[t]
            r[t, 1] = np.logaddexp(r[t - 1, 0], r[t - 1, 1]) + self.x[t, self.blank]
            log_psi = np.logaddexp(log_psi, log_phi[t - 1] + xs[t])
        log_psi[cs == self.eos] = r_sum[-1]
        return log_psi, np.moveaxis(r, 2, 0)
