"""Training examples and frame-budget batching."""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from lyrics_asr.corpus.manifest import Manifest
from lyrics_asr.corpus.vocabulary import Vocabulary
from lyrics_asr.exceptions import DataError
from lyrics_asr.features.stack import FeatureStack
from lyrics_asr.models.recognizer import Batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Example:
    utt_id: str
    stack: FeatureStack
    tokens: List[int]


@dataclass
class TrainingData:
    """Train and dev examples; both must be nonempty."""

    train: List[Example]
    dev: List[Example]

    def __post_init__(self):
        if not self.train or not self.dev:
            raise DataError(f"Training needs nonempty train and dev splits "
                            f"(got {len(self.train)} train, {len(self.dev)} dev)")


def make_examples(manifest: Manifest, split: str, vocab: Vocabulary,
                  features: Callable[[str], FeatureStack]) -> List[Example]:
    """Tokenized examples for one split, skipping empty transcripts."""
    examples = []
    for entry in manifest.split(split):
        tokens = vocab.tokenize(entry.transcript)
        if not tokens:
            logger.warning(f"Skipping {entry.id}: empty transcript")
            continue
        examples.append(Example(entry.id, features(entry.id), tokens))
    return examples


def make_batches(examples: Sequence[Example], batch_frames: int, seed: Optional[int] = None) -> List[Batch]:
    """
    Group examples so that ``batch size * longest T`` stays within ``batch_frames``.

    Examples are sorted by length (longest first, ties by id); a single
    example longer than the budget forms its own batch. With a seed, the
    batch order is shuffled deterministically.
    """
    ordered = sorted(examples, key=lambda ex: (-ex.stack.T, ex.utt_id))
    groups: List[List[Example]] = []
    current: List[Example] = []
    for example in ordered:
        longest = current[0].stack.T if current else example.stack.T
        if current and longest * (len(current) + 1) > batch_frames:
            groups.append(current)
            current = []
        current.append(example)
    if current:
        groups.append(current)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(groups))
        groups = [groups[i] for i in order]
    return [
        Batch.from_stacks([ex.utt_id for ex in group], [ex.stack for ex in group], [ex.tokens for ex in group])
        for group in groups
    ]
