"""Encoder-decoder recognizer with optional layer fusion and CTC head."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import nn

from lyrics_asr.corpus.vocabulary import BLANK_ID, EOS_ID, PAD_ID, SOS_ID
from lyrics_asr.exceptions import ConfigError, CTCLengthError, DataError, DecodingError, DimensionMismatchError
from lyrics_asr.features.fusion import FusionWeights, fuse_layers
from lyrics_asr.features.stack import FeatureStack
from lyrics_asr.models.attention import RelPositionMultiHeadedAttention
from lyrics_asr.models.config import (
    CTCLengthPolicy,
    DecoderConfig,
    DecoderKind,
    EncoderConfig,
    EncoderKind,
    LossSpec,
    ModelConfig,
)
from lyrics_asr.models.decoder import TransformerDecoder
from lyrics_asr.models.encoder import build_encoder
from lyrics_asr.models.loss import (
    IGNORE_ID,
    LabelSmoothingLoss,
    accuracy,
    add_sos_eos,
    ctc_loss,
    ctc_required_frames,
)
from lyrics_asr.models.mask import length_mask
from lyrics_asr.models.rnn import LSTMAttentionDecoder

logger = logging.getLogger(__name__)

# Output projections start small so the untrained model is close to uniform
OUTPUT_INIT_GAIN = 0.5


@dataclass
class Batch:
    """Padded features and token targets for a group of utterances."""

    ids: List[str]
    features: torch.Tensor
    feature_lengths: torch.Tensor
    targets: List[List[int]]

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_stacks(cls, ids: Sequence[str], stacks: Sequence[FeatureStack],
                    targets: Sequence[Sequence[int]]) -> "Batch":
        """Zero-pad (K, T, D) stacks to (B, K, T_max, D)."""
        if not stacks:
            raise DataError("Cannot build an empty batch")
        k, d = stacks[0].K, stacks[0].D
        t_max = max(stack.T for stack in stacks)
        features = torch.zeros(len(stacks), k, t_max, d)
        for i, stack in enumerate(stacks):
            if (stack.K, stack.D) != (k, d):
                raise DimensionMismatchError(f"Stack {ids[i]} has K={stack.K} D={stack.D}, expected K={k} D={d}")
            features[i, :, : stack.T] = stack.to_tensor()
        lengths = torch.tensor([stack.T for stack in stacks], dtype=torch.long)
        return cls(list(ids), features, lengths, [list(target) for target in targets])


@dataclass
class LossOutput:
    """Joint loss and its parts."""

    loss: torch.Tensor
    loss_att: Optional[float] = None
    loss_ctc: Optional[float] = None
    accuracy: Optional[float] = None
    skipped_ctc: List[str] = field(default_factory=list)


class RecognizerModel(nn.Module):
    """Feature fusion, encoder, attention decoder and optional CTC projection."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.fusion = FusionWeights(config.num_layers) if config.num_layers > 1 else None
        self.encoder = build_encoder(config.input_dim, config.encoder, config.memory_dim)
        if config.decoder.kind == DecoderKind.TRANSFORMER:
            self.decoder = TransformerDecoder(config.vocab_size, config.decoder)
        else:
            self.decoder = LSTMAttentionDecoder(config.vocab_size, config.decoder, config.memory_dim)
        self.ctc_lo = nn.Linear(config.memory_dim, config.vocab_size) if config.ctc else None
        self.reset_parameters()
        logger.debug(f"Built {config.encoder.kind.value}/{config.decoder.kind.value} model "
                     f"with {self.parameter_count()} parameters")

    def reset_parameters(self) -> None:
        """Seeded xavier initialization; fusion logits start at zero."""
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(self.config.seed)
            for module in self.modules():
                if isinstance(module, (nn.Linear, nn.Conv1d, nn.Conv2d)):
                    nn.init.xavier_uniform_(module.weight)
                    if module.bias is not None:
                        nn.init.zeros_(module.bias)
                elif isinstance(module, nn.Embedding):
                    nn.init.normal_(module.weight, mean=0.0, std=module.embedding_dim ** -0.5)
                elif isinstance(module, (nn.LSTM, nn.LSTMCell)):
                    for name, param in module.named_parameters():
                        if "weight" in name:
                            nn.init.xavier_uniform_(param)
                        else:
                            nn.init.zeros_(param)
                elif isinstance(module, RelPositionMultiHeadedAttention):
                    nn.init.xavier_uniform_(module.pos_bias_u)
                    nn.init.xavier_uniform_(module.pos_bias_v)
            for head in (self.decoder.output_layer, self.ctc_lo):
                if head is not None:
                    nn.init.xavier_uniform_(head.weight, gain=OUTPUT_INIT_GAIN)
            if self.fusion is not None:
                nn.init.zeros_(self.fusion.logits)

    # Properties shared with the decoding protocol

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    @property
    def sos_id(self) -> int:
        return SOS_ID

    @property
    def eos_id(self) -> int:
        return EOS_ID

    @property
    def blank_id(self) -> int:
        return BLANK_ID

    @property
    def non_emitting_ids(self) -> FrozenSet[int]:
        return frozenset({BLANK_ID, SOS_ID, PAD_ID})

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def parameter_count(self) -> int:
        return sum(param.numel() for param in self.parameters())

    # Encoding

    def fuse(self, features: torch.Tensor) -> torch.Tensor:
        """(B, K, T, D) stacks to (B, T, D) features."""
        if features.size(1) != self.config.num_layers:
            raise DimensionMismatchError(
                f"Features have K={features.size(1)} layers, model expects {self.config.num_layers}"
            )
        if self.fusion is None:
            return features[:, 0]
        return fuse_layers(features, self.fusion)

    def encode_batch(self, features: torch.Tensor, lengths: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            features: (B, K, T, D) padded stacks
            lengths: (B,) valid frames

        Returns:
            (B, H, model_dim) states and (B,) lengths with H = ceil(T / 4)
        """
        if features.size(-1) != self.config.input_dim:
            raise DimensionMismatchError(
                f"Feature dim {features.size(-1)} does not match model input_dim {self.config.input_dim}"
            )
        xs = self.fuse(features.to(self.dtype))
        return self.encoder(xs, lengths)

    def encode(self, features: Union[FeatureStack, np.ndarray, torch.Tensor],
               length: Optional[int] = None) -> torch.Tensor:
        """
        Encode one utterance.

        Args:
            features: FeatureStack, (T, D) matrix or (K, T, D) stack
            length: Valid frames (all frames when omitted)

        Returns:
            (H, model_dim) encoder states
        """
        if isinstance(features, FeatureStack):
            tensor = features.to_tensor()
        else:
            tensor = torch.as_tensor(features)
        if tensor.dim() == 2:
            tensor = tensor.unsqueeze(0)
        if tensor.dim() != 3 or tensor.size(1) < 1:
            raise DimensionMismatchError(f"Expected (T, D) or (K, T, D) features, got {tuple(tensor.shape)}")
        frames = tensor.size(1) if length is None else int(length)
        enc, _ = self.encode_batch(tensor[:, :frames].unsqueeze(0), torch.tensor([frames]))
        return enc[0]

    # Decoding

    def _check_prefix(self, prefix: Sequence[int]) -> None:
        if not prefix or prefix[0] != self.sos_id:
            raise DecodingError(f"Decoder prefix must start with sos ({self.sos_id}), got {list(prefix)[:3]}")
        if self.eos_id in prefix[1:]:
            raise DecodingError("Decoder prefix already contains eos")

    def decoder_step_cached(self, prefix: Sequence[int], enc_states: torch.Tensor,
                            cache: Any = None) -> Tuple[np.ndarray, Any]:
        """
        Next-token log-probabilities after ``prefix``.

        Args:
            prefix: Token ids starting with sos
            enc_states: (H, model_dim) states of one utterance
            cache: Cache returned for ``prefix[:-1]`` (None recomputes)

        Returns:
            (float64 log-probability vector over the vocabulary, cache for ``prefix``)
        """
        self._check_prefix(prefix)
        with torch.no_grad():
            tgt = torch.tensor([list(prefix)], dtype=torch.long)
            log_probs, new_cache = self.decoder.forward_one_step(tgt, enc_states.unsqueeze(0), None, cache)
        return log_probs[0].double().numpy(), new_cache

    def decoder_step(self, prefix: Sequence[int], enc_states: torch.Tensor) -> np.ndarray:
        """Uncached next-token log-probabilities."""
        log_probs, _ = self.decoder_step_cached(prefix, enc_states, None)
        return log_probs

    def ctc_log_probs(self, enc_states: torch.Tensor) -> np.ndarray:
        """(H, vocab) CTC log-posteriors of one utterance."""
        if self.ctc_lo is None:
            raise ConfigError("Model was built without a CTC head")
        with torch.no_grad():
            return torch.log_softmax(self.ctc_lo(enc_states), dim=-1).double().numpy()

    def cross_attention(self, tokens: Sequence[int], enc_states: torch.Tensor) -> np.ndarray:
        """
        Source-attention weights while teacher-forcing ``[sos] + tokens``.

        Returns:
            (layers, heads, steps, frames) array, steps = len(tokens) + 1
        """
        ys_in = torch.tensor([[self.sos_id] + list(tokens)], dtype=torch.long)
        memory = enc_states.unsqueeze(0)
        mask = torch.ones(1, 1, memory.size(1), dtype=torch.bool)
        with torch.no_grad():
            self.decoder(ys_in, torch.tensor([ys_in.size(1)]), memory, mask)
            weights = self.decoder.source_attention()
        return weights[:, 0].double().numpy()


def compute_loss(model: RecognizerModel, batch: Batch, spec: LossSpec) -> LossOutput:
    """
    Joint loss ``ctc_weight * L_ctc + (1 - ctc_weight) * L_att``.

    Args:
        model: Recognizer
        batch: Padded batch; every target must be nonempty
        spec: Loss weights and CTC length policy

    Returns:
        LossOutput with the differentiable total and float parts
    """
    for utt_id, target in zip(batch.ids, batch.targets):
        if not target:
            raise DataError(f"Utterance {utt_id} has an empty target")
    enc, enc_lengths = model.encode_batch(batch.features, batch.feature_lengths)
    memory_mask = length_mask(enc_lengths, enc.size(1)).unsqueeze(1)
    output = LossOutput(loss=enc.new_zeros(()))

    if spec.ctc_weight < 1.0:
        ys_in, ys_out, ys_lengths = add_sos_eos(batch.targets, model.sos_id, model.eos_id, PAD_ID)
        logits = model.decoder(ys_in, ys_lengths, enc, memory_mask)
        criterion = LabelSmoothingLoss(model.vocab_size, IGNORE_ID, spec.label_smoothing, spec.normalize_length)
        loss_att = criterion(logits, ys_out)
        output.loss = output.loss + (1.0 - spec.ctc_weight) * loss_att
        output.loss_att = float(loss_att)
        output.accuracy = accuracy(logits, ys_out)

    if spec.ctc_weight > 0.0:
        if model.ctc_lo is None:
            raise ConfigError("ctc_weight > 0 requires a model built with ctc=True")
        keep, skipped = [], []
        for i, (utt_id, target) in enumerate(zip(batch.ids, batch.targets)):
            if int(enc_lengths[i]) >= ctc_required_frames(target):
                keep.append(i)
            else:
                skipped.append(utt_id)
        if skipped and spec.ctc_length_policy == CTCLengthPolicy.ERROR:
            raise CTCLengthError(f"Encoder output too short for CTC targets of: {', '.join(skipped)}")
        if skipped:
            logger.warning(f"Skipping CTC for {len(skipped)} utterances with too few frames: {', '.join(skipped)}")
        output.skipped_ctc = skipped
        if keep:
            index = torch.tensor(keep, dtype=torch.long)
            log_probs = torch.log_softmax(model.ctc_lo(enc[index]), dim=-1)
            loss_ctc = ctc_loss(log_probs, enc_lengths[index], [batch.targets[i] for i in keep], model.blank_id)
            output.loss = output.loss + spec.ctc_weight * loss_ctc
            output.loss_ctc = float(loss_ctc)
    return output


def build_model(config: ModelConfig) -> RecognizerModel:
    return RecognizerModel(config)


def make_probe_bilstm(
    input_dim: int,
    vocab_size: int,
    encoder_layers: int = 4,
    hidden: int = 512,
    decoder_layers: int = 1,
    num_layers: int = 1,
    dropout: float = 0.1,
    ctc: bool = False,
    seed: int = 0,
) -> RecognizerModel:
    """
    Recurrent probe: bidirectional LSTM encoder and one-layer attention LSTM decoder.

    Args:
        input_dim: Feature dimension
        vocab_size: Output vocabulary size
        encoder_layers: Bidirectional LSTM layers (4 in the full preset)
        hidden: Hidden units per direction and decoder width (512 in the full preset)
        decoder_layers: Decoder LSTM layers
        num_layers: Feature-stack layers K
        dropout: Dropout probability
        ctc: Also build a CTC head
        seed: Initialization seed

    Returns:
        RecognizerModel
    """
    config = ModelConfig(
        input_dim=input_dim,
        num_layers=num_layers,
        vocab_size=vocab_size,
        encoder=EncoderConfig(kind=EncoderKind.BILSTM, num_blocks=encoder_layers, model_dim=hidden,
                              attention_heads=1, ff_units=hidden, dropout=dropout),
        decoder=DecoderConfig(kind=DecoderKind.LSTM, num_blocks=decoder_layers, model_dim=hidden,
                              attention_heads=1, ff_units=hidden, dropout=dropout),
        ctc=ctc,
        seed=seed,
    )
    return RecognizerModel(config)


def model_summary(model: RecognizerModel) -> Dict[str, Any]:
    """Block counts and sizes found by introspection."""
    encoder_blocks = getattr(model.encoder, "encoders", None)
    decoder_blocks = getattr(model.decoder, "decoders", None)
    return {
        "encoder": model.config.encoder.kind.value,
        "encoder_blocks": len(encoder_blocks) if encoder_blocks is not None else model.encoder.lstm.num_layers,
        "decoder": model.config.decoder.kind.value,
        "decoder_blocks": len(decoder_blocks) if decoder_blocks is not None else len(model.decoder.cells),
        "parameters": model.parameter_count(),
        "fusion_layers": model.config.num_layers,
    }
