"""Model and loss configuration."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator


class EncoderKind(str, Enum):
    """Encoder architectures."""
    TRANSFORMER = "transformer"
    CONFORMER = "conformer"
    BILSTM = "bilstm"


class DecoderKind(str, Enum):
    """Decoder architectures."""
    TRANSFORMER = "transformer"
    LSTM = "lstm"


class CTCLengthPolicy(str, Enum):
    """What to do when encoder output is too short for a CTC target."""
    SKIP = "skip"
    ERROR = "error"


class EncoderConfig(BaseModel):
    """Encoder hyperparameters."""

    kind: EncoderKind = Field(EncoderKind.TRANSFORMER, description="transformer, conformer or bilstm")
    num_blocks: int = Field(12, ge=1, description="Encoder blocks (recurrent layers for bilstm)")
    attention_heads: int = Field(4, ge=1, description="Self-attention heads")
    model_dim: int = Field(256, ge=1, description="Model width (hidden units per direction for bilstm)")
    ff_units: int = Field(2048, ge=1, description="Feed-forward inner units")
    dropout: float = Field(0.1, ge=0.0, lt=1.0, description="Dropout probability")
    conv_kernel: int = Field(15, ge=1, description="Depthwise kernel of the conformer convolution module")
    subsampling_channels: int = Field(0, ge=0, description="Subsampling conv channels (0 = model_dim)")

    @model_validator(mode="after")
    def _check(self) -> "EncoderConfig":
        if self.kind != EncoderKind.BILSTM and self.model_dim % self.attention_heads:
            raise ValueError(f"model_dim {self.model_dim} is not divisible by {self.attention_heads} heads")
        if self.conv_kernel % 2 == 0:
            raise ValueError(f"conv_kernel must be odd, got {self.conv_kernel}")
        return self


class DecoderConfig(BaseModel):
    """Decoder hyperparameters."""

    kind: DecoderKind = Field(DecoderKind.TRANSFORMER, description="transformer or lstm")
    num_blocks: int = Field(6, ge=1, description="Decoder blocks (recurrent layers for lstm)")
    attention_heads: int = Field(4, ge=1, description="Self/source attention heads")
    model_dim: int = Field(256, ge=1, description="Model width")
    ff_units: int = Field(2048, ge=1, description="Feed-forward inner units")
    dropout: float = Field(0.1, ge=0.0, lt=1.0, description="Dropout probability")

    @model_validator(mode="after")
    def _check(self) -> "DecoderConfig":
        if self.kind == DecoderKind.TRANSFORMER and self.model_dim % self.attention_heads:
            raise ValueError(f"model_dim {self.model_dim} is not divisible by {self.attention_heads} heads")
        return self


class ModelConfig(BaseModel):
    """Full recognizer configuration; parameter count is a pure function of it."""

    input_dim: int = Field(80, ge=1, description="Feature dimension D")
    num_layers: int = Field(1, ge=1, description="Feature-stack layers K (fusion weights when K > 1)")
    vocab_size: int = Field(..., ge=6, description="Output vocabulary size including reserved tokens")
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    ctc: bool = Field(True, description="Build the CTC projection head")
    seed: int = Field(0, description="Parameter initialization seed")

    @model_validator(mode="after")
    def _check(self) -> "ModelConfig":
        if self.encoder.model_dim != self.decoder.model_dim and self.encoder.kind != EncoderKind.BILSTM:
            raise ValueError(
                f"encoder model_dim {self.encoder.model_dim} != decoder model_dim {self.decoder.model_dim}"
            )
        return self

    @property
    def memory_dim(self) -> int:
        """Width of the encoder states the decoder attends to."""
        return self.decoder.model_dim


class LossSpec(BaseModel):
    """Joint CTC / attention objective."""

    ctc_weight: float = Field(0.3, ge=0.0, le=1.0, description="Weight of the CTC term")
    label_smoothing: float = Field(0.1, ge=0.0, lt=1.0, description="Label smoothing epsilon")
    normalize_length: bool = Field(False, description="Divide the attention loss by tokens instead of utterances")
    ctc_length_policy: CTCLengthPolicy = Field(CTCLengthPolicy.SKIP, description="skip or error")
