"""Architecture hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError

ARCHS = ("bilstm", "tcn", "transformer")


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    num_classes: int
    input_dim: int = 532
    dropout: float = 0.3
    # BiLSTM: hidden size per direction
    bilstm_layers: int = 3
    bilstm_hidden: int = 128
    # TCN: block b uses dilation 2**b; symmetric padding keeps T fixed
    tcn_blocks: int = 5
    tcn_kernel: int = 3
    tcn_channels: int = 256
    # Transformer encoder
    tr_d_model: int = 256
    tr_heads: int = 4
    tr_layers: int = 3
    tr_ffn: int = 512

    def validate(self) -> "ModelConfig":
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}, expected one of {ARCHS}")
        positive = {
            "num_classes": self.num_classes, "input_dim": self.input_dim,
            "bilstm_layers": self.bilstm_layers, "bilstm_hidden": self.bilstm_hidden,
            "tcn_blocks": self.tcn_blocks, "tcn_kernel": self.tcn_kernel,
            "tcn_channels": self.tcn_channels, "tr_d_model": self.tr_d_model,
            "tr_heads": self.tr_heads, "tr_layers": self.tr_layers,
            "tr_ffn": self.tr_ffn,
        }
        for key, val in positive.items():
            if val < 1:
                raise ConfigError(f"{key} must be positive, got {val}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.tr_d_model % self.tr_heads != 0:
            raise ConfigError(
                f"heads ({self.tr_heads}) must divide d_model ({self.tr_d_model})")
        if self.tcn_kernel % 2 == 0:
            raise ConfigError("tcn_kernel must be odd for symmetric padding")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d).validate()
