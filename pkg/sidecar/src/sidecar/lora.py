"""Low-rank adapter injection and parameter accounting for seq2seq models.

Freezes the base model and wraps selected Linear modules with trainable
low-rank A/B factors. Adapter updates compose as
``W x + (alpha / rank) * B A x`` with B initialized to zero, so a freshly
injected adapter is an exact no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
from transformers import M2M100Config
from transformers.models.m2m_100.modeling_m2m_100 import M2M100ForConditionalGeneration

# Attention projections plus both feed-forward layers of every
# encoder/decoder block.
DEFAULT_TARGET_MODULES = ("q_proj", "k_proj", "v_proj", "out_proj", "fc1", "fc2")


@dataclass(frozen=True)
class LoRATrainingConfig:
    rank: int = 16
    scaling_alpha: float = 16.0
    dropout: float = 0.1
    target_modules: tuple[str, ...] = DEFAULT_TARGET_MODULES
    task: str = "seq2seq"
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    mixed_precision: bool = True
    epochs: int = 3
    per_device_batch: int = 4
    grad_accum_steps: int = 4

    def __post_init__(self) -> None:
        if self.rank <= 0 or self.scaling_alpha <= 0:
            raise ValueError("rank and scaling_alpha must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass(frozen=True)
class FullFTConfig:
    learning_rate: float = 5e-5
    epochs: int = 3
    per_device_batch: int = 4
    grad_accum_steps: int = 4
    optimizer: str = "adamw"
    mixed_precision: bool = True


class LoRALinear(nn.Module):
    """A frozen Linear plus a trainable low-rank residual."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        self.base = base
        for parameter in self.base.parameters():
            parameter.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        residual = self.dropout(x) @ self.lora_a.T @ self.lora_b.T
        return self.base(x) + residual * self.scaling


def apply_lora(model: nn.Module, config: LoRATrainingConfig) -> nn.Module:
    """Freeze the model and wrap every targeted Linear in place."""
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    targets = []
    for module in model.modules():
        for child_name, child in module.named_children():
            if child_name in config.target_modules and isinstance(child, nn.Linear):
                targets.append((module, child_name, child))
    if not targets:
        raise ValueError(f"no target modules {config.target_modules} found in model")
    for parent, child_name, child in targets:
        setattr(
            parent,
            child_name,
            LoRALinear(child, config.rank, config.scaling_alpha, config.dropout),
        )
    return model


def count_parameters(model: nn.Module) -> tuple[int, int]:
    """(trainable, total) parameter counts; tied weights counted once."""
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    total = sum(p.numel() for p in model.parameters())
    return trainable, total


def adapter_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    """Only the adapter factors; the base model is reconstructable."""
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }


def nllb_600m_architecture() -> M2M100Config:
    """Architecture of the distilled 600M multilingual translation base
    model: 256206 vocab, d_model 1024, 12+12 layers, 16 heads, ffn 4096."""
    return M2M100Config(
        vocab_size=256206,
        d_model=1024,
        encoder_layers=12,
        decoder_layers=12,
        encoder_attention_heads=16,
        decoder_attention_heads=16,
        encoder_ffn_dim=4096,
        decoder_ffn_dim=4096,
        max_position_embeddings=1024,
        scale_embedding=True,
    )


@dataclass(frozen=True)
class AdapterStats:
    trainable_params: int
    total_params: int

    @property
    def trainable_fraction(self) -> float:
        return self.trainable_params / self.total_params


def adapter_parameter_stats(
    config: LoRATrainingConfig | None = None,
    architecture: M2M100Config | None = None,
) -> AdapterStats:
    """Trainable/total counts for an adapter-injected model.

    Instantiated on the meta device: exact counts without allocating the
    600M-parameter weights.
    """
    config = config or LoRATrainingConfig()
    architecture = architecture or nllb_600m_architecture()
    with torch.device("meta"):
        model = M2M100ForConditionalGeneration(architecture)
        apply_lora(model, config)
    trainable, total = count_parameters(model)
    return AdapterStats(trainable_params=trainable, total_params=total)
