"""Per-domain fine-tuning of seq2seq translation models.

``train_domain`` runs either full fine-tuning or low-rank adapter
training over a labeled split file (the pipeline's line-delimited
``{"source": ..., "target": ...}`` records). Desk-scale runs use a
whitespace word tokenizer and a small randomly initialized model of the
same architecture family as the production base; production runs point
``architecture``/``init_from`` at the real checkpoint dimensions and
weights and should tokenize with the base checkpoint's tokenizer.

The general-domain run is meant to go first: pass its saved weights as
``init_from`` when fine-tuning the specific domains.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import torch
from transformers import M2M100Config
from transformers.models.m2m_100.modeling_m2m_100 import M2M100ForConditionalGeneration

from .lora import (
    FullFTConfig,
    LoRATrainingConfig,
    adapter_state_dict,
    apply_lora,
    count_parameters,
)

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS = 0, 1, 2, 3


@dataclass(frozen=True)
class ModelManifest:
    base_model_id: str
    domain: str
    kind: str  # "full" | "adapter"
    trainable_params: int
    total_params: int
    data_split_id: str

    def to_dict(self) -> dict:
        return asdict(self)


class WordTokenizer:
    """Whitespace word-level tokenizer with fixed special ids."""

    def __init__(self, texts: Sequence[str]):
        vocab: dict[str, int] = {}
        for text in texts:
            for token in text.split():
                if token not in vocab:
                    vocab[token] = 4 + len(vocab)
        self._vocab = vocab

    def __len__(self) -> int:
        return 4 + len(self._vocab)

    def encode(self, text: str, max_len: int) -> list[int]:
        ids = [self._vocab.get(t, UNK) for t in text.split()][: max_len - 1]
        return ids + [EOS]


def load_split(path: str | Path) -> list[tuple[str, str]]:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        pairs.append((record["source"], record["target"]))
    return pairs


def split_id(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


def tiny_architecture(vocab_size: int, d_model: int = 64, layers: int = 2) -> M2M100Config:
    """A desk-scale model of the production architecture family."""
    return M2M100Config(
        vocab_size=vocab_size,
        d_model=d_model,
        encoder_layers=layers,
        decoder_layers=layers,
        encoder_attention_heads=4,
        decoder_attention_heads=4,
        encoder_ffn_dim=d_model * 4,
        decoder_ffn_dim=d_model * 4,
        max_position_embeddings=64,
        pad_token_id=PAD,
        bos_token_id=BOS,
        eos_token_id=EOS,
        decoder_start_token_id=BOS,
        scale_embedding=True,
    )


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _pad_batch(rows: list[list[int]], pad_value: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor([r + [pad_value] * (width - len(r)) for r in rows], dtype=torch.long)


def train_domain(
    split_path: str | Path,
    domain: str,
    config: LoRATrainingConfig | FullFTConfig,
    *,
    architecture: M2M100Config | None = None,
    base_model_id: str = "tiny-random-m2m100",
    init_from: str | Path | None = None,
    out_dir: str | Path | None = None,
    max_len: int = 32,
    limit: int | None = None,
    seed: int = 0,
    epochs: int | None = None,
) -> tuple[ModelManifest, list[float]]:
    """Fine-tune one domain model and return its manifest plus the
    per-optimizer-step loss log."""
    pairs = load_split(split_path)
    if limit is not None:
        pairs = pairs[:limit]
    if not pairs:
        raise ValueError(f"split {split_path} holds no pairs")

    torch.manual_seed(seed)
    tokenizer = WordTokenizer([s for s, _ in pairs] + [t for _, t in pairs])
    architecture = architecture or tiny_architecture(len(tokenizer))
    model = M2M100ForConditionalGeneration(architecture)
    if init_from is not None:
        state = torch.load(init_from, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    kind = "adapter" if isinstance(config, LoRATrainingConfig) else "full"
    if kind == "adapter":
        apply_lora(model, config)
        weight_decay = config.weight_decay
    else:
        weight_decay = 0.0
    model.train()

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(
        trainable, lr=config.learning_rate, weight_decay=weight_decay
    )
    use_amp = config.mixed_precision and torch.cuda.is_available()

    encoded = [
        (tokenizer.encode(src, max_len), tokenizer.encode(tgt, max_len)) for src, tgt in pairs
    ]
    step_losses: list[float] = []
    accumulated: list[float] = []
    run_epochs = epochs if epochs is not None else config.epochs
    micro_steps = 0
    try:
        for _ in range(run_epochs):
            for batch in _batches(encoded, config.per_device_batch):
                input_ids = _pad_batch([src for src, _ in batch], PAD)
                attention_mask = (input_ids != PAD).long()
                labels = _pad_batch([tgt for _, tgt in batch], -100)
                with torch.autocast("cuda", enabled=use_amp):
                    loss = model(
                        input_ids=input_ids, attention_mask=attention_mask, labels=labels
                    ).loss
                (loss / config.grad_accum_steps).backward()
                accumulated.append(float(loss.detach()))
                micro_steps += 1
                if micro_steps % config.grad_accum_steps == 0:
                    optimizer.step()
                    optimizer.zero_grad()
                    step_losses.append(sum(accumulated) / len(accumulated))
                    accumulated = []
        if accumulated:
            optimizer.step()
            optimizer.zero_grad()
            step_losses.append(sum(accumulated) / len(accumulated))
    except (torch.cuda.OutOfMemoryError, MemoryError) as exc:
        raise RuntimeError(
            "out of memory during fine-tuning: reduce per_device_batch or "
            "increase grad_accum_steps"
        ) from exc

    trainable_count, total_count = count_parameters(model)
    manifest = ModelManifest(
        base_model_id=base_model_id,
        domain=domain,
        kind=kind,
        trainable_params=trainable_count,
        total_params=total_count,
        data_split_id=split_id(split_path),
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        weights = adapter_state_dict(model) if kind == "adapter" else model.state_dict()
        torch.save(weights, out_dir / ("adapter.pt" if kind == "adapter" else "model.pt"))
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out_dir / "loss_log.json").write_text(
            json.dumps(step_losses) + "\n", encoding="utf-8"
        )
        logger.info("saved %s weights and manifest to %s", kind, out_dir)

    return manifest, step_losses
