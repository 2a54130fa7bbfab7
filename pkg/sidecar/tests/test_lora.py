import pytest
import torch

from sidecar.lora import (
    LoRATrainingConfig,
    adapter_parameter_stats,
    adapter_state_dict,
    apply_lora,
    count_parameters,
    nllb_600m_architecture,
)


def test_default_config_matches_training_recipe():
    config = LoRATrainingConfig()
    assert config.rank == 16
    assert config.scaling_alpha == 16
    assert config.dropout == 0.1
    assert set(config.target_modules) == {"q_proj", "k_proj", "v_proj", "out_proj", "fc1", "fc2"}
    assert config.learning_rate == 1e-4
    assert config.weight_decay == 0.01
    assert config.epochs == 3
    assert config.per_device_batch == 4
    assert config.grad_accum_steps == 4
    assert config.task == "seq2seq"


def test_adapter_parameter_ratio_criterion():
    stats = adapter_parameter_stats()
    fraction = stats.trainable_fraction
    # target 1.39% plus or minus 0.1 percentage points
    passed = 0.0129 <= fraction <= 0.0149
    print(
        f"ACCEPTANCE adapter-parameter-ratio: {'PASS' if passed else 'FAIL'} "
        f"(trainable={stats.trainable_params}, total={stats.total_params}, "
        f"fraction={fraction * 100:.2f}%)"
    )
    assert passed
    # the reported sizes round to the published 8.65M / 623.72M figures
    assert round(stats.trainable_params / 1e6, 2) == 8.65
    assert round(stats.total_params / 1e6, 2) == 623.72


def _tiny_model():
    from transformers import M2M100Config
    from transformers.models.m2m_100.modeling_m2m_100 import M2M100ForConditionalGeneration

    config = M2M100Config(
        vocab_size=120,
        d_model=32,
        encoder_layers=2,
        decoder_layers=2,
        encoder_attention_heads=4,
        decoder_attention_heads=4,
        encoder_ffn_dim=64,
        decoder_ffn_dim=64,
        max_position_embeddings=32,
        pad_token_id=0,
        bos_token_id=2,
        eos_token_id=3,
        decoder_start_token_id=2,
    )
    torch.manual_seed(0)
    return M2M100ForConditionalGeneration(config)


def test_injection_is_initially_a_no_op():
    model = _tiny_model()
    model.eval()
    input_ids = torch.tensor([[5, 6, 7, 3]])
    labels = torch.tensor([[8, 9, 3]])
    with torch.no_grad():
        before = model(input_ids=input_ids, labels=labels).logits.clone()
    apply_lora(model, LoRATrainingConfig(dropout=0.0))
    model.eval()
    with torch.no_grad():
        after = model(input_ids=input_ids, labels=labels).logits
    torch.testing.assert_close(before, after)


def test_only_adapter_parameters_trainable():
    model = apply_lora(_tiny_model(), LoRATrainingConfig())
    for name, parameter in model.named_parameters():
        is_adapter = "lora_a" in name or "lora_b" in name
        assert parameter.requires_grad == is_adapter, name


def test_adapter_count_matches_analytic_formula():
    model = _tiny_model()
    d_model, ffn, rank = 32, 64, 16
    # per encoder layer: 4 attention projections + fc1 + fc2
    per_attn = rank * (d_model + d_model)
    per_ffn = rank * (d_model + ffn)
    encoder = 2 * (4 * per_attn + 2 * per_ffn)
    # decoder layers carry self- and cross-attention
    decoder = 2 * (8 * per_attn + 2 * per_ffn)
    apply_lora(model, LoRATrainingConfig())
    trainable, _ = count_parameters(model)
    assert trainable == encoder + decoder


def test_adapter_state_dict_holds_only_adapters():
    model = apply_lora(_tiny_model(), LoRATrainingConfig())
    state = adapter_state_dict(model)
    assert state
    assert all("lora_a" in k or "lora_b" in k for k in state)


def test_missing_targets_rejected():
    model = _tiny_model()
    with pytest.raises(ValueError):
        apply_lora(model, LoRATrainingConfig(target_modules=("nonexistent",)))


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        LoRATrainingConfig(rank=0)
    with pytest.raises(ValueError):
        LoRATrainingConfig(dropout=1.0)


def test_architecture_constants():
    config = nllb_600m_architecture()
    assert config.vocab_size == 256206
    assert config.d_model == 1024
    assert config.encoder_layers == config.decoder_layers == 12
