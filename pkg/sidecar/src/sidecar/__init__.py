"""Neural sidecar for the semiroute gateway.

One process serves one role (embedding, classification, or translation)
over the wire contracts the gateway and labeler expect. Deterministic
backends make the whole stack runnable offline; Hugging Face backends can
be swapped in where model weights are available. Training entry points
fine-tune per-domain translation models either fully or with low-rank
adapters.
"""

from .backends import EchoTranslator, HashEmbedder, KeywordZeroShotClassifier
from .lora import (
    FullFTConfig,
    LoRATrainingConfig,
    adapter_parameter_stats,
    apply_lora,
    count_parameters,
    nllb_600m_architecture,
)
from .service import create_app
from .training import ModelManifest, train_domain

__version__ = "0.1.0"
