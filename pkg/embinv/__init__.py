# __init__.py - Expõe as classes principais
"""
embinv - Ataque de inversão de embeddings caixa-preta sem treinamento

Uso básico:
    >>> from embinv import AttackConfig, HashEmbedder, LinearVictim, VictimHandle, train_ngram, run_attack
    >>> lm = train_ngram(corpus, n=2, k=0.1)
    >>> local = HashEmbedder(dim=256, seed=1)
    >>> victim = VictimHandle(LinearVictim(HashEmbedder(dim=256, seed=2)))
    >>> target = victim.with_phase("setup").query(["the cat sat on the mat"])[0]
    >>> report = run_attack(target, lm, local, victim, AttackConfig(k_s=64, t_max=8))
    >>> print(report.reconstruction)
"""

from .align import AlignState, confidence, ingest, project, solve
from .client import RemoteEmbedder
from .defense import DefenseKind, DefenseSpec, apply_defense
from .embed import EmbedderPort, HashEmbedder, LinearVictim, VictimHandle, hash_embed, victim_query
from .exceptions import (
    AlignmentError,
    DefenseError,
    EmbeddingError,
    EmbinvError,
    ExperimentError,
    InvalidAPIKeyError,
    InvalidConfigError,
    LanguageModelError,
    ModelFormatError,
    NetworkError,
    RemoteEmbedderError,
    SearchError,
)
from .harness import ExperimentSpec, ExperimentSummary, run_experiment, run_sweep
from .lm import NGramLM, Vocabulary, diversity_filter, next_token_logits, train_ngram
from .metrics import bleu_n, cos_metric, rouge
from .models import AttackConfig, Phase, QueryLedger, RunReport, ledger_record, validate_config
from .search import beam_step, query_count, run_attack, score_candidates, z_score
from .service import create_app, serve_embed
from .settings import EmbinvSettings, get_settings

# Define o que é exportado quando fazem: from embinv import *
__all__ = [
    "AttackConfig",
    "validate_config",
    "Phase",
    "QueryLedger",
    "ledger_record",
    "RunReport",
    "EmbedderPort",
    "HashEmbedder",
    "hash_embed",
    "LinearVictim",
    "VictimHandle",
    "victim_query",
    "RemoteEmbedder",
    "DefenseKind",
    "DefenseSpec",
    "apply_defense",
    "Vocabulary",
    "NGramLM",
    "train_ngram",
    "next_token_logits",
    "diversity_filter",
    "AlignState",
    "ingest",
    "solve",
    "project",
    "confidence",
    "z_score",
    "score_candidates",
    "query_count",
    "beam_step",
    "run_attack",
    "bleu_n",
    "rouge",
    "cos_metric",
    "ExperimentSpec",
    "ExperimentSummary",
    "run_experiment",
    "run_sweep",
    "create_app",
    "serve_embed",
    "EmbinvSettings",
    "get_settings",
    "EmbinvError",
    "InvalidConfigError",
    "LanguageModelError",
    "ModelFormatError",
    "EmbeddingError",
    "RemoteEmbedderError",
    "InvalidAPIKeyError",
    "NetworkError",
    "DefenseError",
    "AlignmentError",
    "SearchError",
    "ExperimentError",
]

__version__ = "0.1.0"
