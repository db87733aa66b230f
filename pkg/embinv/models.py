# models.py - Tipos compartilhados: configuração do ataque, ledger de consultas e relatório
from enum import Enum
from typing import Any, Dict, List, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import InvalidConfigError


class Rounding(str, Enum):
    """Regra para contagens de consulta não inteiras"""
    NEAREST = "nearest"
    FLOOR = "floor"
    CEIL = "ceil"


class QuerySelection(str, Enum):
    """Critério para escolher o grupo consultado no passo ④"""
    SCORE = "score"      # S atual (logit + conf × cos)
    COSINE = "cosine"    # só o termo de cosseno ponderado


class Phase(str, Enum):
    """Fase a que uma consulta à vítima é atribuída"""
    OFFLINE = "offline"
    ONLINE = "online"
    SETUP = "setup"
    EVAL = "eval"


class AttackConfig(BaseModel):
    """Hiperparâmetros do ataque e ajustes de engenharia"""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    k_s: int = Field(default=1000, description="Tokens candidatos por expansão")
    k_a: int = Field(default=50, description="Consultas base por iteração")
    k_b: int = Field(default=10, description="Largura do beam")
    gamma: float = Field(default=0.8, description="Decaimento das consultas")
    th_w: float = Field(default=0.9, description="Limite de cosseno do filtro de diversidade")
    t_max: int = Field(default=32, description="Comprimento máximo T")
    lambda_: float = Field(default=0.1, alias="lambda", description="Regularizador ridge")
    first_step_penalty: float = Field(default=-5.0, description="Penalidade de logit em t=1")
    final_rerank: int = Field(default=5, description="Finalistas reverificados na vítima")
    seed: int = 0
    rounding: Rounding = Rounding.NEAREST

    query_selection: QuerySelection = QuerySelection.SCORE
    conf_override: Optional[float] = Field(
        default=None, description="Peso fixo no lugar de conf_t (0.0 = beam só por logits)"
    )
    memoize: bool = True
    dump_alignment: bool = False


def validate_config(cfg: AttackConfig) -> AttackConfig:
    """Devolve a config inalterada se todos os invariantes valem; senão acusa o primeiro"""
    if not 0.0 < cfg.gamma < 1.0:
        raise InvalidConfigError("gamma", "gamma must lie in (0,1)")
    if not 0.0 < cfg.th_w <= 1.0:
        raise InvalidConfigError("th_w", "th_w must lie in (0,1]")
    if cfg.k_b < 1:
        raise InvalidConfigError("k_b", "k_b must be at least 1")
    if cfg.k_b > cfg.k_s:
        raise InvalidConfigError("k_b", "k_b exceeds k_s")
    if cfg.t_max < 1:
        raise InvalidConfigError("t_max", "t_max must be at least 1")
    if not cfg.lambda_ > 0.0:
        raise InvalidConfigError("lambda", "lambda must be positive")
    if cfg.k_a < 1:
        raise InvalidConfigError("k_a", "k_a must be at least 1")
    if cfg.final_rerank < 0:
        raise InvalidConfigError("final_rerank", "final_rerank must be non-negative")
    if cfg.conf_override is not None and not -1.0 <= cfg.conf_override <= 1.0:
        raise InvalidConfigError("conf_override", "conf_override must lie in [-1,1]")

    logger.debug(
        f"Config aceita: K_S={cfg.k_s} K_A={cfg.k_a} K_B={cfg.k_b} "
        f"gamma={cfg.gamma} T={cfg.t_max} lambda={cfg.lambda_}"
    )
    return cfg


def count_tokens(text: str) -> int:
    """Tokens por espaço em branco (tokenizer da vítima é desconhecido)"""
    return len(text.split())


class QueryLedger(BaseModel):
    """Contagem de sentenças e tokens enviados à vítima, por fase"""

    offline_sentences: int = 0
    offline_tokens: int = 0
    online_sentences: int = 0
    online_tokens: int = 0
    setup_sentences: int = 0
    setup_tokens: int = 0
    eval_sentences: int = 0
    eval_tokens: int = 0

    def record(self, phase: Phase, sentences: int, tokens: int) -> "QueryLedger":
        """Soma as contagens na fase indicada"""
        if sentences < 0 or tokens < 0:
            raise ValueError("ledger counts must be non-negative")
        phase = Phase(phase)
        s_field = f"{phase.value}_sentences"
        t_field = f"{phase.value}_tokens"
        setattr(self, s_field, getattr(self, s_field) + sentences)
        setattr(self, t_field, getattr(self, t_field) + tokens)
        return self

    def snapshot(self) -> "QueryLedger":
        return self.model_copy()

    def __add__(self, other: "QueryLedger") -> "QueryLedger":
        data = {name: getattr(self, name) + getattr(other, name) for name in type(self).model_fields}
        return QueryLedger(**data)


def ledger_record(ledger: QueryLedger, phase: Phase, sentences: int, tokens: int) -> QueryLedger:
    """Registra uma consulta no ledger e o devolve"""
    return ledger.record(phase, sentences, tokens)


# Faixas válidas de cada métrica no relatório
METRIC_SCALES: Dict[str, tuple] = {
    "BLEU-1": (0.0, 100.0),
    "BLEU-2": (0.0, 100.0),
    "ROUGE-L": (0.0, 100.0),
    "ROUGE-1": (0.0, 100.0),
    "COS": (-1.0, 1.0),
}


class RunReport(BaseModel):
    """Resultado de um ataque contra um alvo"""

    target_id: str
    reference: Optional[str] = None
    reconstruction: str = ""
    metrics: Dict[str, float] = Field(default_factory=dict)
    ledger: QueryLedger = Field(default_factory=QueryLedger)
    conf_trace: List[float] = Field(default_factory=list)
    iterations_used: int = 0
    final_cos: Optional[float] = None
    alignment_cos: Optional[float] = None
    alignment: Optional[Dict[str, Any]] = None
    seed: int = 0
    error: Optional[str] = None

    @model_validator(mode="after")
    def check_consistency(self) -> "RunReport":
        if len(self.conf_trace) != self.iterations_used:
            raise ValueError("conf_trace length must equal iterations_used")
        for name, value in self.metrics.items():
            lo, hi = METRIC_SCALES.get(name, (float("-inf"), float("inf")))
            if not lo - 1e-9 <= value <= hi + 1e-9:
                raise ValueError(f"metric {name}={value} outside [{lo}, {hi}]")
        return self

    @property
    def ok(self) -> bool:
        return self.error is None
