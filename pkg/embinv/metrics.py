# metrics.py - BLEU-1/2, ROUGE-1/L e COS para avaliar reconstruções
import re
from collections import Counter
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, model_validator
from sacrebleu.metrics import BLEU

from .embed import VictimHandle
from .models import METRIC_SCALES
from .vectors import cosine

_TOKEN = re.compile(r"[^\W_]+")


class MetricValue(BaseModel):
    """Valor de uma métrica dentro da sua escala declarada"""

    name: str
    value: float
    scale: Tuple[float, float]

    @model_validator(mode="after")
    def check_scale(self) -> "MetricValue":
        lo, hi = self.scale
        if not lo - 1e-9 <= self.value <= hi + 1e-9:
            raise ValueError(f"{self.name}={self.value} outside [{lo}, {hi}]")
        return self


def tokenize(text: str) -> List[str]:
    """Minúsculas; token = sequência máxima de caracteres alfanuméricos"""
    return _TOKEN.findall(text.lower())


def bleu_n(candidate: str, reference: str, n: int) -> float:
    """BLEU-N de sentença (sacrebleu, sem suavização, ordem efetiva) ×100"""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    cand = tokenize(candidate)
    if not cand:
        return 0.0

    # tokens já normalizados: o sacrebleu só separa por espaço
    scorer = BLEU(max_ngram_order=n, smooth_method="none", tokenize="none", effective_order=True)
    return float(scorer.sentence_score(" ".join(cand), [" ".join(tokenize(reference))]).score)


def _lcs(a: List[str], b: List[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def _f1(overlap: int, n_cand: int, n_ref: int) -> float:
    if overlap == 0:
        return 0.0
    p = overlap / n_cand
    r = overlap / n_ref
    return 100.0 * 2 * p * r / (p + r)


def rouge(candidate: str, reference: str, variant: str) -> float:
    """ROUGE-1 (sobreposição de unigramas) ou ROUGE-L (LCS), F1 ×100"""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not ref or not cand:
        return 0.0

    variant = str(variant).upper()
    if variant == "1":
        overlap = sum((Counter(cand) & Counter(ref)).values())
    elif variant == "L":
        overlap = _lcs(cand, ref)
    else:
        raise ValueError("variant must be '1' or 'L'")
    return _f1(overlap, len(cand), len(ref))


def cos_metric(reconstruction: str, target: np.ndarray, victim: VictimHandle) -> float:
    """Cosseno entre o embedding da reconstrução na vítima e o alvo (consulta contabilizada)"""
    emb = victim.query([reconstruction])[0]
    return cosine(emb, np.asarray(target, dtype=np.float64))


def text_metrics(reconstruction: str, reference: str) -> Dict[str, float]:
    """As quatro métricas lexicais, na ordem das colunas do relatório"""
    values = [
        MetricValue(name="BLEU-1", value=bleu_n(reconstruction, reference, 1), scale=METRIC_SCALES["BLEU-1"]),
        MetricValue(name="BLEU-2", value=bleu_n(reconstruction, reference, 2), scale=METRIC_SCALES["BLEU-2"]),
        MetricValue(name="ROUGE-L", value=rouge(reconstruction, reference, "L"), scale=METRIC_SCALES["ROUGE-L"]),
        MetricValue(name="ROUGE-1", value=rouge(reconstruction, reference, "1"), scale=METRIC_SCALES["ROUGE-1"]),
    ]
    return {m.name: m.value for m in values}


def evaluate_text(
    reconstruction: str, reference: str, target: np.ndarray, victim: VictimHandle
) -> Dict[str, float]:
    """Todas as cinco métricas (COS consulta a vítima uma vez)"""
    out = text_metrics(reconstruction, reference)
    out["COS"] = MetricValue(
        name="COS", value=cos_metric(reconstruction, target, victim), scale=METRIC_SCALES["COS"]
    ).value
    return out
