"""
Mecanismos de proteção de embeddings aplicados às saídas da vítima.

- random: ruído gaussiano por coordenada, depois renormaliza.
- lapmech: Laplace planar normalizado em d dimensões (direção uniforme na
  esfera, magnitude Gamma(d, 1/ε)), depois renormaliza.
- purmech: perturbação direcional; ângulo com densidade ∝ exp(−εθ)·sin^{d−2}θ
  em [0, π] por rejeição, direção uniforme no espaço tangente.

O orçamento total é ε = (ε/d)·d. São aproximações amostrais dos mecanismos
métricos-LDP; não há prova formal de privacidade aqui.
"""
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .exceptions import DefenseError

_PROPOSALS = 256
_LOG_WINDOW = 40.0


class DefenseKind(str, Enum):
    NONE = "none"
    RANDOM = "random"
    LAPMECH = "lapmech"
    PURMECH = "purmech"


class DefenseSpec(BaseModel):
    """Qual defesa aplicar e com que intensidade"""

    kind: DefenseKind = DefenseKind.NONE
    eps_per_dim: Optional[float] = Field(default=None, description="ε/d (lapmech, purmech)")
    noise_scale: float = Field(default=0.1, description="Desvio padrão do ruído aleatório")
    seed: int = 0

    @model_validator(mode="after")
    def check_budget(self) -> "DefenseSpec":
        if self.kind in (DefenseKind.LAPMECH, DefenseKind.PURMECH):
            if self.eps_per_dim is None or not self.eps_per_dim > 0:
                raise ValueError(f"eps_per_dim must be positive for {self.kind.value}")
        if self.kind == DefenseKind.RANDOM and not self.noise_scale > 0:
            raise ValueError("noise_scale must be positive for random noise")
        return self


def _unit(e: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(e)
    if norm < 1e-12:
        raise DefenseError("cannot perturb a zero vector")
    return e / norm


def _sample_angle(eps: float, d: int, rng: np.random.Generator) -> float:
    """θ ∝ exp(−εθ)·sin^{d−2}θ em [0, π]; log-densidade côncava, unimodal"""

    def log_density(theta):
        out = -eps * theta
        if d > 2:
            with np.errstate(divide="ignore"):
                out = out + (d - 2) * np.log(np.sin(theta))
        return out

    mode = float(np.arctan2(d - 2, eps))
    peak = float(log_density(np.array([mode]))[0])

    # janela onde a densidade ainda é relevante (fora dela a massa é desprezível)
    grid = np.linspace(0.0, np.pi, 4097)
    alive = grid[log_density(grid) >= peak - _LOG_WINDOW]
    lo, hi = float(alive.min()), float(alive.max())
    step = np.pi / 4096
    lo, hi = max(0.0, lo - step), min(np.pi, hi + step)

    while True:
        theta = rng.uniform(lo, hi, size=_PROPOSALS)
        accept = np.log(rng.uniform(size=_PROPOSALS)) < log_density(theta) - peak
        if accept.any():
            return float(theta[np.argmax(accept)])


def apply_defense(spec: DefenseSpec, e: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Devolve o embedding protegido conforme `spec`"""
    e = np.asarray(e, dtype=np.float64)
    d = e.shape[0]

    if spec.kind == DefenseKind.NONE:
        return e.copy()

    if spec.kind == DefenseKind.RANDOM:
        noisy = e + rng.normal(0.0, spec.noise_scale, size=d)
        norm = np.linalg.norm(noisy)
        return noisy / norm if norm > 1e-12 else noisy

    x = _unit(e)
    eps = spec.eps_per_dim * d

    if spec.kind == DefenseKind.LAPMECH:
        direction = _unit(rng.standard_normal(d))
        radius = rng.gamma(shape=d, scale=1.0 / eps)
        y = x + radius * direction
        norm = np.linalg.norm(y)
        # y ≈ 0 só se ruído anular x exatamente; cai na direção sorteada
        return y / norm if norm > 1e-12 else direction

    if spec.kind == DefenseKind.PURMECH:
        if d < 2:
            raise DefenseError("purmech needs at least two dimensions")
        theta = _sample_angle(eps, d, rng)
        g = rng.standard_normal(d)
        tangent = g - np.dot(g, x) * x
        t_norm = np.linalg.norm(tangent)
        while t_norm < 1e-12:
            g = rng.standard_normal(d)
            tangent = g - np.dot(g, x) * x
            t_norm = np.linalg.norm(tangent)
        y = np.cos(theta) * x + np.sin(theta) * (tangent / t_norm)
        return y / np.linalg.norm(y)

    raise DefenseError(f"unknown defense kind {spec.kind}")
