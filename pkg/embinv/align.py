"""
Alinhamento online do espaço local ao espaço da vítima.

Guarda só as estatísticas suficientes EᵀE e EᵀẼ, então a memória é O(d²)
independente do número de consultas. W = (EᵀE + λI)⁻¹ EᵀẼ sai de uma
fatoração de Cholesky (nunca da inversa explícita).
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import AlignmentError
from .vectors import rowwise_cosine

# fator de desconto da confiança na primeira iteração (W⁰ não existe)
FIRST_STEP_DISCOUNT = 0.7


@dataclass(eq=False)
class AlignState:
    """Estado do ridge online de um único alvo"""

    d_local: int
    d_victim: int
    lam: float
    gram: np.ndarray = field(init=False)
    cross: np.ndarray = field(init=False)
    n_pairs: int = 0
    w: Optional[np.ndarray] = None
    conf_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.lam > 0:
            raise AlignmentError("lambda must be positive")
        self.gram = np.zeros((self.d_local, self.d_local))
        self.cross = np.zeros((self.d_local, self.d_victim))


def ingest(state: AlignState, locals_: np.ndarray, victims: np.ndarray) -> AlignState:
    """Acumula os pares (e_i, ẽ_i) nas estatísticas EᵀE e EᵀẼ"""
    e = np.atleast_2d(np.asarray(locals_, dtype=np.float64))
    v = np.atleast_2d(np.asarray(victims, dtype=np.float64))
    if e.shape[0] != v.shape[0] or e.shape[0] == 0:
        raise AlignmentError("ingest needs the same non-zero number of local and victim embeddings")
    if e.shape[1] != state.d_local or v.shape[1] != state.d_victim:
        raise AlignmentError(
            f"dimension mismatch: got {e.shape[1]}x{v.shape[1]}, "
            f"expected {state.d_local}x{state.d_victim}"
        )

    state.gram += e.T @ e
    state.gram = 0.5 * (state.gram + state.gram.T)
    state.cross += e.T @ v
    state.n_pairs += e.shape[0]
    return state


def solve(state: AlignState) -> np.ndarray:
    """Resolve o ridge em forma fechada e guarda W no estado"""
    if state.n_pairs < 1:
        raise AlignmentError("solve needs at least one ingested pair")

    system = state.gram + state.lam * np.eye(state.d_local)
    try:
        factor = cho_factor(system)
    except LinAlgError as e:
        raise AlignmentError(f"ridge system is singular (lambda={state.lam}): {e}") from e

    state.w = cho_solve(factor, state.cross)
    return state.w


def project(state: AlignState, e: np.ndarray) -> np.ndarray:
    """Leva um embedding (ou lote) local ao espaço da vítima: e·W"""
    if state.w is None:
        raise AlignmentError("alignment matrix W is undefined; call solve first")
    return np.asarray(e, dtype=np.float64) @ state.w


def confidence(
    state: AlignState,
    locals_queried: np.ndarray,
    victims_queried: np.ndarray,
    w_prev: Optional[np.ndarray],
    iteration: int,
) -> float:
    """conf_t: cosseno médio entre e_i·W^{t-1} e ẽ_i do lote consultado nesta iteração"""
    e = np.atleast_2d(np.asarray(locals_queried, dtype=np.float64))
    v = np.atleast_2d(np.asarray(victims_queried, dtype=np.float64))
    if e.shape[0] == 0 or e.shape[0] != v.shape[0]:
        raise AlignmentError("confidence needs a non-empty batch of matching pairs")

    if iteration == 1 or w_prev is None:
        w = state.w if state.w is not None else solve(state)
        conf = FIRST_STEP_DISCOUNT * float(np.mean(rowwise_cosine(e @ w, v)))
    else:
        conf = float(np.mean(rowwise_cosine(e @ w_prev, v)))

    conf = float(np.clip(conf, -1.0, 1.0))
    state.conf_history.append(conf)
    logger.debug(f"conf_{iteration} = {conf:.4f} ({e.shape[0]} pares, total {state.n_pairs})")
    return conf
