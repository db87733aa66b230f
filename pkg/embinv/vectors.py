"""Utilitários de similaridade entre vetores"""
import numpy as np
import numpy.typing as npt

# Embedding = vetor real finito; lotes são matrizes (n, d)
Embedding = npt.NDArray[np.float64]

_EPS = 1e-12


def as_embedding(values) -> Embedding:
    """Converte para vetor float64, rejeitando vazio e não finito"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("embedding must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding has non-finite values")
    return arr


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Normaliza linhas (ou o vetor); linhas nulas ficam nulas"""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > _EPS)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosseno entre dois vetores; 0 se algum for nulo"""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < _EPS or nb < _EPS:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_to(matrix: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Cosseno de cada linha de `matrix` com `target`"""
    m = l2_normalize(np.atleast_2d(matrix))
    t = l2_normalize(target)
    return np.clip(m @ t, -1.0, 1.0)


def rowwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosseno linha a linha entre duas matrizes de mesmo formato"""
    a = l2_normalize(np.atleast_2d(a))
    b = l2_normalize(np.atleast_2d(b))
    return np.clip(np.sum(a * b, axis=1), -1.0, 1.0)
