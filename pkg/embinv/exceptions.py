# exceptions.py
from typing import Optional


class EmbinvError(Exception):
    """Erro base do embinv"""
    pass


class InvalidConfigError(EmbinvError):
    """Configuração viola um invariante (guarda o nome do campo)"""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class LanguageModelError(EmbinvError):
    """Falha ao treinar ou consultar o gerador"""
    pass


class ModelFormatError(LanguageModelError):
    """Arquivo de modelo com cabeçalho ou versão inválidos"""
    pass


class EmbeddingError(EmbinvError):
    """Entrada ou saída inválida de um embedder"""
    pass


class RemoteEmbedderError(EmbeddingError):
    """Erro do embedder remoto (com metadados de retry)"""

    def __init__(self, message: str, status_code: Optional[int] = None, attempts: int = 1):
        super().__init__(message)
        self.status_code = status_code
        self.attempts = attempts


class InvalidAPIKeyError(RemoteEmbedderError):
    """API key inválida"""
    pass


class NetworkError(RemoteEmbedderError):
    """Erro de conexão ou timeout"""
    pass


class DefenseError(EmbinvError):
    """Entrada inválida para um mecanismo de defesa"""
    pass


class AlignmentError(EmbinvError):
    """Estado de alinhamento incompleto ou sistema singular"""
    pass


class SearchError(EmbinvError):
    """Falha no loop de busca"""
    pass


class ExperimentError(EmbinvError):
    """Especificação de experimento inválida"""
    pass
