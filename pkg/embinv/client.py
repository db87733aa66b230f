# client.py - Cliente HTTP para vítimas remotas (protocolo POST /embed)
from typing import Any, List, Optional, Sequence

import numpy as np
import requests
from loguru import logger
from pydantic import BaseModel, ValidationError
from requests.exceptions import RequestException, Timeout

from .exceptions import InvalidAPIKeyError, NetworkError, RemoteEmbedderError
from .settings import EmbinvSettings, get_settings


class EmbedResponse(BaseModel):
    """Corpo de resposta do serviço de embeddings"""
    embeddings: List[List[float]]
    dim: int


class RemoteEmbedder:
    """Embedder remoto com retry e erros traduzidos"""

    def __init__(self, config: Optional[EmbinvSettings] = None, session: Optional[Any] = None):
        """Inicializa o cliente (session pode ser qualquer objeto com .get/.post)"""
        self.config = config or get_settings(require_api_key=True)
        self._session = session if session is not None else requests.Session()
        self._dim: Optional[int] = None

        logger.info(f"RemoteEmbedder inicializado: {self.config.base_url}")
        logger.debug(f"Timeout {self.config.timeout}s, {self.config.retries} retries")

    @property
    def dim(self) -> int:
        if self._dim is None:
            self._dim = self._fetch_dim()
        return self._dim

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        return headers

    def _url(self, path: str) -> str:
        return f"{self.config.base_url.rstrip('/')}{path}"

    def _fetch_dim(self) -> int:
        response = self._request("GET", "/health")
        return int(response["dim"])

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Envia um lote e devolve a matriz (n, dim)"""
        texts = list(texts)
        data = self._request("POST", "/embed", {"texts": texts})

        try:
            parsed = EmbedResponse.model_validate(data)
        except ValidationError as e:
            logger.error(f"Resposta malformada do serviço: {e}")
            raise RemoteEmbedderError(f"malformed embed response: {e}") from e

        if len(parsed.embeddings) != len(texts):
            raise RemoteEmbedderError(
                f"service returned {len(parsed.embeddings)} embeddings for {len(texts)} texts"
            )
        self._dim = parsed.dim
        return np.asarray(parsed.embeddings, dtype=np.float64).reshape(len(texts), parsed.dim)

    def _request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        """Faz a chamada com retry em timeout, erro de conexão e 5xx"""
        url = self._url(path)
        attempts = self.config.retries + 1

        for attempt in range(1, attempts + 1):
            try:
                # 🎯 LOG: Requisição HTTP
                logger.debug(f"{method} {url} (tentativa {attempt}/{attempts})")
                if method == "POST":
                    response = self._session.post(
                        url, json=payload, headers=self._headers(), timeout=self.config.timeout
                    )
                else:
                    response = self._session.get(url, headers=self._headers(), timeout=self.config.timeout)
                logger.debug(f"Status code: {response.status_code}")

            except Timeout:
                logger.warning(f"Timeout em {url} (tentativa {attempt}/{attempts})")
                if attempt == attempts:
                    raise NetworkError(f"timeout calling {url}", attempts=attempt)
                continue

            except RequestException as e:
                logger.warning(f"Erro de conexão em {url}: {e}")
                if attempt == attempts:
                    raise NetworkError(f"connection error calling {url}: {e}", attempts=attempt)
                continue

            status = response.status_code
            if status == 401:
                logger.error("API key inválida ou expirada")
                raise InvalidAPIKeyError("invalid API key", status_code=status, attempts=attempt)
            if status >= 500 and attempt < attempts:
                logger.warning(f"Erro {status} do serviço, repetindo")
                continue
            if status >= 300:
                logger.error(f"Erro HTTP {status} em {url}")
                raise RemoteEmbedderError(
                    f"embedding service returned HTTP {status}", status_code=status, attempts=attempt
                )

            try:
                return response.json()
            except ValueError as e:
                raise RemoteEmbedderError(f"invalid JSON from {url}", status_code=status, attempts=attempt) from e

        raise RemoteEmbedderError(f"no response from {url}", attempts=attempts)
