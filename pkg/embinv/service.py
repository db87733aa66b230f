# service.py - Serviço HTTP que expõe um embedder como vítima ao vivo
import itertools
import threading
from typing import List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse
from loguru import logger
from pydantic import BaseModel, ValidationError

from .defense import DefenseKind, DefenseSpec, apply_defense
from .embed import EmbedderPort

MAX_BATCH = 512


class EmbedRequest(BaseModel):
    texts: List[str]


def create_app(
    embedder: EmbedderPort,
    defense: Optional[DefenseSpec] = None,
    api_key: Optional[str] = None,
    max_batch: int = MAX_BATCH,
) -> FastAPI:
    """Monta o app com POST /embed e GET /health"""
    app = FastAPI(title="embinv victim service")
    request_ids = itertools.count()
    lock = threading.Lock()
    noisy = defense is not None and defense.kind != DefenseKind.NONE

    def compute(texts: List[str], request_id: int) -> np.ndarray:
        """Embeddings + defesa, fora do event loop"""
        out = np.asarray(embedder.embed_batch(texts), dtype=np.float64)
        if noisy:
            # fluxo de RNG próprio por requisição
            rng = np.random.default_rng([defense.seed, request_id])
            out = np.stack([apply_defense(defense, row, rng) for row in out])
        return out

    @app.get("/health")
    def health():
        return {"status": "ok", "dim": embedder.dim}

    @app.post("/embed")
    async def embed(request: Request):
        if api_key is not None and request.headers.get("authorization") != f"Bearer {api_key}":
            return JSONResponse(status_code=401, content={"error": "Invalid API key"})

        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "Invalid JSON body"})

        try:
            payload = EmbedRequest.model_validate(body)
        except ValidationError:
            return JSONResponse(status_code=400, content={"error": "body must be {\"texts\": [string, ...]}"})

        if not payload.texts:
            return JSONResponse(status_code=400, content={"error": "texts must not be empty"})
        if len(payload.texts) > max_batch:
            return JSONResponse(status_code=413, content={"error": f"batch exceeds {max_batch} texts"})

        with lock:
            request_id = next(request_ids)

        try:
            out = await run_in_threadpool(compute, payload.texts, request_id)
        except Exception:
            logger.exception("Erro inesperado ao gerar embeddings")
            return JSONResponse(status_code=500, content={"error": "Internal embedding error"})

        logger.debug(f"/embed: {len(payload.texts)} textos")
        return {"embeddings": out.tolist(), "dim": int(out.shape[1])}

    return app


def serve_embed(
    embedder: EmbedderPort,
    defense: Optional[DefenseSpec] = None,
    port: int = 8080,
    host: str = "127.0.0.1",
    api_key: Optional[str] = None,
) -> None:
    """Sobe o serviço (bloqueante)"""
    logger.info(f"Servindo embeddings (dim={embedder.dim}) em http://{host}:{port}")
    uvicorn.run(create_app(embedder, defense, api_key=api_key), host=host, port=port)
