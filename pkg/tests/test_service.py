import asyncio

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embinv.defense import DefenseKind, DefenseSpec
from embinv.embed import HashEmbedder
from embinv.service import create_app


@pytest.fixture
def client():
    return TestClient(create_app(HashEmbedder(dim=64, seed=2)))


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "dim": 64}


def test_embed_matches_direct_call(client):
    texts = ["the cat sat", "a dog ran"]
    response = client.post("/embed", json={"texts": texts})
    assert response.status_code == 200
    body = response.json()
    assert body["dim"] == 64
    assert np.allclose(body["embeddings"], HashEmbedder(dim=64, seed=2).embed_batch(texts))


def test_empty_batch(client):
    response = client.post("/embed", json={"texts": []})
    assert response.status_code == 400
    assert "error" in response.json()


def test_malformed_json(client):
    response = client.post("/embed", content=b"{not json", headers={"Content-Type": "application/json"})
    assert response.status_code == 400
    assert "error" in response.json()


def test_wrong_schema(client):
    response = client.post("/embed", json={"sentences": ["x"]})
    assert response.status_code == 400


def test_oversized_batch(client):
    response = client.post("/embed", json={"texts": ["x"] * 513})
    assert response.status_code == 413


def test_fresh_noise_per_request():
    """LapMech: duas requisições iguais, respostas diferentes e unitárias"""
    spec = DefenseSpec(kind=DefenseKind.LAPMECH, eps_per_dim=1.0, seed=3)
    client = TestClient(create_app(HashEmbedder(dim=64), defense=spec))
    a = np.array(client.post("/embed", json={"texts": ["same"]}).json()["embeddings"][0])
    b = np.array(client.post("/embed", json={"texts": ["same"]}).json()["embeddings"][0])
    assert not np.allclose(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert np.linalg.norm(b) == pytest.approx(1.0)


def test_bearer_token_required():
    client = TestClient(create_app(HashEmbedder(dim=8), api_key="secret"))
    assert client.post("/embed", json={"texts": ["x"]}).status_code == 401
    ok = client.post("/embed", json={"texts": ["x"]}, headers={"Authorization": "Bearer secret"})
    assert ok.status_code == 200


def test_embedder_failure_is_500():
    class Broken:
        dim = 4

        def embed_batch(self, texts):
            raise RuntimeError("boom")

    client = TestClient(create_app(Broken()))
    assert client.post("/embed", json={"texts": ["x"]}).status_code == 500


def test_embedding_runs_off_the_event_loop():
    class LoopRecorder:
        dim = 4
        loops = []

        def embed_batch(self, texts):
            try:
                asyncio.get_running_loop()
                self.loops.append(True)
            except RuntimeError:
                self.loops.append(False)
            return np.ones((len(texts), 4))

    embedder = LoopRecorder()
    client = TestClient(create_app(embedder))
    assert client.post("/embed", json={"texts": ["x", "y"]}).status_code == 200
    assert embedder.loops == [False]
