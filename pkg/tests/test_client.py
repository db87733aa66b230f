import os
from unittest.mock import MagicMock, patch

import numpy as np
import pytest
import requests
from fastapi.testclient import TestClient

from embinv.client import RemoteEmbedder
from embinv.embed import HashEmbedder, hash_embed
from embinv.exceptions import InvalidAPIKeyError, NetworkError, RemoteEmbedderError
from embinv.service import create_app
from embinv.settings import EmbinvSettings


@pytest.fixture
def settings():
    with patch.dict(os.environ, {"DISABLE_ENV_LOAD": "1"}, clear=True):
        yield EmbinvSettings(api_key="test_key_1234", base_url="http://testserver", retries=2)


def _response(status, payload=None):
    response = MagicMock()
    response.status_code = status
    response.json.return_value = payload or {}
    return response


def test_round_trip_against_service(settings):
    """Cliente contra o serviço local devolve o mesmo que hash_embed"""
    embedder = HashEmbedder(dim=32, seed=5)
    session = TestClient(create_app(embedder, api_key="test_key_1234"))
    remote = RemoteEmbedder(config=settings, session=session)

    out = remote.embed_batch(["the cat sat", "a dog"])
    assert remote.dim == 32
    assert np.allclose(out[0], hash_embed(embedder, "the cat sat"))
    assert np.allclose(out[1], hash_embed(embedder, "a dog"))


def test_wrong_key_raises(settings):
    session = TestClient(create_app(HashEmbedder(dim=8), api_key="other"))
    remote = RemoteEmbedder(config=settings, session=session)
    with pytest.raises(InvalidAPIKeyError) as info:
        remote.embed_batch(["x"])
    assert info.value.status_code == 401


def test_timeout_exhausts_retries(settings):
    session = MagicMock()
    session.post.side_effect = requests.exceptions.Timeout()
    remote = RemoteEmbedder(config=settings, session=session)
    with pytest.raises(NetworkError) as info:
        remote.embed_batch(["x"])
    assert info.value.attempts == 3
    assert session.post.call_count == 3


def test_server_error_is_retried(settings):
    session = MagicMock()
    session.post.side_effect = [
        _response(503),
        _response(200, {"embeddings": [[1.0, 0.0]], "dim": 2}),
    ]
    remote = RemoteEmbedder(config=settings, session=session)
    out = remote.embed_batch(["x"])
    assert out.shape == (1, 2)
    assert session.post.call_count == 2


def test_client_error_not_retried(settings):
    session = MagicMock()
    session.post.return_value = _response(413)
    remote = RemoteEmbedder(config=settings, session=session)
    with pytest.raises(RemoteEmbedderError) as info:
        remote.embed_batch(["x"])
    assert info.value.status_code == 413
    assert session.post.call_count == 1


def test_count_mismatch(settings):
    session = MagicMock()
    session.post.return_value = _response(200, {"embeddings": [[1.0]], "dim": 1})
    remote = RemoteEmbedder(config=settings, session=session)
    with pytest.raises(RemoteEmbedderError, match="returned 1 embeddings for 2 texts"):
        remote.embed_batch(["x", "y"])


def test_malformed_response(settings):
    session = MagicMock()
    session.post.return_value = _response(200, {"vectors": []})
    remote = RemoteEmbedder(config=settings, session=session)
    with pytest.raises(RemoteEmbedderError, match="malformed"):
        remote.embed_batch(["x"])


def test_bearer_header_sent(settings):
    session = MagicMock()
    session.post.return_value = _response(200, {"embeddings": [[1.0]], "dim": 1})
    RemoteEmbedder(config=settings, session=session).embed_batch(["x"])
    headers = session.post.call_args.kwargs["headers"]
    assert headers["Authorization"] == "Bearer test_key_1234"
