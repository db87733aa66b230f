"""Configurações de processo do embinv"""
import os
from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from loguru import logger


class EmbinvSettings(BaseSettings):
    """Configuração lida do ambiente (e do .env) para vítimas remotas e logs"""

    model_config = SettingsConfigDict(
        env_file=".env" if not os.getenv("DISABLE_ENV_LOAD") else None,
        env_file_encoding="utf-8",
        env_prefix="EMBINV_",
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    # Vítima remota
    api_key: Optional[str] = Field(
        default=None,
        description="Bearer token do serviço de embeddings",
        alias="EMBINV_API_KEY"
    )

    base_url: str = Field(
        default="http://127.0.0.1:8080",
        description="URL base do serviço de embeddings"
    )

    timeout: int = Field(
        default=10,
        ge=1,
        le=120,
        description="Timeout da requisição em segundos"
    )

    retries: int = Field(
        default=2,
        ge=0,
        le=10,
        description="Tentativas extras em falhas transitórias"
    )

    log_level: str = Field(default="INFO", description="Nível do logger")


def get_settings(require_api_key: bool = False) -> EmbinvSettings:
    """Carrega as configurações do ambiente e valida a API key quando exigida"""
    config = EmbinvSettings()

    if require_api_key:
        if not config.api_key or not config.api_key.strip():
            logger.error("EMBINV_API_KEY ausente para vítima remota")
            raise ValueError("API key not configured. Set EMBINV_API_KEY in the environment or .env")
        logger.success(f"Config carregada! API key: ...{config.api_key[-4:]}")
    else:
        logger.debug(f"Config carregada: base_url={config.base_url}")

    return config
