"""
Perfis de parâmetros e configuração da linha de comando.
"""

import os
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.services.bfv import SchemeParams


@dataclass(frozen=True)
class Profile:
    name: str
    degree: int
    plain_modulus: int
    prime_count: int
    description: str

    @property
    def slot_count(self):
        return self.degree // 2

    def build(self, plain_modulus=None):
        """Instancia SchemeParams, opcionalmente com outro t."""
        return SchemeParams.create(self.degree, plain_modulus or self.plain_modulus, self.prime_count)


PROFILES = {
    p.name: p
    for p in (
        Profile("toy", 8, 17, 2, "N=8, n=4; testes exaustivos"),
        Profile("desk16", 16, 65537, 3, "N=16, n=8; oráculo e fuzz"),
        Profile("desk", 1024, 65537, 3, "N=1024, n=512; demonstrações rápidas"),
        Profile("n4096", 8192, 65537, 4, "N=8192, n=4096; benchmarks médios"),
        Profile("prod", 16384, 65537, 4, "N=16384, n=8192; escala de produção"),
    )
}
DEFAULT_PROFILE = "prod"
# Todos ≡ 1 (mod 2N) para N ≤ 2^14.
SUPPORTED_PLAIN_MODULI = (65537, 786433, 5767169)
DEFAULT_DATA_DIR = "hermes_data"
OUTPUT_FORMATS = ("human", "machine")


def get_profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"perfil desconhecido: {name!r} (opções: {', '.join(PROFILES)})") from None


class CliConfig(BaseModel):
    """
    Configuração efetiva de uma execução: opções da linha de comando com
    fallback para as variáveis HERMES_*.

    Opções de um único comando (t do keygen, tamanho de grupo do ingest)
    são validadas pelo próprio comando contra os parâmetros carregados.
    """

    model_config = ConfigDict(extra="forbid")

    data_dir: Path = Field(default_factory=lambda: Path(os.getenv("HERMES_DATA_DIR", DEFAULT_DATA_DIR)))
    profile: str = Field(default_factory=lambda: os.getenv("HERMES_PROFILE", DEFAULT_PROFILE))
    seed: int | None = None
    output: str = "human"
    log_level: str = "WARNING"

    @field_validator("profile")
    @classmethod
    def _known_profile(cls, value):
        get_profile(value)
        return value

    @field_validator("output")
    @classmethod
    def _known_output(cls, value):
        if value not in OUTPUT_FORMATS:
            raise ValueError(f"formato de saída inválido: {value!r}")
        return value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value):
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"nível de log inválido: {value!r}")
        return value

    @property
    def machine(self):
        return self.output == "machine"

    @property
    def key_dir(self):
        return self.data_dir / "keys"

    @property
    def table_dir(self):
        return self.data_dir / "tables"

    @property
    def report_dir(self):
        return self.data_dir / "reports"
