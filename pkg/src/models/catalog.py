"""
Manifesto de tabela cifrada: o ponto de commit do catálogo.
"""

import re
from datetime import datetime

from pydantic import BaseModel, Field, field_validator, model_validator

MANIFEST_VERSION = 1
TABLE_NAME = re.compile(r"^[A-Za-z0-9_\-]{1,64}$")


class GroupRecord(BaseModel):
    """Estado persistido de um grupo: comprimento lógico e posição do contêiner no arquivo de dados."""

    group_id: int = Field(ge=0)
    length: int = Field(ge=0)
    offset: int = Field(ge=0)
    size: int = Field(gt=0)


class TableManifest(BaseModel):
    format_version: int = MANIFEST_VERSION
    table: str
    params_id: str
    group_size: int = Field(gt=0)
    slot_count: int = Field(gt=1)
    generation: int = Field(default=0, ge=0)
    data_file: str
    tuple_count: int = Field(default=0, ge=0)
    created_at: datetime = Field(default_factory=datetime.now)
    updated_at: datetime = Field(default_factory=datetime.now)
    groups: list[GroupRecord] = Field(default_factory=list)

    @field_validator("table")
    @classmethod
    def _valid_name(cls, value):
        if not TABLE_NAME.match(value):
            raise ValueError(f"nome de tabela inválido: {value!r}")
        return value

    @model_validator(mode="after")
    def _valid_groups(self):
        ids = [g.group_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ValueError("ids de grupo repetidos")
        if ids != sorted(ids):
            raise ValueError("grupos fora de ordem")
        if self.group_size > self.slot_count - 1:
            raise ValueError(f"tamanho de grupo {self.group_size} excede n-1 = {self.slot_count - 1}")
        for group in self.groups:
            if group.length > self.slot_count - 1:
                raise ValueError(f"grupo {group.group_id} com L={group.length} acima da capacidade")
        return self

    def group(self, group_id):
        return next((g for g in self.groups if g.group_id == group_id), None)

    @property
    def total_length(self):
        return sum(g.length for g in self.groups)
