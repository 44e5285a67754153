"""
Relatório de benchmark: tempos medidos, razões calculadas e contagem de rotações.
"""

from datetime import datetime

from pydantic import BaseModel, Field, computed_field


def format_value(value):
    """Valor de uma linha key=value: NULL, true/false e floats com 3 casas."""
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


class BenchReport(BaseModel):
    """
    Resultado de uma suíte. `packed_*` é o caminho Hermes; `baseline_*` é o
    caminho de comparação (singular ou árvore de rotações, ver `baseline`).
    """

    suite: str
    dataset: str
    profile: str
    slot_count: int
    tuple_count: int = Field(ge=0)
    group_size: int | None = None
    op_count: int = Field(ge=0)
    baseline: str = "singular"
    packed_total_ms: float = Field(ge=0)
    baseline_total_ms: float | None = None
    insert_total_ms: float | None = None
    delete_total_ms: float | None = None
    packed_rotations: int | None = None
    baseline_rotations: int | None = None
    refreshes: int = 0
    oracle_equivalent: bool | None = None
    parallel: bool = False
    memory_mb: float | None = None
    samples_ms: list[float] = Field(default_factory=list)
    created_at: datetime = Field(default_factory=datetime.now)

    @computed_field
    @property
    def speedup(self) -> float | None:
        if self.baseline_total_ms is None or self.packed_total_ms <= 0:
            return None
        return self.baseline_total_ms / self.packed_total_ms

    @computed_field
    @property
    def packed_per_op_us(self) -> float | None:
        return self.packed_total_ms * 1000 / self.op_count if self.op_count else None

    @computed_field
    @property
    def baseline_per_op_us(self) -> float | None:
        if self.baseline_total_ms is None or not self.op_count:
            return None
        return self.baseline_total_ms * 1000 / self.op_count

    def to_record(self):
        """Campos na ordem estável das linhas key=value (sem as amostras brutas)."""
        data = self.model_dump(exclude={"samples_ms", "created_at"})
        order = [
            "suite", "dataset", "profile", "slot_count", "tuple_count", "group_size", "op_count",
            "baseline", "packed_total_ms", "baseline_total_ms", "speedup", "packed_per_op_us",
            "baseline_per_op_us", "insert_total_ms", "delete_total_ms", "packed_rotations",
            "baseline_rotations", "refreshes", "oracle_equivalent", "parallel", "memory_mb",
        ]
        return {key: data[key] for key in order}

    def to_record_line(self):
        return " ".join(f"{key}={format_value(value)}" for key, value in self.to_record().items())
