"""
Módulo para ingestão de tabelas de um atributo a partir de CSV.
"""

import logging
import math
import os
from datetime import datetime
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from src.services.errors import IngestError, NotFoundError, ParameterError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parents[2] / "data"
BUNDLED_DATASETS = {
    "covid19": "covid19.csv",
    "bitcoin": "bitcoin.csv",
}
# hg38 é sintetizado: 34.424 valores uniformes em [0, 10^4)
HG38_TUPLES = 34424
HG38_HIGH = 10_000


def parse_scale(text):
    """
    Converte "k/d" (ou "k") em Fraction positiva.

    Raises:
        ParameterError: Se a escala for inválida ou não positiva.
    """
    if text is None:
        return Fraction(1)
    try:
        scale = Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"Escala inválida: {text!r} (use k/d, ex. 1/24)") from None
    if scale <= 0:
        raise ParameterError(f"Escala deve ser positiva: {text!r}")
    return scale


def synthesize_uniform(count, high, seed=None):
    """Valores inteiros uniformes em [0, high)."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, high, size=count).tolist()


class DataProcessor:
    """
    Carrega uma coluna numérica, aplica a escala e valida contra Z_t.
    """

    def __init__(self, plain_modulus, scale=Fraction(1), reduce_mod_t=False):
        """
        Inicializa o processador.

        Args:
            plain_modulus (int): Módulo de texto t.
            scale (Fraction): Fator de escala aplicado antes do arredondamento para baixo.
            reduce_mod_t (bool): Se True, valores fora de [0, t) são reduzidos módulo t.
        """
        self.plain_modulus = plain_modulus
        self.scale = scale
        self.reduce_mod_t = reduce_mod_t
        self.data = None
        self.raw_sum = None
        self.metadata = None
        self.file_path = None
        self.wrapped = 0

    def load_csv(self, file_path):
        """
        Lê um CSV de uma coluna, com cabeçalho opcional.

        Args:
            file_path (str): Caminho do arquivo.

        Returns:
            list: Valores inteiros em [0, t).

        Raises:
            NotFoundError: Arquivo inexistente.
            IngestError: Célula não numérica ou valor fora de Z_t sem --reduce-mod-t.
        """
        if not os.path.exists(file_path):
            raise NotFoundError(f"Arquivo CSV não encontrado: {file_path}")
        self.file_path = file_path
        try:
            frame = pd.read_csv(file_path, header=None, dtype=str, skip_blank_lines=True, encoding="utf-8")
        except pd.errors.EmptyDataError:
            frame = pd.DataFrame({0: pd.Series([], dtype=str)})
        if frame.shape[1] != 1:
            raise IngestError(f"Esperada uma única coluna numérica, encontradas {frame.shape[1]}")
        column = frame.iloc[:, 0].str.strip()
        first_line = 1
        # Cabeçalho: primeira célula não numérica
        if len(column) and pd.isna(pd.to_numeric(column.iloc[:1], errors="coerce")).all():
            column = column.iloc[1:]
            first_line = 2
        return self.load_values(column.tolist(), first_line=first_line)

    def load_values(self, cells, first_line=1, name=None):
        """Valida células já lidas (texto ou números); `first_line` numera as linhas nas mensagens."""
        t = self.plain_modulus
        values, raw_total, self.wrapped = [], 0, 0
        for row, cell in enumerate(cells, start=first_line):
            try:
                number = Fraction(str(cell).strip())
            except (ValueError, ZeroDivisionError):
                raise IngestError(f"Linha {row}: valor não numérico {cell!r}", row=row, value=cell) from None
            value = math.floor(number * self.scale)
            raw_total += value
            if not 0 <= value < t:
                if not self.reduce_mod_t:
                    raise IngestError(
                        f"Linha {row}: valor {value} fora de [0, {t}); use --reduce-mod-t ou outra escala",
                        row=row,
                        value=value,
                    )
                self.wrapped += 1
                value %= t
            values.append(value)
        if self.wrapped:
            logger.warning(f"{self.wrapped} valores reduzidos módulo t={t}: as somas passam a ser mod t")
        self.data = pd.Series(values, dtype="int64", name=name or "value")
        self.raw_sum = raw_total
        self.extract_metadata()
        return values

    def extract_metadata(self):
        """
        Extrai metadados dos dados carregados.
        """
        if self.data is None:
            self.metadata = None
            return
        self.metadata = {
            "rows": len(self.data),
            "file_name": os.path.basename(self.file_path) if self.file_path else None,
            "scale": str(self.scale),
            "wrapped": self.wrapped,
            "load_time": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        }

    def get_metadata(self):
        return self.metadata

    def get_summary_stats(self):
        """
        Estatísticas da coluna ingerida, incluindo a soma mod t esperada.

        Returns:
            dict: Estatísticas ou None se não houver dados carregados.
        """
        if self.data is None:
            return None
        empty = self.data.empty
        return {
            "rows": int(len(self.data)),
            "min": None if empty else int(self.data.min()),
            "max": None if empty else int(self.data.max()),
            "sum": int(self.raw_sum),
            "sum_mod_t": int(self.data.sum()) % self.plain_modulus,
        }


def load_dataset(dataset, plain_modulus, scale=Fraction(1), reduce_mod_t=False, seed=None):
    """
    Resolve um conjunto de dados: caminho de CSV, nome embutido ou "hg38" (sintético).

    Returns:
        tuple: (nome, lista de valores)
    """
    processor = DataProcessor(plain_modulus, scale, reduce_mod_t)
    if dataset == "hg38":
        values = synthesize_uniform(HG38_TUPLES, HG38_HIGH, seed)
        return dataset, processor.load_values(values, name=dataset)
    if dataset in BUNDLED_DATASETS:
        return dataset, processor.load_csv(DATA_DIR / BUNDLED_DATASETS[dataset])
    path = Path(dataset)
    return path.stem, processor.load_csv(path)
