"""
Estado compartilhado pelos comandos: configuração, chaves, motor e catálogo.
"""

import logging
from functools import cached_property

import click
import pandas as pd

from src.models.bench import format_value
from src.services.bfv import BfvContext
from src.services.catalog_store import CatalogStore, load_keys
from src.services.hermes_pack import HermesEngine
from src.services.setup import setup_directories

logger = logging.getLogger(__name__)


class AppContext:
    """
    Carrega sob demanda o que cada comando precisa; keygen não toca nas chaves
    antigas e os demais comandos nunca geram chaves.
    """

    def __init__(self, config):
        self.config = config
        setup_directories(str(config.data_dir))

    @cached_property
    def bundle(self):
        return load_keys(self.config.key_dir)

    @property
    def params(self):
        return self.bundle.params

    @property
    def profile_name(self):
        return self.bundle.profile or "custom"

    @cached_property
    def context(self):
        return BfvContext(self.params, seed=self.config.seed)

    @cached_property
    def engine(self):
        bundle = self.bundle
        return HermesEngine(
            self.context,
            bundle.public_key,
            galois_keys=bundle.galois_keys,
            secret_key=bundle.secret_key,
        )

    @cached_property
    def catalog(self):
        return CatalogStore(self.config.table_dir, self.params)

    # -------------------------------------------------------------- output

    def emit(self, record, title=None):
        """Um registro: linhas key=value no modo machine, tabela chave/valor no modo human."""
        if self.config.machine:
            for key, value in record.items():
                click.echo(f"{key}={format_value(value)}")
            return
        if title:
            click.echo(title)
        series = pd.Series({key: format_value(value) for key, value in record.items()}, dtype=object)
        click.echo(series.to_string())

    def emit_rows(self, rows, title=None):
        """Vários registros: uma linha key=value por registro, ou uma tabela."""
        if self.config.machine:
            for row in rows:
                click.echo(" ".join(f"{key}={format_value(value)}" for key, value in row.items()))
            return
        if title:
            click.echo(title)
        if not rows:
            click.echo("(vazio)")
            return
        frame = pd.DataFrame([{k: format_value(v) for k, v in row.items()} for row in rows])
        click.echo(frame.to_string(index=False))
