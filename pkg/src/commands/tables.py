"""
Comandos de catálogo: ingestão de CSV, listagem, descrição e remoção de tabelas.
"""

import logging
import time

import click

from src.commands import handle_errors
from src.services.catalog_store import partition
from src.services.data_processor import DataProcessor, parse_scale
from src.services.errors import ParameterError

logger = logging.getLogger(__name__)

DEFAULT_GROUP_SIZE = 4096


@click.command("ingest")
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.argument("table")
@click.option("--group-size", type=int, default=None,
              help=f"Tuplas por grupo (padrão: min({DEFAULT_GROUP_SIZE}, n-1)).")
@click.option("--scale", default=None, help="Fator de escala k/d aplicado antes de truncar (ex. 1/24).")
@click.option("--reduce-mod-t", is_flag=True, help="Reduz módulo t valores fora de [0, t) em vez de falhar.")
@click.option("--replace", is_flag=True, help="Substitui a tabela se já existir.")
@click.pass_obj
@handle_errors
def ingest(app, csv_path, table, group_size, scale, reduce_mod_t, replace):
    """Cifra um CSV de uma coluna numérica como tabela empacotada."""
    params = app.params
    group_size = group_size or min(DEFAULT_GROUP_SIZE, params.capacity)
    if not 1 <= group_size <= params.capacity:
        raise ParameterError(f"Tamanho de grupo {group_size} fora de [1, {params.capacity}]")
    if app.catalog.exists(table) and not replace:
        raise ParameterError(f"Tabela '{table}' já existe; use --replace")

    processor = DataProcessor(params.plain_modulus, parse_scale(scale), reduce_mod_t)
    values = processor.load_csv(csv_path)
    groups = partition(values, group_size)

    engine = app.engine
    start = time.perf_counter()
    packs = [engine.pack_group(groups[gid], gid) for gid in sorted(groups)]
    elapsed_ms = (time.perf_counter() - start) * 1000
    app.catalog.create_table(table, group_size, packs, overwrite=replace)

    stats = processor.get_summary_stats()
    logger.info(f"Tabela '{table}': {len(values)} tuplas em {len(packs)} grupos")
    app.emit({
        "table": table,
        "tuples": len(values),
        "groups": len(packs),
        "group_size": group_size,
        "encrypt_total_ms": elapsed_ms,
        "encrypt_per_tuple_us": elapsed_ms * 1000 / len(values) if values else None,
        "sum_mod_t": stats["sum_mod_t"],
        "wrapped": processor.wrapped,
    }, title=f"Tabela '{table}' ingerida")


@click.command("tables")
@click.pass_obj
@handle_errors
def list_tables(app):
    """Lista as tabelas do catálogo."""
    rows = []
    for name in app.catalog.list_tables():
        manifest = app.catalog.manifest(name)
        rows.append({
            "table": name,
            "groups": len(manifest.groups),
            "tuples": manifest.total_length,
            "group_size": manifest.group_size,
            "generation": manifest.generation,
            "updated_at": manifest.updated_at.strftime("%Y-%m-%d %H:%M:%S"),
        })
    app.emit_rows(rows, title="Tabelas")


@click.command("describe")
@click.argument("table")
@click.argument("group", type=int, required=False)
@click.pass_obj
@handle_errors
def describe(app, table, group):
    """Descritor de cada grupo: soma, tamanho do contêiner e comprimento lógico."""
    manifest = app.catalog.manifest(table)
    ids = [group] if group is not None else [g.group_id for g in manifest.groups]
    click.echo(f"n = {app.params.slot_count} slots, capacidade = {app.params.capacity} valores + 1 slot de soma")
    for gid in ids:
        click.echo(app.catalog.describe(table, gid, app.engine))


@click.command("drop")
@click.argument("table")
@click.confirmation_option(prompt="Remover a tabela e todos os seus grupos?")
@click.pass_obj
@handle_errors
def drop(app, table):
    """Remove uma tabela do catálogo."""
    app.catalog.drop_table(table)
    app.emit({"table": table, "dropped": True})
