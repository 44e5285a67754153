"""
Comandos de atualização: inserção e remoção de slots num grupo.
"""

import logging

import click

from src.commands import handle_errors
from src.services.errors import SlotIndexError
from src.services.hermes_pack import InsertMode, Op

logger = logging.getLogger(__name__)


def _trace_record(engine, mark):
    counts = engine.trace.counts(mark)
    return {
        "rotations": counts[Op.ROTATE],
        "mask_mults": counts[Op.MULT_PLAIN],
        "encryptions": counts[Op.ENCRYPT],
    }


@click.command("insert")
@click.argument("table")
@click.argument("group", type=int)
@click.argument("position", nargs=-1, type=int, required=True)
@click.option("--append", "append_mode", is_flag=True, help="Acrescenta no fim: informe apenas VALUE.")
@click.option("--mode", type=click.Choice([m.value for m in InsertMode]), default=InsertMode.PLAIN.value,
              help="Como o valor entra: soma em claro ou cifra nova.")
@click.option("--verbose", is_flag=True, help="Mostra as contagens de operações homomórficas.")
@click.pass_obj
@handle_errors
def insert(app, table, group, position, append_mode, mode, verbose):
    """
    Insere VALUE na posição INDEX do grupo: TABLE GROUP INDEX VALUE,
    ou TABLE GROUP VALUE com --append.
    """
    expected = 1 if append_mode else 2
    if len(position) != expected:
        raise click.UsageError("Use TABLE GROUP INDEX VALUE, ou TABLE GROUP VALUE com --append")
    engine = app.engine
    pv = app.catalog.get_group(table, group)
    refreshes = engine.refresh_count
    mark = engine.trace.mark()
    if append_mode:
        index, value = pv.length, position[0]
        updated = engine.append(pv, value)
    else:
        index, value = position
        updated = engine.insert_at(pv, index, value, InsertMode(mode))
    app.catalog.put_group(table, updated)

    record = {
        "table": table,
        "group": group,
        "index": index,
        "length": updated.length,
        "capacity": updated.capacity,
        "refreshed": engine.refresh_count > refreshes,
        "budget_bits": engine.estimated_budget(updated),
    }
    if verbose:
        record.update(_trace_record(engine, mark))
    app.emit(record, title=f"Valor inserido em {table}/{group}")


@click.command("delete")
@click.argument("table")
@click.argument("group", type=int)
@click.argument("index", type=int)
@click.option("--verbose", is_flag=True, help="Mostra as contagens de operações homomórficas.")
@click.pass_obj
@handle_errors
def delete(app, table, group, index, verbose):
    """Remove o slot INDEX do grupo; o valor removido é obtido decifrando o slot."""
    engine = app.engine
    pv = app.catalog.get_group(table, group)
    if pv.is_inert:
        removed = None
        updated = pv
        logger.info(f"Grupo {table}/{group} vazio: remoção ignorada")
    else:
        if not 0 <= index < pv.length:
            raise SlotIndexError(f"Índice {index} fora de [0, {pv.length})")
        removed = engine.decrypt_slot(pv, index)
        refreshes = engine.refresh_count
        mark = engine.trace.mark()
        updated = engine.delete_at(pv, index, removed)
        app.catalog.put_group(table, updated)

    record = {
        "table": table,
        "group": group,
        "index": index,
        "removed": removed,
        "length": updated.length,
        "budget_bits": engine.estimated_budget(updated),
    }
    if verbose and removed is not None:
        record["refreshed"] = engine.refresh_count > refreshes
        record.update(_trace_record(engine, mark))
    app.emit(record, title=f"Slot removido de {table}/{group}")
