"""
Comandos de consulta: soma agregada e leitura de um slot.
"""

import logging
import time

import click

from src.commands import handle_errors

logger = logging.getLogger(__name__)


@click.command("sum")
@click.argument("table")
@click.option("--group", type=int, default=None, help="Restringe a soma a um grupo.")
@click.option("--baseline", type=click.Choice(["rotate"]), default=None,
              help="Usa a árvore de rotações em vez do slot de soma.")
@click.option("--per-group", is_flag=True, help="Uma soma por grupo (GROUP BY id de grupo).")
@click.pass_obj
@handle_errors
def sum_command(app, table, group, baseline, per_group):
    """Soma cifrada da tabela (mod t); por padrão sem nenhuma rotação."""
    engine = app.engine
    catalog = app.catalog
    if group is not None:
        packs = [catalog.get_group(table, group)]
    else:
        packs = list(catalog.load_table(table).groups.values())
    t = app.params.plain_modulus

    if per_group:
        mark = engine.trace.mark()
        sums = engine.group_sum({pv.group_id: [pv] for pv in packs})
        rows = [
            {"table": table, "group": gid, "sum": engine.extract_sum(ct), "length": pv.length}
            for (gid, ct), pv in zip(sums.items(), sorted(packs, key=lambda p: p.group_id))
        ]
        app.emit_rows(rows, title=f"Soma por grupo de '{table}' (mod {t}), rotações = {engine.trace.rotations(mark)}")
        return

    if not packs:
        app.emit({"table": table, "groups": 0, "sum": 0, "rotations": 0, "plain_modulus": t})
        return

    mark = engine.trace.mark()
    start = time.perf_counter()
    total_ct = engine.global_sum(packs)
    if baseline == "rotate":
        folded = engine.rotate_baseline_sum(engine.mask_payload(total_ct))
        total = int(engine.decrypt_pack(folded)[0])
    else:
        total = engine.extract_sum(total_ct)
    elapsed_ms = (time.perf_counter() - start) * 1000

    app.emit({
        "table": table,
        "group": group,
        "groups": len(packs),
        "sum": total,
        "plain_modulus": t,
        "path": baseline or "aux-slot",
        "rotations": engine.trace.rotations(mark),
        "elapsed_ms": elapsed_ms,
    }, title=f"Soma de '{table}' (mod {t})")


@click.command("get")
@click.argument("table")
@click.argument("group", type=int)
@click.argument("slot", type=int)
@click.pass_obj
@handle_errors
def get(app, table, group, slot):
    """Decifra um único slot; fora de [0, n-1] imprime NULL."""
    pv = app.catalog.get_group(table, group)
    value = app.engine.decrypt_slot(pv, slot)
    if value is None:
        click.echo(f"Aviso: slot {slot} fora de [0, {app.params.slot_count - 1}]", err=True)
    if app.config.machine:
        click.echo(f"value={'NULL' if value is None else value}")
    else:
        click.echo("NULL" if value is None else str(value))
