"""
Comando de benchmark: executa uma suíte e emite os relatórios.
"""

import logging
from datetime import datetime

import click

from src.commands import handle_errors
from src.services import bench_harness
from src.services.data_processor import load_dataset, parse_scale
from src.services.errors import ParameterError
from src.services.report_writer import write_csv, write_excel

logger = logging.getLogger(__name__)

SUITES = ("encrypt", "insert", "delete", "aggregate", "sweep", "fuzz")


def _parse_sizes(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ParameterError(f"Lista de tamanhos inválida: {text!r}") from None


@click.command("bench")
@click.argument("suite", type=click.Choice(SUITES))
@click.argument("dataset", required=False, default="covid19")
@click.option("--group-size", type=int, default=None, help="Tuplas por grupo (padrão: min(4096, n-1)).")
@click.option("--group-sizes", default=None, help="Tamanhos da varredura, ex. 128,256,512.")
@click.option("--ops", type=int, default=bench_harness.DEFAULT_OPS, show_default=True,
              help="Operações por modo (insert/delete/sweep/fuzz).")
@click.option("--repeats", type=int, default=3, show_default=True, help="Repetições por ponto da varredura.")
@click.option("--scale", default=None, help="Fator de escala k/d para o conjunto de dados.")
@click.option("--reduce-mod-t", is_flag=True, help="Reduz módulo t valores fora de [0, t).")
@click.option("--singular-limit", type=int, default=None,
              help="Mede só essa quantidade de cifragens singulares e projeta o total.")
@click.option("--parallel", is_flag=True, help="Cifra grupos em paralelo (relatório marcado como paralelo).")
@click.option("--strict/--no-strict", default=True, show_default=True,
              help="Falha se a varredura crescer ou se um piso de aceitação (n >= 4096) não for atingido.")
@click.option("--report-csv", type=click.Path(dir_okay=False), default=None, help="Grava o relatório em CSV.")
@click.option("--report-xlsx", type=click.Path(dir_okay=False), default=None, help="Grava o relatório em Excel.")
@click.option("--progress", is_flag=True, help="Mostra barras de progresso no stderr.")
@click.pass_obj
@handle_errors
def bench(app, suite, dataset, group_size, group_sizes, ops, repeats, scale, reduce_mod_t,
          singular_limit, parallel, strict, report_csv, report_xlsx, progress):
    """
    Executa SUITE (encrypt|insert|delete|aggregate|sweep|fuzz) sobre DATASET:
    um CSV ou um nome embutido (covid19, bitcoin, hg38).
    """
    engine = app.engine
    params = app.params
    seed = app.config.seed if app.config.seed is not None else 0
    group_size = group_size or min(4096, params.capacity)
    common = {"profile": app.profile_name}

    if suite == "fuzz":
        result = bench_harness.oracle_fuzz(engine, seed, ops)
        app.emit({"suite": "fuzz", "seed": seed, "ops": len(result.executed), "passed": result.passed})
        result.raise_for_failure()
        return

    name, values = load_dataset(dataset, params.plain_modulus, parse_scale(scale), reduce_mod_t, seed)
    common["dataset"] = name
    if suite == "encrypt":
        reports = [bench_harness.run_encrypt_bench(
            engine, values, group_size, singular_limit=singular_limit, parallel=parallel, progress=progress, **common)]
    elif suite == "insert":
        reports = [bench_harness.run_insert_bench(engine, values, group_size, ops, seed, progress=progress, **common)]
    elif suite == "delete":
        reports = [bench_harness.run_delete_bench(engine, values, group_size, ops, seed, progress=progress, **common)]
    elif suite == "aggregate":
        reports = [bench_harness.run_aggregation_bench(engine, values, group_size, **common)]
    else:
        sizes = _parse_sizes(group_sizes) if group_sizes else [
            s for s in bench_harness.SWEEP_SIZES if s <= params.capacity
        ]
        reports = bench_harness.run_group_size_sweep(
            engine, values, sizes, ops, repeats, seed, strict=strict, progress=progress, **common)

    if app.config.machine:
        for report in reports:
            click.echo(report.to_record_line())
    else:
        app.emit_rows([r.to_record() for r in reports], title=f"Benchmark {suite} ({name})")

    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    if report_csv:
        write_csv(reports, report_csv)
        logger.info(f"Relatório CSV gravado em {report_csv}")
    if report_xlsx:
        write_excel(reports, report_xlsx)
        logger.info(f"Relatório Excel gravado em {report_xlsx}")
    if not report_csv and not report_xlsx:
        default_path = app.config.report_dir / f"bench_{suite}_{stamp}.csv"
        write_csv(reports, str(default_path))
        logger.info(f"Relatório CSV gravado em {default_path}")

    if strict:
        for label, measured in bench_harness.check_floors(reports).items():
            logger.info(f"Piso atingido em {label}: {measured:.2f}x")
