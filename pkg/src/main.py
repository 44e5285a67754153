"""
Ponto de entrada da linha de comando `hermes`.
"""

import logging
import os
import sys

import click
from dotenv import load_dotenv
from pydantic import ValidationError

# Carregar variáveis de ambiente do arquivo .env, se existir
load_dotenv()

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from src.commands.bench import bench  # noqa: E402
from src.commands.context import AppContext  # noqa: E402
from src.commands.keys import keygen  # noqa: E402
from src.commands.query import get, sum_command  # noqa: E402
from src.commands.tables import describe, drop, ingest, list_tables  # noqa: E402
from src.commands.update import delete, insert  # noqa: E402
from src.models.config import DEFAULT_DATA_DIR, DEFAULT_PROFILE, OUTPUT_FORMATS, PROFILES, CliConfig  # noqa: E402

logger = logging.getLogger(__name__)


@click.group()
@click.option("--data-dir", envvar="HERMES_DATA_DIR", default=DEFAULT_DATA_DIR, show_default=True,
              type=click.Path(file_okay=False), help="Diretório de chaves, tabelas e relatórios.")
@click.option("--profile", envvar="HERMES_PROFILE", default=DEFAULT_PROFILE, show_default=True,
              type=click.Choice(sorted(PROFILES)), help="Perfil de parâmetros usado pelo keygen.")
@click.option("--seed", envvar="HERMES_SEED", type=int, default=None,
              help="Semente do modo de teste determinístico.")
@click.option("--output", envvar="HERMES_OUTPUT", default="human", show_default=True,
              type=click.Choice(OUTPUT_FORMATS), help="human (tabelas) ou machine (linhas key=value).")
@click.option("--log-level", envvar="HERMES_LOG_LEVEL", default="WARNING", show_default=True,
              help="Nível de log no stderr.")
@click.pass_context
def cli(ctx, data_dir, profile, seed, output, log_level):
    """Hermes: tabelas cifradas com BFV empacotado e soma sem rotações."""
    try:
        config = CliConfig(data_dir=data_dir, profile=profile, seed=seed, output=output, log_level=log_level)
    except ValidationError as exc:
        raise click.UsageError(str(exc)) from None

    # Configurar logging no stderr: stdout fica só com os resultados
    logging.basicConfig(
        level=getattr(logging, config.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )
    logger.debug(f"Configuração: {config.model_dump()}")
    ctx.obj = AppContext(config)


cli.add_command(keygen)
cli.add_command(ingest)
cli.add_command(insert)
cli.add_command(delete)
cli.add_command(sum_command)
cli.add_command(get)
cli.add_command(describe)
cli.add_command(list_tables)
cli.add_command(drop)
cli.add_command(bench)


def main():
    cli(prog_name="hermes")


if __name__ == "__main__":
    main()
