"""
Comandos da linha de comando, um módulo por área.
"""

import functools
import logging

import click

from src.services.errors import HermesError

logger = logging.getLogger(__name__)


def handle_errors(func):
    """
    Converte HermesError em mensagem no stderr, registro `error=<tipo>` no
    modo machine e o código de saída da classe.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HermesError as exc:
            ctx = click.get_current_context()
            app = ctx.obj
            logger.debug(f"Falha em {ctx.command.name}: {exc!r}")
            click.echo(f"Erro: {exc}", err=True)
            if app is not None and app.config.machine:
                click.echo(f"error={exc.kind}")
            ctx.exit(exc.exit_code)

    return wrapper
