"""
Comando de geração de chaves.
"""

import logging
import time
from pathlib import Path

import click

from src.commands import handle_errors
from src.models.config import PROFILES, SUPPORTED_PLAIN_MODULI, get_profile
from src.services.bfv import BfvContext, default_rotation_steps
from src.services.catalog_store import KeyBundle, keys_exist, save_keys
from src.services.errors import KeysExistError, ParameterError

logger = logging.getLogger(__name__)


def parse_steps(text):
    """Converte "1,-1,4" em lista de inteiros."""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ParameterError(f"Lista de passos inválida: {text!r}") from None


@click.command("keygen")
@click.option("--profile", "profile_name", type=click.Choice(sorted(PROFILES)), default=None,
              help="Perfil de parâmetros (padrão: opção global --profile).")
@click.option("--plain-modulus", type=int, default=None,
              help=f"Substitui t; valores suportados: {', '.join(map(str, SUPPORTED_PLAIN_MODULI))}.")
@click.option("--steps", default=None, help="Passos de rotação separados por vírgula (padrão: ±1 e ±2^j).")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Diretório das chaves.")
@click.option("--force", is_flag=True, help="Sobrescreve chaves existentes.")
@click.pass_obj
@handle_errors
def keygen(app, profile_name, plain_modulus, steps, out_dir, force):
    """Gera parâmetros, chave secreta, chave pública e chaves de rotação."""
    profile = get_profile(profile_name or app.config.profile)
    if plain_modulus is not None and plain_modulus != profile.plain_modulus and plain_modulus not in SUPPORTED_PLAIN_MODULI:
        raise ParameterError(f"t={plain_modulus} não suportado; use {SUPPORTED_PLAIN_MODULI}")
    key_dir = Path(out_dir) if out_dir else app.config.key_dir
    if keys_exist(key_dir) and not force:
        raise KeysExistError(f"Já existem chaves em {key_dir}; use --force para sobrescrever")

    start = time.perf_counter()
    params = profile.build(plain_modulus)
    context = BfvContext(params, seed=app.config.seed)
    sk, pk = context.keygen()
    rotation_steps = parse_steps(steps) if steps else default_rotation_steps(params.slot_count)
    galois = context.gen_rotation_keys(sk, rotation_steps)
    save_keys(KeyBundle(params, sk, pk, galois, profile.name), key_dir)
    elapsed = time.perf_counter() - start
    logger.info(f"Chaves do perfil {profile.name} gravadas em {key_dir} em {elapsed:.2f}s")

    app.emit({
        "profile": profile.name,
        "degree": params.degree,
        "slots": params.slot_count,
        "capacity": params.capacity,
        "plain_modulus": params.plain_modulus,
        "primes": params.basis.size,
        "log2_q": round(params.log_modulus, 2),
        "rotation_keys": len(galois.steps),
        "params_id": params.params_id.hex()[:16],
        "key_dir": str(key_dir),
        "elapsed_s": elapsed,
    }, title="Chaves geradas (secret.key é sensível: não compartilhe)")
