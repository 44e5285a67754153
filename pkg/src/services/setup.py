"""
Módulo para criar os diretórios de dados do motor.
"""

import os


def setup_directories(data_dir):
    """
    Cria os diretórios necessários sob o diretório de dados.

    Args:
        data_dir (str): Diretório base (HERMES_DATA_DIR).

    Returns:
        dict: Caminhos criados, por nome.
    """
    directories = {
        "keys": os.path.join(data_dir, "keys"),
        "tables": os.path.join(data_dir, "tables"),
        "reports": os.path.join(data_dir, "reports"),
    }

    for directory in directories.values():
        os.makedirs(directory, exist_ok=True)

    return directories
