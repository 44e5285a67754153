"""
Hierarquia de exceções do motor Hermes.

Cada classe carrega o código de saída usado pela linha de comando.
"""


class HermesError(Exception):
    """Erro base do motor de tabelas cifradas."""

    exit_code = 1
    kind = "error"


class ParameterError(HermesError):
    """Parâmetros inválidos ou incompatíveis entre operandos."""

    exit_code = 13
    kind = "parameter"


class DomainError(ParameterError):
    """Polinômio no domínio errado (coeficientes vs. NTT)."""

    kind = "domain"


class ParamsMismatchError(ParameterError):
    """Objetos gerados sob conjuntos de parâmetros diferentes."""

    exit_code = 5
    kind = "params-mismatch"


class RangeError(HermesError):
    """Valor fora de Z_t."""

    exit_code = 3
    kind = "range"


class IngestError(RangeError):
    """Linha do CSV que não pode ser ingerida."""

    kind = "ingest"

    def __init__(self, message, row=None, value=None):
        super().__init__(message)
        self.row = row
        self.value = value


class CapacityError(HermesError):
    """Vetor empacotado sem slot livre (inserção além da capacidade)."""

    exit_code = 4
    kind = "capacity"


class SlotIndexError(HermesError):
    """Índice de slot inválido para a operação."""

    exit_code = 7
    kind = "index"


class MissingKeyError(HermesError):
    """Chave de rotação ausente para o passo pedido."""

    exit_code = 6
    kind = "missing-key"


class RefreshRequiredError(HermesError):
    """O orçamento de ruído cairia abaixo do piso de segurança."""

    exit_code = 8
    kind = "refresh-required"


class NotFoundError(HermesError):
    """Tabela, grupo ou arquivo de chaves inexistente."""

    exit_code = 9
    kind = "not-found"


class KeysExistError(HermesError):
    """Chaves já existem e --force não foi informado."""

    exit_code = 12
    kind = "keys-exist"


class ContainerError(HermesError):
    """Contêiner binário ilegível."""

    exit_code = 10
    kind = "container"


class BadMagicError(ContainerError):
    kind = "bad-magic"


class UnsupportedVersionError(ContainerError):
    kind = "bad-version"


class TruncatedContainerError(ContainerError):
    kind = "truncated"


class BenchAssertionError(HermesError):
    """Resultado de benchmark que viola a tendência ou o oráculo."""

    exit_code = 11
    kind = "bench"


class OracleDivergenceError(BenchAssertionError):
    """Estado decifrado diverge do oráculo em claro."""

    kind = "oracle-divergence"

    def __init__(self, message, seed=None, prefix=None):
        super().__init__(message)
        self.seed = seed
        self.prefix = prefix or []
