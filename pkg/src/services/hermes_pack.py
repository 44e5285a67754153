"""
Vetores empacotados com slot de soma local e atualizações homomórficas.

Cada grupo de tuplas vira uma única cifra com n slots: os slots 0..n-2
guardam os valores e o slot n-1 guarda a soma σ (mod t) dos L primeiros.
Inserção e remoção deslocam o conteúdo com máscara, rotação e soma, e a
agregação global é uma soma de cifras sem nenhuma rotação.
"""

import enum
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from src.services.bfv import Ciphertext, log2_sum, power_of_two_steps
from src.services.errors import (
    CapacityError,
    HermesError,
    MissingKeyError,
    ParameterError,
    RangeError,
    RefreshRequiredError,
    SlotIndexError,
)

logger = logging.getLogger(__name__)

DEFAULT_REFRESH_FLOOR_BITS = 10.0


class InsertMode(str, enum.Enum):
    PLAIN = "plain"
    ENCRYPTED = "encrypted"


class Op(str, enum.Enum):
    """Tipos de operação homomórfica registrados pelo OpTrace."""

    ENCRYPT = "encrypt"
    MULT_PLAIN = "mult_plain"
    ROTATE = "rotate"
    ADD = "add"
    SUB = "sub"
    ADD_PLAIN = "add_plain"
    SUB_PLAIN = "sub_plain"


class OpTrace:
    """
    Registro sequencial das operações homomórficas executadas pelo motor.

    Usado para contar rotações na agregação e para verificar que a
    sequência de operações de uma inserção não depende do índice.
    """

    def __init__(self):
        self.ops = []

    def record(self, op):
        self.ops.append(Op(op))

    def mark(self):
        return len(self.ops)

    def since(self, mark):
        return list(self.ops[mark:])

    def counts(self, mark=0):
        return Counter(self.ops[mark:])

    def rotations(self, mark=0):
        return self.counts(mark)[Op.ROTATE]

    def truncate(self, mark):
        """Descarta as operações registradas depois de `mark`."""
        del self.ops[mark:]

    def reset(self):
        self.ops.clear()

    def __len__(self):
        return len(self.ops)


@dataclass(frozen=True, eq=False)
class PackedVector:
    """
    Representação empacotada de um grupo: cifra, id do grupo e comprimento lógico.

    `has_aux` é False apenas nos pacotes da linha de base (n valores, sem σ).
    """

    ct: Ciphertext
    group_id: int
    length: int
    slot_count: int
    has_aux: bool = True

    @property
    def capacity(self):
        return self.slot_count - 1 if self.has_aux else self.slot_count

    @property
    def aux_slot(self):
        return self.slot_count - 1

    @property
    def is_inert(self):
        return self.length == 0

    def with_ct(self, ct, length=None):
        return PackedVector(ct, self.group_id, self.length if length is None else length, self.slot_count, self.has_aux)


@dataclass(frozen=True)
class SlotMask:
    """
    Vetores em claro de uma atualização: máscara de prefixo (com o slot n-1),
    máscara de sufixo, vetor de valor e máscara de zeragem z.

    O motor aplica as máscaras antes de rotacionar, então o slot que sai do
    sufixo já chega zerado e `zeroing` não é multiplicado em nenhuma cifra.
    Ele fica aqui para quem rotaciona primeiro e mascara depois: nesse caso
    a remoção precisa zerar o slot L-1, e `zeroing` é essa máscara.
    """

    keep: np.ndarray
    suffix: np.ndarray
    value: np.ndarray
    zeroing: np.ndarray

    def __post_init__(self):
        if np.any(self.keep & self.suffix):
            raise ParameterError("Máscaras de prefixo e sufixo se sobrepõem")
        if self.suffix[-1] or not self.keep[-1]:
            raise ParameterError("Somente a máscara de prefixo pode selecionar o slot de soma")

    @staticmethod
    def _range(n, start, stop):
        mask = np.zeros(n, dtype=np.int64)
        mask[start:stop] = 1
        return mask

    @classmethod
    def _build(cls, n, keep_until, suffix_start, suffix_stop, value_slots, zero_slot, modulus):
        keep = cls._range(n, 0, keep_until)
        keep[n - 1] = 1
        value = np.zeros(n, dtype=np.int64)
        for slot, v in value_slots:
            value[slot] = v % modulus
        zeroing = np.ones(n, dtype=np.int64)
        if zero_slot is not None:
            zeroing[zero_slot] = 0
        return cls(keep, cls._range(n, suffix_start, suffix_stop), value, zeroing)

    @classmethod
    def for_insert(cls, n, length, index, value, modulus):
        """Máscaras para inserir `value` em `index` num pacote de comprimento `length`."""
        return cls._build(n, index, index, length, [(index, value), (n - 1, value)], None, modulus)

    @classmethod
    def for_delete(cls, n, length, index, value, modulus):
        """Máscaras para remover o slot `index`; `value` é o v_del retirado de σ."""
        return cls._build(n, index, index + 1, length, [(n - 1, value)], length - 1, modulus)


class HermesEngine:
    """
    Motor de empacotamento e atualização sobre um BfvContext.

    As operações nunca alteram o PackedVector recebido: devolvem um novo.
    A chave secreta é opcional e só é exigida por decifragem e refresh.
    """

    def __init__(
        self,
        context,
        public_key,
        galois_keys=None,
        secret_key=None,
        refresh_floor_bits=DEFAULT_REFRESH_FLOOR_BITS,
        auto_refresh=True,
        trace=None,
    ):
        """
        Inicializa o motor.

        Args:
            context (BfvContext): Contexto BFV.
            public_key (PublicKey): Chave pública usada em toda cifragem.
            galois_keys (GaloisKeySet): Chaves de rotação (necessárias para insert/delete).
            secret_key (SecretKey): Chave secreta, se disponível localmente.
            refresh_floor_bits (float): Orçamento mínimo após uma atualização; None desliga a checagem.
            auto_refresh (bool): Se False, atualizações abaixo do piso falham com RefreshRequiredError.
            trace (OpTrace): Registro de operações (um novo é criado se omitido).
        """
        self.context = context
        self.params = context.params
        self.public_key = public_key
        self.galois_keys = galois_keys
        self.secret_key = secret_key
        self.refresh_floor_bits = refresh_floor_bits
        self.auto_refresh = auto_refresh
        self.trace = trace if trace is not None else OpTrace()
        self.refresh_count = 0

    @property
    def slot_count(self):
        return self.params.slot_count

    @property
    def capacity(self):
        return self.params.capacity

    # ------------------------------------------------------ traced wrappers

    def _encode(self, slots):
        return self.context.encode_slots(slots)

    def _encrypt_slots(self, slots, seed=None):
        self.trace.record(Op.ENCRYPT)
        return self.context.encrypt(self.public_key, self._encode(slots), seed=seed)

    def _mult_plain(self, ct, mask):
        self.trace.record(Op.MULT_PLAIN)
        return self.context.eval_mult_plain(ct, self._encode(mask))

    def _rotate(self, ct, step):
        if self.galois_keys is None:
            raise MissingKeyError("Chaves de rotação não carregadas")
        self.trace.record(Op.ROTATE)
        return self.context.eval_rotate(ct, step, self.galois_keys)

    def _add(self, a, b):
        self.trace.record(Op.ADD)
        return self.context.eval_add(a, b)

    def _add_plain(self, ct, slots):
        self.trace.record(Op.ADD_PLAIN)
        return self.context.eval_add_plain(ct, self._encode(slots))

    def _sub_plain(self, ct, slots):
        self.trace.record(Op.SUB_PLAIN)
        return self.context.eval_sub_plain(ct, self._encode(slots))

    def _require_secret(self, secret_key):
        key = secret_key if secret_key is not None else self.secret_key
        if key is None:
            raise MissingKeyError("Chave secreta indisponível")
        return key

    def _check_value(self, value):
        t = self.params.plain_modulus
        if not 0 <= int(value) < t:
            raise RangeError(f"Valor {value} fora de [0, {t})")
        return int(value)

    def _check_values(self, values):
        values = [int(v) for v in values]
        t = self.params.plain_modulus
        bad = next((i for i, v in enumerate(values) if not 0 <= v < t), None)
        if bad is not None:
            raise RangeError(f"Valor {values[bad]} (posição {bad}) fora de [0, {t})")
        return values

    # ------------------------------------------------------------- packing

    def pack_group(self, values, group_id=0, seed=None):
        """
        Empacota até n-1 valores com a soma no slot n-1 (uma única cifragem).

        `seed` fixa a aleatoriedade da cifragem (usado na cifragem paralela).

        Raises:
            CapacityError: Mais de n-1 valores.
            RangeError: Algum valor ≥ t.
        """
        values = list(values)
        n = self.slot_count
        if len(values) > n - 1:
            raise CapacityError(f"{len(values)} valores excedem a capacidade {n - 1} do pacote")
        values = self._check_values(values)
        slots = np.zeros(n, dtype=np.int64)
        slots[:len(values)] = values
        slots[n - 1] = sum(values) % self.params.plain_modulus
        return PackedVector(self._encrypt_slots(slots, seed), int(group_id), len(values), n)

    def pack_plain(self, values, group_id=0):
        """Pacote da linha de base: até n valores, sem slot de soma."""
        values = list(values)
        n = self.slot_count
        if len(values) > n:
            raise CapacityError(f"{len(values)} valores excedem os {n} slots")
        values = self._check_values(values)
        slots = np.zeros(n, dtype=np.int64)
        slots[:len(values)] = values
        return PackedVector(self._encrypt_slots(slots), int(group_id), len(values), n, has_aux=False)

    def encrypt_singular(self, value):
        """Cifra um único valor no slot 0 (modo singular, uma cifra por tupla)."""
        value = self._check_value(value)
        slots = np.zeros(self.slot_count, dtype=np.int64)
        slots[0] = value
        return self._encrypt_slots(slots)

    # ------------------------------------------------------------- updates

    def _predicted_noise(self, pv, masked, mode=InsertMode.PLAIN):
        ctx = self.context
        if not masked:
            return log2_sum(pv.ct.noise_log2, ctx.plain_add_noise_log2)
        # keep e suffix: cada um cresce no máximo N·⌊t/2⌋; o sufixo ainda passa pela troca de chave
        masked_noise = pv.ct.noise_log2 + ctx.mult_plain_growth_log2 + 1
        delta = ctx.fresh_noise_log2 if mode is InsertMode.ENCRYPTED else ctx.plain_add_noise_log2
        return log2_sum(masked_noise, ctx.keyswitch_noise_log2, delta)

    def _ensure_budget(self, pv, masked, mode=InsertMode.PLAIN):
        if self.refresh_floor_bits is None:
            return pv
        predicted = self.context.budget_from_noise(self._predicted_noise(pv, masked, mode))
        if predicted >= self.refresh_floor_bits:
            return pv
        if not self.auto_refresh or self.secret_key is None:
            raise RefreshRequiredError(
                f"Orçamento previsto {predicted:.1f} bits abaixo do piso de {self.refresh_floor_bits} bits"
            )
        logger.warning(f"Refresh automático do grupo {pv.group_id}: orçamento previsto {predicted:.1f} bits")
        pv = self.refresh(pv)
        predicted = self.context.budget_from_noise(self._predicted_noise(pv, masked, mode))
        if predicted < self.refresh_floor_bits:
            raise RefreshRequiredError(
                f"Parâmetros sem folga para uma atualização: {predicted:.1f} bits mesmo após refresh"
            )
        return pv

    def _require_aux(self, pv):
        if not pv.has_aux:
            raise ParameterError("Atualizações exigem pacote com slot de soma")

    def insert_at(self, pv, index, value, mode=InsertMode.PLAIN):
        """
        Insere `value` no slot `index`, deslocando os slots index..L-1 uma posição.

        A sequência de operações homomórficas é a mesma para qualquer índice.

        Args:
            pv (PackedVector): Pacote atual.
            index (int): Posição em [0, L].
            value (int): Valor em [0, t).
            mode (InsertMode): PLAIN soma δ em claro; ENCRYPTED cifra δ e soma cifras.

        Returns:
            PackedVector: Pacote com L+1 valores e σ+value.
        """
        self._require_aux(pv)
        mode = InsertMode(mode)
        n = pv.slot_count
        if pv.length >= n - 1:
            raise CapacityError(f"Pacote do grupo {pv.group_id} cheio ({pv.length} de {n - 1})")
        if not 0 <= index <= pv.length:
            raise SlotIndexError(f"Índice {index} fora de [0, {pv.length}]")
        value = self._check_value(value)
        pv = self._ensure_budget(pv, masked=True, mode=mode)
        masks = SlotMask.for_insert(n, pv.length, index, value, self.params.plain_modulus)
        c_keep = self._mult_plain(pv.ct, masks.keep)
        c_suffix = self._mult_plain(pv.ct, masks.suffix)
        c_shifted = self._rotate(c_suffix, -1)
        result = self._add(c_keep, c_shifted)
        if mode is InsertMode.ENCRYPTED:
            result = self._add(result, self._encrypt_slots(masks.value))
        else:
            result = self._add_plain(result, masks.value)
        return pv.with_ct(result, pv.length + 1)

    def append(self, pv, value):
        """Inserção no fim com uma única soma em claro (sem rotação nem máscara)."""
        self._require_aux(pv)
        n = pv.slot_count
        if pv.length >= n - 1:
            raise CapacityError(f"Pacote do grupo {pv.group_id} cheio ({pv.length} de {n - 1})")
        value = self._check_value(value)
        pv = self._ensure_budget(pv, masked=False)
        delta = np.zeros(n, dtype=np.int64)
        delta[pv.length] = value
        delta[n - 1] = value
        return pv.with_ct(self._add_plain(pv.ct, delta), pv.length + 1)

    def delete_at(self, pv, index, value):
        """
        Remove o slot `index`, puxando index+1..L-1 uma posição para a esquerda.

        `value` deve ser o valor atual do slot (v_del). Em pacote inerte (L = 0)
        a remoção não faz nada.
        """
        self._require_aux(pv)
        if pv.is_inert:
            logger.debug(f"Remoção em pacote inerte do grupo {pv.group_id} ignorada")
            return pv
        if not 0 <= index < pv.length:
            raise SlotIndexError(f"Índice {index} fora de [0, {pv.length})")
        value = self._check_value(value)
        pv = self._ensure_budget(pv, masked=True)
        n = pv.slot_count
        masks = SlotMask.for_delete(n, pv.length, index, value, self.params.plain_modulus)
        c_keep = self._mult_plain(pv.ct, masks.keep)
        c_suffix = self._mult_plain(pv.ct, masks.suffix)
        c_shifted = self._rotate(c_suffix, 1)
        result = self._add(c_keep, c_shifted)
        result = self._sub_plain(result, masks.value)
        return pv.with_ct(result, pv.length - 1)

    def refresh(self, pv, secret_key=None):
        """Decifra e recifra o mesmo conteúdo lógico, restaurando o orçamento de ruído."""
        sk = self._require_secret(secret_key)
        slots = self.context.decrypt(sk, pv.ct).slots
        self.refresh_count += 1
        return pv.with_ct(self._encrypt_slots(slots))

    # ---------------------------------------------------------- aggregation

    def global_sum(self, packs):
        """
        Soma de cifras sem rotações; o slot n-1 do resultado é Σ σ (mod t).

        Raises:
            ParameterError: Lista vazia.
        """
        packs = list(packs)
        if not packs:
            raise ParameterError("global_sum exige ao menos um pacote")
        mark = self.trace.mark()
        total = packs[0].ct
        for pv in packs[1:]:
            total = self._add(total, pv.ct)
        if self.trace.rotations(mark):
            raise HermesError("Agregação executou rotações")
        return total

    def group_sum(self, groups):
        """Aplica global_sum por chave; a saída segue a ordem das chaves."""
        return {key: self.global_sum(groups[key]) for key in sorted(groups)}

    def mask_payload(self, ct):
        """Zera o slot de soma, deixando só os valores (uma multiplicação por máscara)."""
        mask = np.ones(self.slot_count, dtype=np.int64)
        mask[-1] = 0
        return self._mult_plain(ct.ct if isinstance(ct, PackedVector) else ct, mask)

    def rotate_baseline_sum(self, ct):
        """
        Soma por árvore de rotações: log2(n) passos rotação+soma, todos os
        slots do resultado passam a conter o total. Usada só como linha de base.
        """
        if isinstance(ct, PackedVector):
            ct = ct.ct
        for step in power_of_two_steps(self.slot_count):
            ct = self._add(ct, self._rotate(ct, step))
        return ct

    # ----------------------------------------------------------- decryption

    def decrypt_pack(self, pv, secret_key=None):
        """Todos os slots decifrados (uso de testes e do oráculo)."""
        sk = self._require_secret(secret_key)
        ct = pv.ct if isinstance(pv, PackedVector) else pv
        return self.context.decrypt(sk, ct).slots

    def extract_sum(self, ct, secret_key=None):
        """Devolve apenas o slot n-1."""
        return int(self.decrypt_pack(ct, secret_key)[self.slot_count - 1])

    def decrypt_slot(self, pv, slot, secret_key=None):
        """
        Devolve um único slot. Fora de [0, n-1] devolve None e registra um aviso.
        """
        n = self.slot_count
        if not 0 <= slot < n:
            logger.warning(f"Slot {slot} fora de [0, {n - 1}]: retornando NULL")
            return None
        return int(self.decrypt_pack(pv, secret_key)[slot])

    def estimated_budget(self, pv):
        ct = pv.ct if isinstance(pv, PackedVector) else pv
        return self.context.estimated_budget(ct)
