"""
Esquema BFV de chave pública com batching em slots.

Implementa apenas o conjunto de operações consumido pelo motor Hermes:
codificação em slots, cifragem, soma/subtração entre cifras, soma e produto
por texto claro, rotação de Galois com troca de chave e o medidor de ruído.
Não há produto cifra-cifra nem relinearização.
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType

import numpy as np
from sympy import isprime

from src.services.errors import MissingKeyError, ParameterError, ParamsMismatchError, RangeError
from src.services.ring_arith import (
    NOISE_BOUND,
    Domain,
    PolyRns,
    PrimeModulus,
    RnsBasis,
    add_mod,
    apply_automorphism,
    lift_signed,
    make_rng,
    moduli_view,
    mul_mod,
    neg_mod,
    ntt_forward,
    ntt_forward_array,
    ntt_inverse,
    ntt_inverse_array,
    poly_add,
    poly_sub,
    sample_noise,
    sample_ternary,
    sample_uniform,
    to_integers,
)

logger = logging.getLogger(__name__)

MIN_DEGREE = 8
DEFAULT_DECOMPOSITION_BITS = 20
# 3 gera o subgrupo de ordem N/2 de (Z/2NZ)^*: uma única linha de rotação.
GALOIS_GENERATOR = 3


def log2_sum(*terms):
    """log2(Σ 2^x) estável; termos -inf são ignorados."""
    finite = [x for x in terms if x != -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    return top + math.log2(sum(2.0 ** (x - top) for x in finite))


@dataclass(frozen=True)
class SchemeParams:
    """Parâmetros do esquema: grau N, módulo de texto t e base RNS de q."""

    degree: int
    plain_modulus: int
    basis: RnsBasis
    noise_bound: int = NOISE_BOUND
    decomposition_bits: int = DEFAULT_DECOMPOSITION_BITS

    def __post_init__(self):
        n, t = self.degree, self.plain_modulus
        if n < MIN_DEGREE or n & (n - 1):
            raise ParameterError(f"N={n} deve ser potência de dois ≥ {MIN_DEGREE}")
        if self.basis.degree != n:
            raise ParameterError("Base RNS construída para outro grau")
        if not isprime(t):
            raise ParameterError(f"t={t} não é primo")
        if (t - 1) % (2 * n):
            raise ParameterError(f"t={t} não é ≡ 1 (mod 2N) para N={n}")
        if any(t >= p.value for p in self.basis.primes):
            raise ParameterError("t deve ser menor que todos os primos RNS")
        if not 1 <= self.decomposition_bits < 50:
            raise ParameterError(f"Base de decomposição 2^{self.decomposition_bits} inválida")

    @classmethod
    def create(cls, degree, plain_modulus=65537, prime_count=3, decomposition_bits=DEFAULT_DECOMPOSITION_BITS):
        return cls(
            degree=degree,
            plain_modulus=plain_modulus,
            basis=RnsBasis.generate(degree, prime_count),
            decomposition_bits=decomposition_bits,
        )

    @property
    def slot_count(self):
        return self.degree // 2

    @property
    def capacity(self):
        return self.slot_count - 1

    @property
    def modulus(self):
        return self.basis.modulus

    @property
    def delta(self):
        return self.modulus // self.plain_modulus

    @property
    def log_modulus(self):
        return math.log2(self.modulus)

    @cached_property
    def plain_basis(self):
        return RnsBasis(self.degree, (PrimeModulus.for_degree(self.plain_modulus, self.degree),))

    @cached_property
    def digit_counts(self):
        """Dígitos por primo na decomposição da troca de chave."""
        w = self.decomposition_bits
        return tuple(-(-p.value.bit_length() // w) for p in self.basis.primes)

    @property
    def digit_count(self):
        return sum(self.digit_counts)

    @cached_property
    def params_id(self):
        descriptor = "|".join([
            "hermes-bfv",
            f"N={self.degree}",
            f"t={self.plain_modulus}",
            "primes=" + ",".join(str(p.value) for p in self.basis.primes),
            f"B={self.noise_bound}",
            f"w={self.decomposition_bits}",
        ])
        return hashlib.sha256(descriptor.encode("ascii")).digest()

    def to_dict(self):
        return {
            "degree": self.degree,
            "slot_count": self.slot_count,
            "capacity": self.capacity,
            "plain_modulus": self.plain_modulus,
            "primes": [p.value for p in self.basis.primes],
            "log2_q": round(self.log_modulus, 2),
            "noise_bound": self.noise_bound,
            "decomposition_bits": self.decomposition_bits,
            "params_id": self.params_id.hex(),
        }


@dataclass(frozen=True, eq=False)
class SecretKey:
    params_id: bytes
    poly: PolyRns

    @cached_property
    def ntt(self):
        return ntt_forward(self.poly)


@dataclass(frozen=True, eq=False)
class PublicKey:
    """(b, a) com b = -(a·s + e), ambos no domínio NTT."""

    params_id: bytes
    b: PolyRns
    a: PolyRns


def expand_key_uniform(basis, seed, digits):
    """Regenera as metades uniformes (domínio NTT) de uma chave de troca a partir da semente."""
    rng = np.random.default_rng(seed)
    return np.stack([sample_uniform(basis, rng, Domain.NTT).residues for _ in range(digits)])


@dataclass(frozen=True, eq=False)
class KeySwitchKey:
    """Chave de troca σ_g(s) → s; `b` tem forma (D, k, N) no domínio NTT."""

    step: int
    exponent: int
    seed: int
    b: np.ndarray
    basis: RnsBasis

    @cached_property
    def a(self):
        return expand_key_uniform(self.basis, self.seed, self.b.shape[0])


@dataclass(frozen=True)
class GaloisKeySet:
    params_id: bytes
    keys: MappingProxyType

    @property
    def steps(self):
        return sorted(self.keys)

    def get(self, step):
        try:
            return self.keys[step]
        except KeyError:
            raise MissingKeyError(f"Sem chave de rotação para o passo {step}") from None

    def __contains__(self, step):
        return step in self.keys


@dataclass(frozen=True, eq=False)
class PlaintextVec:
    """Vetor de slots em Z_t^n e o polinômio m(X) ∈ R_t que o codifica."""

    params_id: bytes
    slots: np.ndarray
    coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """c = (c0, c1) ∈ R_q² e a estimativa de pior caso do ruído invariante (log2)."""

    c0: PolyRns
    c1: PolyRns
    params_id: bytes
    noise_log2: float

    def __eq__(self, other):
        if not isinstance(other, Ciphertext):
            return NotImplemented
        return self.params_id == other.params_id and self.c0 == other.c0 and self.c1 == other.c1

    __hash__ = None


def default_rotation_steps(slot_count):
    """{+1, -1} ∪ {±2^j : 2^j < n}."""
    steps = {1, -1}
    power = 2
    while power < slot_count:
        steps.update((power, -power))
        power *= 2
    return sorted(steps)


def power_of_two_steps(slot_count):
    """Passos 1, 2, 4, ..., n/2 usados pela soma por rotações."""
    steps, power = [], 1
    while power < slot_count:
        steps.append(power)
        power *= 2
    return steps


class BfvContext:
    """
    Contexto BFV imutável: parâmetros, tabelas do codificador e operações.

    Toda operação devolve uma cifra nova. O gerador aleatório interno só é
    usado quando nenhuma semente é passada explicitamente.
    """

    def __init__(self, params, seed=None):
        """
        Inicializa o contexto.

        Args:
            params (SchemeParams): Parâmetros validados.
            seed: Semente para o modo de teste determinístico (None usa entropia do sistema).
        """
        self.params = params
        self._rng = make_rng(seed)
        self._slot_positions = self._compute_slot_positions()
        self._mods = moduli_view(params.basis)
        t = params.plain_modulus
        n = params.degree
        self.fresh_noise_log2 = math.log2(t * params.noise_bound * (2 * n + 1) + t * t)
        self.plain_add_noise_log2 = 2 * math.log2(t)
        self.mult_plain_growth_log2 = math.log2(n * (t // 2))
        self.keyswitch_noise_log2 = math.log2(
            t * params.digit_count * n * ((1 << params.decomposition_bits) - 1) * params.noise_bound
        )

    # ----------------------------------------------------------------- slots

    def _compute_slot_positions(self):
        """
        Posição, na saída da NTT módulo t, de cada slot da linha de rotação.

        O slot i é a avaliação em ψ^(3^i mod 2N). As posições são descobertas
        transformando o próprio X, sem depender da ordem interna da NTT.
        """
        params = self.params
        n, t = params.degree, params.plain_modulus
        plain = params.plain_basis
        x = np.zeros((1, n), dtype=np.uint64)
        x[0, 1] = 1
        evaluations = ntt_forward_array(x, plain)[0]
        root = plain.primes[0].root
        exponent_of = {pow(root, e, t): e for e in range(1, 2 * n, 2)}
        position_of = {exponent_of[int(v)]: i for i, v in enumerate(evaluations)}
        return np.array(
            [position_of[pow(GALOIS_GENERATOR, i, 2 * n)] for i in range(params.slot_count)],
            dtype=np.int64,
        )

    def rotation_exponent(self, step):
        n = self.params.slot_count
        return pow(GALOIS_GENERATOR, step % n, 2 * self.params.degree)

    def encode_slots(self, values):
        """
        Codifica um vetor de Z_t^n (completado com zeros) em m(X) ∈ R_t.

        Raises:
            RangeError: Se algum valor estiver fora de [0, t).
        """
        params = self.params
        values = np.asarray(list(values), dtype=np.int64).reshape(-1)
        if values.size > params.slot_count:
            raise RangeError(f"{values.size} valores excedem os {params.slot_count} slots")
        if values.size and (values.min() < 0 or values.max() >= params.plain_modulus):
            raise RangeError(f"Valores devem estar em [0, {params.plain_modulus})")
        slots = np.zeros(params.slot_count, dtype=np.int64)
        slots[:values.size] = values
        evaluations = np.zeros((1, params.degree), dtype=np.uint64)
        evaluations[0, self._slot_positions] = slots.astype(np.uint64)
        coefficients = ntt_inverse_array(evaluations, params.plain_basis)[0].astype(np.int64)
        return PlaintextVec(params.params_id, slots, coefficients)

    def decode_slots(self, plaintext):
        coefficients = plaintext.coefficients if isinstance(plaintext, PlaintextVec) else plaintext
        coefficients = np.asarray(coefficients, dtype=np.uint64).reshape(1, -1)
        evaluations = ntt_forward_array(coefficients, self.params.plain_basis)[0]
        return evaluations[self._slot_positions].astype(np.int64)

    # ------------------------------------------------------------------ keys

    def _check(self, *objects):
        for obj in objects:
            if obj.params_id != self.params.params_id:
                raise ParamsMismatchError("Objeto gerado sob outros parâmetros")

    def keygen(self, seed=None):
        """
        Gera o par (sk, pk).

        Returns:
            tuple: (SecretKey, PublicKey)
        """
        params = self.params
        rng = make_rng(seed) if seed is not None else self._rng
        basis = params.basis
        s = sample_ternary(basis, rng)
        sk = SecretKey(params.params_id, s)
        a = sample_uniform(basis, rng, Domain.NTT)
        e = ntt_forward(sample_noise(basis, rng, params.noise_bound))
        b = neg_mod(add_mod(mul_mod(a.residues, sk.ntt.residues, self._mods), e.residues, self._mods), self._mods)
        pk = PublicKey(params.params_id, PolyRns._trusted(basis, b, Domain.NTT), a)
        logger.info(f"Par de chaves gerado (N={params.degree}, t={params.plain_modulus})")
        return sk, pk

    def gen_rotation_keys(self, sk, steps, seed=None):
        """
        Gera chaves de Galois para os passos pedidos.

        Args:
            sk (SecretKey): Chave secreta.
            steps (list): Passos r com 0 < |r| < n.

        Returns:
            GaloisKeySet: Conjunto que cobre exatamente esses passos.
        """
        self._check(sk)
        params = self.params
        n = params.slot_count
        steps = sorted(set(int(r) for r in steps))
        for r in steps:
            if r == 0 or abs(r) >= n:
                raise ParameterError(f"Passo de rotação {r} fora de 0 < |r| < {n}")
        rng = make_rng(seed) if seed is not None else self._rng
        keys = {}
        for r in steps:
            exponent = self.rotation_exponent(r)
            key_seed = int.from_bytes(rng.bytes(16), "little")
            keys[r] = self._switch_key(sk, exponent, r, key_seed, rng)
        logger.info(f"{len(keys)} chaves de rotação geradas")
        return GaloisKeySet(params.params_id, MappingProxyType(keys))

    def _switch_key(self, sk, exponent, step, key_seed, rng):
        params = self.params
        basis = params.basis
        digits = params.digit_count
        a = expand_key_uniform(basis, key_seed, digits)
        e = ntt_forward_array(
            np.stack([sample_noise(basis, rng, params.noise_bound).residues for _ in range(digits)]),
            basis,
        )
        s_rot = ntt_forward(apply_automorphism(sk.poly, exponent)).residues
        gadget = np.stack([basis.residues_of(g) for g in self._gadget()])[:, :, None]
        b = neg_mod(add_mod(mul_mod(a, sk.ntt.residues, self._mods), e, self._mods), self._mods)
        b = add_mod(b, mul_mod(np.broadcast_to(s_rot, a.shape), gadget, self._mods), self._mods)
        return KeySwitchKey(step=step, exponent=exponent, seed=key_seed, b=b, basis=basis)

    def _gadget(self):
        """g_ij = q̂_i · 2^(w·j) mod q, na ordem dos dígitos de `_decompose`."""
        params = self.params
        basis = params.basis
        w = params.decomposition_bits
        values = []
        for hat, count in zip(basis.crt_hat, params.digit_counts):
            for j in range(count):
                values.append(hat * (1 << (w * j)) % basis.modulus)
        return values

    def _decompose(self, poly):
        """Dígitos de base 2^w de y_i = [c·q̂_i^{-1}]_{p_i}, levados a todos os primos."""
        params = self.params
        basis = params.basis
        w = params.decomposition_bits
        mask = (1 << w) - 1
        y = mul_mod(poly.residues, basis.crt_hat_inv[:, None], self._mods)
        digits = []
        for i, count in enumerate(params.digit_counts):
            for j in range(count):
                digit = (y[i] >> np.uint64(w * j)) & np.uint64(mask)
                digits.append(np.broadcast_to(digit, (basis.size, basis.degree)))
        return np.stack(digits)

    # ------------------------------------------------------------ encryption

    def _scaled_plain(self, plaintext):
        factors = self.params.basis.residues_of(self.params.delta)[:, None]
        m = plaintext.coefficients.astype(np.uint64)[None, :]
        return mul_mod(m, factors, self._mods)

    def encrypt(self, pk, plaintext, seed=None):
        """
        Cifra um texto claro com a chave pública; a cifragem é aleatorizada.

        Returns:
            Ciphertext: Cifra nova com estimativa de ruído de cifra fresca.
        """
        self._check(pk, plaintext)
        params = self.params
        basis = params.basis
        rng = make_rng(seed) if seed is not None else self._rng
        u = ntt_forward(sample_ternary(basis, rng)).residues
        e1 = sample_noise(basis, rng, params.noise_bound).residues
        e2 = sample_noise(basis, rng, params.noise_bound).residues
        products = np.stack([mul_mod(pk.b.residues, u, self._mods), mul_mod(pk.a.residues, u, self._mods)])
        c0, c1 = ntt_inverse_array(products, basis)
        c0 = add_mod(add_mod(c0, e1, self._mods), self._scaled_plain(plaintext), self._mods)
        c1 = add_mod(c1, e2, self._mods)
        return Ciphertext(
            PolyRns._trusted(basis, c0, Domain.COEFFICIENT),
            PolyRns._trusted(basis, c1, Domain.COEFFICIENT),
            params.params_id,
            self.fresh_noise_log2,
        )

    def _phase(self, sk, ct):
        """c0 + c1·s em R_q, como inteiros em [0, q)."""
        self._check(sk, ct)
        c1s = ntt_inverse_array(mul_mod(ntt_forward(ct.c1).residues, sk.ntt.residues, self._mods), self.params.basis)
        return to_integers(PolyRns._trusted(self.params.basis, add_mod(ct.c0.residues, c1s, self._mods), Domain.COEFFICIENT))

    def decrypt(self, sk, ct):
        """
        Decifra. Com orçamento de ruído esgotado o resultado é lixo, sem aviso.

        Returns:
            PlaintextVec: Slots decodificados.
        """
        params = self.params
        q, t = params.modulus, params.plain_modulus
        x = self._phase(sk, ct)
        m = ((x * t + q // 2) // q) % t
        coefficients = m.astype(np.int64)
        return PlaintextVec(params.params_id, self.decode_slots(coefficients), coefficients)

    def noise_budget(self, sk, ct):
        """
        Orçamento exato: log2(q / (2·|w|∞)) com w = [t·(c0 + c1·s)]_q, limitado a ≥ 0.
        """
        params = self.params
        q, t = params.modulus, params.plain_modulus
        x = self._phase(sk, ct)
        w = (x * t) % q
        w = np.where(w > q // 2, w - q, w)
        largest = max(abs(int(v)) for v in w)
        if largest == 0:
            return params.log_modulus - 1
        return max(0.0, params.log_modulus - 1 - math.log2(largest))

    def estimated_budget(self, ct):
        """Orçamento pela estimativa de pior caso, sem chave secreta."""
        return max(0.0, self.params.log_modulus - 1 - ct.noise_log2)

    def budget_from_noise(self, noise_log2):
        return max(0.0, self.params.log_modulus - 1 - noise_log2)

    # ------------------------------------------------------------ evaluation

    def _new(self, c0, c1, noise_log2):
        basis = self.params.basis
        return Ciphertext(
            PolyRns._trusted(basis, c0, Domain.COEFFICIENT),
            PolyRns._trusted(basis, c1, Domain.COEFFICIENT),
            self.params.params_id,
            noise_log2,
        )

    def eval_add(self, a, b):
        self._check(a, b)
        return Ciphertext(poly_add(a.c0, b.c0), poly_add(a.c1, b.c1), a.params_id, log2_sum(a.noise_log2, b.noise_log2))

    def eval_sub(self, a, b):
        self._check(a, b)
        return Ciphertext(poly_sub(a.c0, b.c0), poly_sub(a.c1, b.c1), a.params_id, log2_sum(a.noise_log2, b.noise_log2))

    def eval_add_plain(self, ct, plaintext):
        self._check(ct, plaintext)
        c0 = add_mod(ct.c0.residues, self._scaled_plain(plaintext), self._mods)
        return self._new(c0, ct.c1.residues, log2_sum(ct.noise_log2, self.plain_add_noise_log2))

    def eval_sub_plain(self, ct, plaintext):
        self._check(ct, plaintext)
        c0 = add_mod(ct.c0.residues, neg_mod(self._scaled_plain(plaintext), self._mods), self._mods)
        return self._new(c0, ct.c1.residues, log2_sum(ct.noise_log2, self.plain_add_noise_log2))

    def eval_mult_plain(self, ct, plaintext):
        """
        Produto slot a slot por um texto claro.

        O texto claro entra com representantes centrados em (-t/2, t/2]; o ruído
        cresce no máximo pela norma ℓ1 desse polinômio (≤ N·⌊t/2⌋).
        """
        self._check(ct, plaintext)
        params = self.params
        t = params.plain_modulus
        centered = np.where(plaintext.coefficients > t // 2, plaintext.coefficients - t, plaintext.coefficients)
        l1 = int(np.abs(centered).sum())
        p = ntt_forward(lift_signed(params.basis, centered)).residues
        spectra = ntt_forward_array(np.stack([ct.c0.residues, ct.c1.residues]), params.basis)
        c0, c1 = ntt_inverse_array(mul_mod(spectra, p, self._mods), params.basis)
        return self._new(c0, c1, ct.noise_log2 + math.log2(max(l1, 1)))

    def eval_rotate(self, ct, step, keys):
        """
        Rotação cíclica: o slot i da saída recebe o slot (i + r) mod n da entrada.

        Raises:
            MissingKeyError: Se não houver chave para o passo.
        """
        self._check(ct, keys)
        key = keys.get(step)
        basis = self.params.basis
        c0 = apply_automorphism(ct.c0, key.exponent)
        c1 = apply_automorphism(ct.c1, key.exponent)
        digits = ntt_forward_array(self._decompose(c1), basis)
        acc_b = mul_mod(digits, key.b, self._mods).sum(axis=0, dtype=np.uint64) % basis.moduli[:, None]
        acc_a = mul_mod(digits, key.a, self._mods).sum(axis=0, dtype=np.uint64) % basis.moduli[:, None]
        switched_b, switched_a = ntt_inverse_array(np.stack([acc_b, acc_a]), basis)
        return self._new(
            add_mod(c0.residues, switched_b, self._mods),
            switched_a,
            log2_sum(ct.noise_log2, self.keyswitch_noise_log2),
        )
