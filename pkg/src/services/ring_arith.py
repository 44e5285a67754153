"""
Aritmética exata em R_q = Z_q[X]/(X^N + 1) com decomposição RNS.

Um polinômio é guardado como uma matriz numpy uint64 de forma (k, N), uma linha
por primo da base. Todos os primos ficam abaixo de 2^50: o produto de dois
resíduos é reduzido com o quociente estimado em float64 e corrigido em
aritmética uint64 com estouro (o mesmo truque das bibliotecas NTL de precisão
simples), de modo que nenhum resultado depende de ponto flutuante.
"""

import enum
import functools
import logging
import secrets
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sympy import isprime

from src.services.errors import DomainError, ParameterError

logger = logging.getLogger(__name__)

MAX_PRIME_BITS = 50
# Primos ≡ 1 (mod 2^17) servem a qualquer grau N ≤ 2^16.
PRIME_STEP = 1 << 17
# B_err: limite da distribuição binomial centrada usada no ruído.
NOISE_BOUND = 21


class Domain(enum.Enum):
    COEFFICIENT = 0
    NTT = 1


def _primitive_root_2n(value, degree):
    """Menor raiz r = x^((p-1)/2N) com r^N ≡ -1 (mod p), procurando x = 2, 3, ..."""
    exponent = (value - 1) // (2 * degree)
    for x in range(2, value):
        root = pow(x, exponent, value)
        if pow(root, degree, value) == value - 1:
            return root
    raise ParameterError(f"Sem raiz primitiva 2N-ésima módulo {value}")


@dataclass(frozen=True)
class PrimeModulus:
    """Primo amigável à NTT e uma raiz primitiva 2N-ésima da unidade."""

    value: int
    root: int

    @classmethod
    def for_degree(cls, value, degree):
        if not isprime(value):
            raise ParameterError(f"{value} não é primo")
        if (value - 1) % (2 * degree):
            raise ParameterError(f"{value} não é ≡ 1 (mod 2N) para N={degree}")
        return cls(value, _primitive_root_2n(value, degree))

    def check(self, degree):
        if self.value.bit_length() > MAX_PRIME_BITS:
            raise ParameterError(f"Primo {self.value} excede {MAX_PRIME_BITS} bits")
        if pow(self.root, 2 * degree, self.value) != 1 or pow(self.root, degree, self.value) != self.value - 1:
            raise ParameterError(f"Raiz {self.root} não tem ordem 2N módulo {self.value}")


@functools.lru_cache(maxsize=None)
def ntt_primes(count, bits=MAX_PRIME_BITS):
    """
    Devolve os `count` maiores primos p < 2^bits com p ≡ 1 (mod 2^17).

    Args:
        count (int): Quantidade de primos.
        bits (int): Tamanho máximo em bits.

    Returns:
        tuple: Primos em ordem decrescente.
    """
    found = []
    k = ((1 << bits) - 2) // PRIME_STEP
    while len(found) < count and k > 0:
        candidate = k * PRIME_STEP + 1
        if isprime(candidate):
            found.append(candidate)
        k -= 1
    return tuple(found)


@dataclass(frozen=True)
class RnsBasis:
    """Base RNS q = p_1 · p_2 ··· p_k para o grau N."""

    degree: int
    primes: tuple

    def __post_init__(self):
        n = self.degree
        if n < 2 or n & (n - 1):
            raise ParameterError(f"Grau {n} não é potência de dois")
        values = [p.value for p in self.primes]
        if not values:
            raise ParameterError("Base RNS vazia")
        if len(set(values)) != len(values):
            raise ParameterError("Primos repetidos na base RNS")
        for prime in self.primes:
            if (prime.value - 1) % (2 * n):
                raise ParameterError(f"{prime.value} não é ≡ 1 (mod 2N)")
            prime.check(n)

    @classmethod
    def generate(cls, degree, prime_count):
        return cls(degree, tuple(PrimeModulus.for_degree(p, degree) for p in ntt_primes(prime_count)))

    @property
    def size(self):
        return len(self.primes)

    @cached_property
    def modulus(self):
        q = 1
        for prime in self.primes:
            q *= prime.value
        return q

    @cached_property
    def moduli(self):
        return np.array([p.value for p in self.primes], dtype=np.uint64)

    @cached_property
    def moduli_signed(self):
        return self.moduli.astype(np.int64)

    @cached_property
    def moduli_inv(self):
        return 1.0 / self.moduli.astype(np.float64)

    @cached_property
    def crt_hat(self):
        """q̂_i = q / p_i como inteiros Python."""
        return tuple(self.modulus // p.value for p in self.primes)

    @cached_property
    def crt_hat_inv(self):
        """q̂_i^{-1} mod p_i."""
        return np.array(
            [pow(h % p.value, -1, p.value) for h, p in zip(self.crt_hat, self.primes)],
            dtype=np.uint64,
        )

    def residues_of(self, value):
        """Resíduos de um inteiro (qualquer tamanho, com sinal) em cada primo."""
        return np.array([value % p.value for p in self.primes], dtype=np.uint64)


def moduli_view(basis, trailing=1):
    shape = (basis.size,) + (1,) * trailing
    return (
        basis.moduli.reshape(shape),
        basis.moduli_signed.reshape(shape),
        basis.moduli_inv.reshape(shape),
    )


def mul_mod(a, b, mods):
    mod, mod_signed, mod_inv = mods
    quot = np.floor(a.astype(np.float64) * b.astype(np.float64) * mod_inv).astype(np.uint64)
    r = (a * b - quot * mod).view(np.int64)
    r = np.where(r < 0, r + mod_signed, r)
    r = np.where(r >= mod_signed, r - mod_signed, r)
    return r.astype(np.uint64)


def add_mod(a, b, mods):
    mod = mods[0]
    s = a + b
    return np.where(s >= mod, s - mod, s)


def sub_mod(a, b, mods):
    mod = mods[0]
    s = a + (mod - b)
    return np.where(s >= mod, s - mod, s)


def neg_mod(a, mods):
    return np.where(a == 0, a, mods[0] - a)


@functools.lru_cache(maxsize=None)
def bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@dataclass(frozen=True)
class NttTables:
    """Potências de ψ e ψ^{-1} em ordem bit-reversa, e N^{-1}, por primo."""

    psi_rev: np.ndarray
    psi_inv_rev: np.ndarray
    degree_inv: np.ndarray


@functools.lru_cache(maxsize=None)
def ntt_tables(basis):
    n = basis.degree
    rev = bit_reverse_indices(n)
    forward, inverse, degree_inv = [], [], []
    for prime in basis.primes:
        p = prime.value
        for root, target in ((prime.root, forward), (pow(prime.root, -1, p), inverse)):
            powers = [1] * n
            for j in range(1, n):
                powers[j] = powers[j - 1] * root % p
            target.append(np.array(powers, dtype=np.uint64)[rev])
        degree_inv.append(pow(n, -1, p))
    logger.debug(f"Tabelas NTT construídas para N={n}, k={basis.size}")
    return NttTables(
        psi_rev=np.stack(forward),
        psi_inv_rev=np.stack(inverse),
        degree_inv=np.array(degree_inv, dtype=np.uint64).reshape(-1, 1),
    )


def ntt_forward_array(residues, basis):
    """NTT negacíclica (Cooley–Tukey) sobre matrizes de forma (..., k, N)."""
    tables = ntt_tables(basis)
    mods = moduli_view(basis, 2)
    a = np.array(residues, dtype=np.uint64, copy=True)
    lead = a.shape[:-2]
    k, n = a.shape[-2:]
    m, half = 1, n
    while m < n:
        half //= 2
        view = a.reshape(lead + (k, m, 2, half))
        w = tables.psi_rev[:, m:2 * m][:, :, None]
        u = view[..., 0, :]
        v = mul_mod(view[..., 1, :], w, mods)
        new_u = add_mod(u, v, mods)
        new_v = sub_mod(u, v, mods)
        view[..., 0, :] = new_u
        view[..., 1, :] = new_v
        m *= 2
    return a


def ntt_inverse_array(residues, basis):
    """Inversa (Gentleman–Sande) de ntt_forward_array, incluindo o fator N^{-1}."""
    tables = ntt_tables(basis)
    mods = moduli_view(basis, 2)
    a = np.array(residues, dtype=np.uint64, copy=True)
    lead = a.shape[:-2]
    k, n = a.shape[-2:]
    m, span = n, 1
    while m > 1:
        half = m // 2
        view = a.reshape(lead + (k, half, 2, span))
        w = tables.psi_inv_rev[:, half:m][:, :, None]
        u = view[..., 0, :]
        v = view[..., 1, :]
        new_u = add_mod(u, v, mods)
        new_v = mul_mod(sub_mod(u, v, mods), w, mods)
        view[..., 0, :] = new_u
        view[..., 1, :] = new_v
        span *= 2
        m = half
    return mul_mod(a, tables.degree_inv, moduli_view(basis, 1))


class PolyRns:
    """Elemento de R_q em forma de resíduos; imutável."""

    __slots__ = ("basis", "residues", "domain")

    def __init__(self, basis, residues, domain=Domain.COEFFICIENT):
        arr = np.array(residues, dtype=np.uint64, copy=True)
        if arr.shape != (basis.size, basis.degree):
            raise ParameterError(f"Forma {arr.shape} incompatível com a base ({basis.size}, {basis.degree})")
        if np.any(arr >= basis.moduli[:, None]):
            raise ParameterError("Coeficiente fora do intervalo do primo")
        arr.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "residues", arr)
        object.__setattr__(self, "domain", domain)

    def __setattr__(self, name, value):
        raise AttributeError("PolyRns é imutável")

    def __eq__(self, other):
        if not isinstance(other, PolyRns):
            return NotImplemented
        return (
            self.basis == other.basis
            and self.domain == other.domain
            and np.array_equal(self.residues, other.residues)
        )

    __hash__ = None

    def __repr__(self):
        return f"PolyRns(N={self.basis.degree}, k={self.basis.size}, domain={self.domain.name})"

    @classmethod
    def _trusted(cls, basis, residues, domain):
        obj = cls.__new__(cls)
        residues = np.ascontiguousarray(residues, dtype=np.uint64)
        residues.setflags(write=False)
        object.__setattr__(obj, "basis", basis)
        object.__setattr__(obj, "residues", residues)
        object.__setattr__(obj, "domain", domain)
        return obj


def zero(basis, domain=Domain.COEFFICIENT):
    return PolyRns._trusted(basis, np.zeros((basis.size, basis.degree), dtype=np.uint64), domain)


def lift_signed(basis, values, domain=Domain.COEFFICIENT):
    """Leva um vetor de inteiros pequenos (int64, com sinal) para R_q."""
    values = np.asarray(values, dtype=np.int64)
    if values.shape != (basis.degree,):
        raise ParameterError(f"Esperados {basis.degree} coeficientes, recebidos {values.shape}")
    residues = np.mod(values[None, :], basis.moduli_signed[:, None]).astype(np.uint64)
    return PolyRns._trusted(basis, residues, domain)


def from_integers(basis, coefficients, domain=Domain.COEFFICIENT):
    """Constrói um polinômio a partir de inteiros Python de qualquer tamanho."""
    coefficients = list(coefficients)
    if len(coefficients) != basis.degree:
        raise ParameterError(f"Esperados {basis.degree} coeficientes, recebidos {len(coefficients)}")
    residues = np.array(
        [[int(c) % p.value for c in coefficients] for p in basis.primes],
        dtype=np.uint64,
    )
    return PolyRns._trusted(basis, residues, domain)


def to_integers(p, centered=False):
    """
    Reconstrução CRT para inteiros Python.

    Args:
        p (PolyRns): Polinômio em qualquer domínio (NTT é desfeita antes).
        centered (bool): Se True, devolve representantes em (-q/2, q/2].

    Returns:
        numpy.ndarray: Vetor dtype=object com N inteiros.
    """
    if p.domain is Domain.NTT:
        p = ntt_inverse(p)
    basis = p.basis
    y = mul_mod(p.residues, basis.crt_hat_inv[:, None], moduli_view(basis, 1))
    q = basis.modulus
    total = np.zeros(basis.degree, dtype=object)
    for row, hat in zip(y, basis.crt_hat):
        total = total + row.astype(object) * hat
    total = total % q
    if centered:
        total = np.where(total > q // 2, total - q, total)
    return total


def _require_domain(p, domain):
    if p.domain is not domain:
        raise DomainError(f"Esperado domínio {domain.name}, recebido {p.domain.name}")


def _require_same(a, b, same_domain=True):
    if a.basis != b.basis:
        raise ParameterError("Polinômios em bases RNS diferentes")
    if same_domain and a.domain is not b.domain:
        raise ParameterError(f"Domínios diferentes: {a.domain.name} e {b.domain.name}")


def ntt_forward(p):
    _require_domain(p, Domain.COEFFICIENT)
    return PolyRns._trusted(p.basis, ntt_forward_array(p.residues, p.basis), Domain.NTT)


def ntt_inverse(p):
    _require_domain(p, Domain.NTT)
    return PolyRns._trusted(p.basis, ntt_inverse_array(p.residues, p.basis), Domain.COEFFICIENT)


def poly_add(a, b):
    _require_same(a, b)
    return PolyRns._trusted(a.basis, add_mod(a.residues, b.residues, moduli_view(a.basis)), a.domain)


def poly_sub(a, b):
    _require_same(a, b)
    return PolyRns._trusted(a.basis, sub_mod(a.residues, b.residues, moduli_view(a.basis)), a.domain)


def poly_neg(a):
    return PolyRns._trusted(a.basis, neg_mod(a.residues, moduli_view(a.basis)), a.domain)


def poly_mul(a, b):
    """Produto negacíclico; o resultado fica no domínio de `a`."""
    _require_same(a, b, same_domain=False)
    fa = a if a.domain is Domain.NTT else ntt_forward(a)
    fb = b if b.domain is Domain.NTT else ntt_forward(b)
    product = PolyRns._trusted(a.basis, mul_mod(fa.residues, fb.residues, moduli_view(a.basis)), Domain.NTT)
    return product if a.domain is Domain.NTT else ntt_inverse(product)


def poly_scalar_mul(a, scalar):
    factors = a.basis.residues_of(scalar)[:, None]
    return PolyRns._trusted(a.basis, mul_mod(a.residues, factors, moduli_view(a.basis)), a.domain)


@functools.lru_cache(maxsize=None)
def _automorphism_map(n, k):
    idx = (np.arange(n) * k) % (2 * n)
    return idx % n, idx >= n


def apply_automorphism(p, k):
    """
    Aplica σ_k: X ↦ X^k, reduzindo módulo X^N + 1.

    O coeficiente j vai para j·k mod 2N, com troca de sinal quando o índice
    cai em [N, 2N). Polinômios no domínio NTT são convertidos e devolvidos no
    mesmo domínio.
    """
    n = p.basis.degree
    if k % 2 == 0:
        raise ParameterError(f"Expoente de automorfismo {k} é par")
    k %= 2 * n
    if p.domain is Domain.NTT:
        return ntt_forward(apply_automorphism(ntt_inverse(p), k))
    dest, negate = _automorphism_map(n, k)
    values = np.where(negate[None, :], neg_mod(p.residues, moduli_view(p.basis)), p.residues)
    out = np.empty_like(values)
    out[:, dest] = values
    return PolyRns._trusted(p.basis, out, Domain.COEFFICIENT)


def make_rng(seed=None):
    """Gerador numpy; sem semente usa 128 bits de entropia do sistema."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng(secrets.randbits(128))
    return np.random.default_rng(seed)


def sample_uniform(basis, seed=None, domain=Domain.COEFFICIENT):
    rng = make_rng(seed)
    residues = np.stack([
        rng.integers(0, p.value, size=basis.degree, dtype=np.uint64) for p in basis.primes
    ])
    return PolyRns._trusted(basis, residues, domain)


def sample_ternary(basis, seed=None):
    rng = make_rng(seed)
    return lift_signed(basis, rng.integers(-1, 2, size=basis.degree))


def sample_noise(basis, seed=None, bound=NOISE_BOUND):
    """Binomial centrada em [-bound, bound] (variância bound/2)."""
    rng = make_rng(seed)
    return lift_signed(basis, rng.binomial(2 * bound, 0.5, size=basis.degree) - bound)
