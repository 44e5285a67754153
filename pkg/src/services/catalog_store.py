"""
Persistência de parâmetros, chaves e tabelas cifradas.

Todo objeto binário usa o mesmo contêiner: cabeçalho "HPC1" com versão,
papel (CT/SK/PK/GK), hash dos parâmetros, N, t e a base RNS, seguido dos
resíduos em uint64 little-endian, primo a primo. Cada tabela tem um
manifesto JSON (o ponto de commit) e um arquivo de dados por geração.
"""

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from types import MappingProxyType

import numpy as np
from pydantic import ValidationError

from src.models.catalog import TABLE_NAME, GroupRecord, TableManifest
from src.services.bfv import (
    Ciphertext,
    GaloisKeySet,
    KeySwitchKey,
    PublicKey,
    SchemeParams,
    SecretKey,
)
from src.services.errors import (
    BadMagicError,
    ContainerError,
    NotFoundError,
    ParameterError,
    ParamsMismatchError,
    TruncatedContainerError,
    UnsupportedVersionError,
)
from src.services.hermes_pack import PackedVector
from src.services.ring_arith import Domain, PolyRns, PrimeModulus, RnsBasis

logger = logging.getLogger(__name__)

MAGIC = b"HPC1"
VERSION = 1
ROLE_CIPHERTEXT = b"CT"
ROLE_SECRET_KEY = b"SK"
ROLE_PUBLIC_KEY = b"PK"
ROLE_GALOIS_KEYS = b"GK"

_FIXED = struct.Struct("<4sH2s32sQQQ")
_TAIL = struct.Struct("<Bd")
_GALOIS_ENTRY = struct.Struct("<qQI16s")
_COUNT = struct.Struct("<I")

PARAMS_FILE = "params.json"
SECRET_KEY_FILE = "secret.key"
PUBLIC_KEY_FILE = "public.key"
GALOIS_KEY_FILE = "galois.key"


def header_size(prime_count):
    """Tamanho do cabeçalho para `prime_count` primos."""
    return _FIXED.size + 8 * prime_count + _TAIL.size


def ciphertext_size(params):
    basis = params.basis
    return header_size(basis.size) + 2 * basis.size * basis.degree * 8


# ------------------------------------------------------------------ header


def _pack_header(params, role, domain=Domain.COEFFICIENT, noise_log2=0.0):
    basis = params.basis
    primes = struct.pack(f"<{basis.size}Q", *(p.value for p in basis.primes))
    return (
        _FIXED.pack(MAGIC, VERSION, role, params.params_id, basis.degree, params.plain_modulus, basis.size)
        + primes
        + _TAIL.pack(domain.value, noise_log2)
    )


def _unpack_header(data, params, role, offset=0):
    """
    Lê e valida um cabeçalho.

    Returns:
        tuple: (domínio, estimativa de ruído, offset do payload)
    """
    view = memoryview(data)
    if len(view) - offset < len(MAGIC):
        raise TruncatedContainerError("Contêiner menor que o magic")
    if bytes(view[offset:offset + 4]) != MAGIC:
        raise BadMagicError(f"Magic inválido: {bytes(view[offset:offset + 4])!r}")
    if len(view) - offset < _FIXED.size:
        raise TruncatedContainerError("Cabeçalho truncado")
    _, version, found_role, params_id, degree, plain_modulus, count = _FIXED.unpack_from(view, offset)
    if version != VERSION:
        raise UnsupportedVersionError(f"Versão {version} não suportada (esperada {VERSION})")
    if found_role != role:
        raise ContainerError(f"Papel {found_role!r} onde se esperava {role!r}")
    end = offset + header_size(count)
    if len(view) < end:
        raise TruncatedContainerError("Cabeçalho truncado na lista de primos")
    primes = struct.unpack_from(f"<{count}Q", view, offset + _FIXED.size)
    if params_id != params.params_id:
        raise ParamsMismatchError("Contêiner gerado sob outros parâmetros")
    expected = tuple(p.value for p in params.basis.primes)
    if degree != params.degree or plain_modulus != params.plain_modulus or primes != expected:
        raise ParamsMismatchError("Cabeçalho incoerente com os parâmetros carregados")
    domain_flag, noise_log2 = _TAIL.unpack_from(view, end - _TAIL.size)
    try:
        domain = Domain(domain_flag)
    except ValueError:
        raise ContainerError(f"Flag de domínio {domain_flag} inválida") from None
    return domain, noise_log2, end


def _residue_bytes(residues):
    return np.ascontiguousarray(residues, dtype="<u8").tobytes()


def _read_residues(data, offset, shape):
    count = int(np.prod(shape))
    end = offset + 8 * count
    if len(data) < end:
        raise TruncatedContainerError(f"Payload truncado: {len(data) - offset} de {8 * count} bytes")
    values = np.frombuffer(data, dtype="<u8", count=count, offset=offset).astype(np.uint64).reshape(shape)
    return values, end


def _read_poly(data, offset, basis, domain):
    residues, end = _read_residues(data, offset, (basis.size, basis.degree))
    try:
        return PolyRns(basis, residues, domain), end
    except ParameterError as exc:
        raise ContainerError(f"Resíduo inválido no contêiner: {exc}") from None


# -------------------------------------------------------------- ciphertext


def serialize_ciphertext(ct, params):
    if ct.params_id != params.params_id:
        raise ParamsMismatchError("Cifra gerada sob outros parâmetros")
    return (
        _pack_header(params, ROLE_CIPHERTEXT, ct.c0.domain, ct.noise_log2)
        + _residue_bytes(ct.c0.residues)
        + _residue_bytes(ct.c1.residues)
    )


def read_ciphertext(data, params, offset=0):
    """Lê uma cifra a partir de `offset`; devolve (cifra, offset seguinte)."""
    domain, noise_log2, pos = _unpack_header(data, params, ROLE_CIPHERTEXT, offset)
    c0, pos = _read_poly(data, pos, params.basis, domain)
    c1, pos = _read_poly(data, pos, params.basis, domain)
    return Ciphertext(c0, c1, params.params_id, noise_log2), pos


def deserialize_ciphertext(data, params):
    """
    Desserializa um contêiner de cifra.

    Raises:
        BadMagicError, UnsupportedVersionError, TruncatedContainerError: Contêiner ilegível.
        ParamsMismatchError: Contêiner de outros parâmetros.
    """
    ct, end = read_ciphertext(data, params)
    if end != len(data):
        raise ContainerError(f"{len(data) - end} bytes sobrando após a cifra")
    return ct


# -------------------------------------------------------------------- keys


def params_to_dict(params, profile=None):
    data = params.to_dict()
    if profile:
        data["profile"] = profile
    return data


def params_from_dict(data):
    """Reconstrói SchemeParams de params.json e confere o hash gravado."""
    try:
        degree = int(data["degree"])
        basis = RnsBasis(degree, tuple(PrimeModulus.for_degree(int(p), degree) for p in data["primes"]))
        params = SchemeParams(
            degree=degree,
            plain_modulus=int(data["plain_modulus"]),
            basis=basis,
            decomposition_bits=int(data["decomposition_bits"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ContainerError(f"params.json inválido: {exc}") from None
    stored = data.get("params_id")
    if stored and stored != params.params_id.hex():
        raise ParamsMismatchError("params.json não corresponde ao hash gravado")
    return params


def serialize_secret_key(sk, params):
    return _pack_header(params, ROLE_SECRET_KEY) + _residue_bytes(sk.poly.residues)


def deserialize_secret_key(data, params):
    domain, _, pos = _unpack_header(data, params, ROLE_SECRET_KEY)
    poly, _ = _read_poly(data, pos, params.basis, domain)
    return SecretKey(params.params_id, poly)


def serialize_public_key(pk, params):
    return _pack_header(params, ROLE_PUBLIC_KEY, Domain.NTT) + _residue_bytes(pk.b.residues) + _residue_bytes(pk.a.residues)


def deserialize_public_key(data, params):
    domain, _, pos = _unpack_header(data, params, ROLE_PUBLIC_KEY)
    b, pos = _read_poly(data, pos, params.basis, domain)
    a, _ = _read_poly(data, pos, params.basis, domain)
    return PublicKey(params.params_id, b, a)


def serialize_galois_keys(keys, params):
    """Só as metades `b` são gravadas; as metades uniformes saem da semente."""
    chunks = [_pack_header(params, ROLE_GALOIS_KEYS, Domain.NTT), _COUNT.pack(len(keys.keys))]
    for step in keys.steps:
        key = keys.keys[step]
        chunks.append(_GALOIS_ENTRY.pack(step, key.exponent, key.b.shape[0], key.seed.to_bytes(16, "little")))
        chunks.append(_residue_bytes(key.b))
    return b"".join(chunks)


def deserialize_galois_keys(data, params):
    _, _, pos = _unpack_header(data, params, ROLE_GALOIS_KEYS)
    if len(data) < pos + _COUNT.size:
        raise TruncatedContainerError("Contagem de chaves truncada")
    (count,) = _COUNT.unpack_from(data, pos)
    pos += _COUNT.size
    basis = params.basis
    keys = {}
    for _ in range(count):
        if len(data) < pos + _GALOIS_ENTRY.size:
            raise TruncatedContainerError("Entrada de chave de Galois truncada")
        step, exponent, digits, seed = _GALOIS_ENTRY.unpack_from(data, pos)
        pos += _GALOIS_ENTRY.size
        b, pos = _read_residues(data, pos, (digits, basis.size, basis.degree))
        keys[step] = KeySwitchKey(step=step, exponent=exponent, seed=int.from_bytes(seed, "little"), b=b, basis=basis)
    return GaloisKeySet(params.params_id, MappingProxyType(keys))


@dataclass
class KeyBundle:
    params: SchemeParams
    secret_key: SecretKey
    public_key: PublicKey
    galois_keys: GaloisKeySet
    profile: str = None


def _atomic_write(path, payload):
    """Grava em arquivo temporário no mesmo diretório, fsync e os.replace."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def keys_exist(key_dir):
    key_dir = Path(key_dir)
    return any((key_dir / name).exists() for name in (PARAMS_FILE, SECRET_KEY_FILE, PUBLIC_KEY_FILE, GALOIS_KEY_FILE))


def save_keys(bundle, key_dir):
    """
    Grava params.json e os três arquivos de chave. secret.key é sensível:
    fica com permissão 0600.
    """
    key_dir = Path(key_dir)
    key_dir.mkdir(parents=True, exist_ok=True)
    params = bundle.params
    _atomic_write(key_dir / PARAMS_FILE, json.dumps(params_to_dict(params, bundle.profile), indent=2).encode("utf-8"))
    _atomic_write(key_dir / SECRET_KEY_FILE, serialize_secret_key(bundle.secret_key, params))
    os.chmod(key_dir / SECRET_KEY_FILE, 0o600)
    _atomic_write(key_dir / PUBLIC_KEY_FILE, serialize_public_key(bundle.public_key, params))
    _atomic_write(key_dir / GALOIS_KEY_FILE, serialize_galois_keys(bundle.galois_keys, params))
    logger.debug(f"Chaves gravadas em {key_dir}")


def load_params(key_dir):
    path = Path(key_dir) / PARAMS_FILE
    if not path.exists():
        raise NotFoundError(f"Arquivo de parâmetros ausente: {path}. Execute 'hermes keygen'.")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContainerError(f"params.json corrompido: {exc}") from None
    return params_from_dict(data), data.get("profile")


def _read_key_file(path):
    if not path.exists():
        raise NotFoundError(f"Arquivo de chave ausente: {path}")
    return path.read_bytes()


def load_keys(key_dir, need_secret=True):
    """
    Carrega parâmetros e chaves de `key_dir`.

    Raises:
        NotFoundError: Arquivo ausente.
        ParamsMismatchError: Chave gerada sob outros parâmetros.
    """
    key_dir = Path(key_dir)
    params, profile = load_params(key_dir)
    secret_key = None
    if need_secret or (key_dir / SECRET_KEY_FILE).exists():
        secret_key = deserialize_secret_key(_read_key_file(key_dir / SECRET_KEY_FILE), params)
    public_key = deserialize_public_key(_read_key_file(key_dir / PUBLIC_KEY_FILE), params)
    galois_keys = deserialize_galois_keys(_read_key_file(key_dir / GALOIS_KEY_FILE), params)
    return KeyBundle(params, secret_key, public_key, galois_keys, profile)


# ----------------------------------------------------------------- catalog


def assign_group_ids(count, group_size):
    """Id do grupo de cada tupla: índice ÷ tamanho do grupo."""
    if group_size <= 0:
        raise ParameterError(f"Tamanho de grupo inválido: {group_size}")
    return np.arange(count, dtype=np.int64) // group_size


def partition(values, group_size):
    """Divide os valores em fatias consecutivas por id de grupo."""
    values = list(values)
    ids = assign_group_ids(len(values), group_size)
    groups = {}
    for gid, value in zip(ids.tolist(), values):
        groups.setdefault(gid, []).append(value)
    return groups


@dataclass
class TableCatalog:
    """Tabela carregada: manifesto e vetores empacotados por id de grupo."""

    manifest: TableManifest
    groups: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.manifest.table

    @property
    def params_id(self):
        return self.manifest.params_id


class CatalogStore:
    """
    Catálogo de tabelas num diretório.

    Escritor único por tabela: cada escrita gera um novo arquivo de dados
    `<tabela>.<geração>.hpt` e troca o manifesto atomicamente. Leitores veem
    sempre a geração antiga ou a nova inteira.

    A coleta mantém a geração corrente e a imediatamente anterior: um leitor
    que leu o manifesto k-1 ainda encontra o arquivo de dados dele enquanto o
    escritor confirma k. As leituras passam por `_snapshot`, que relê o
    manifesto se o arquivo sumir entre as duas leituras.
    """

    KEEP_GENERATIONS = 2
    SNAPSHOT_ATTEMPTS = 3

    def __init__(self, root, params):
        self.root = Path(root)
        self.params = params
        self.root.mkdir(parents=True, exist_ok=True)

    # -------------------------------------------------------------- paths

    def _check_name(self, name):
        if not TABLE_NAME.match(name or ""):
            raise ParameterError(f"Nome de tabela inválido: {name!r}")
        return name

    def _manifest_path(self, name):
        return self.root / f"{name}.manifest.json"

    def _data_path(self, name, generation):
        return self.root / f"{name}.{generation}.hpt"

    def exists(self, name):
        return self._manifest_path(self._check_name(name)).exists()

    def list_tables(self):
        return sorted(p.name[: -len(".manifest.json")] for p in self.root.glob("*.manifest.json"))

    def manifest(self, name):
        path = self._manifest_path(self._check_name(name))
        if not path.exists():
            raise NotFoundError(f"Tabela '{name}' não encontrada")
        try:
            manifest = TableManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise ContainerError(f"Manifesto de '{name}' inválido: {exc}") from None
        if manifest.params_id != self.params.params_id.hex():
            raise ParamsMismatchError(f"Tabela '{name}' cifrada sob outros parâmetros")
        return manifest

    # ------------------------------------------------------------- writes

    def _commit(self, manifest, blobs):
        """
        Grava `blobs` (group_id → (L, bytes)) como nova geração e troca o manifesto.
        """
        name = manifest.table
        generation = manifest.generation + 1 if self._manifest_path(name).exists() else manifest.generation
        data_path = self._data_path(name, generation)
        records, offset = [], 0
        with open(data_path, "wb") as fh:
            for group_id in sorted(blobs):
                length, blob = blobs[group_id]
                fh.write(blob)
                records.append(GroupRecord(group_id=group_id, length=length, offset=offset, size=len(blob)))
                offset += len(blob)
            fh.flush()
            os.fsync(fh.fileno())
        new_manifest = manifest.model_copy(update={
            "generation": generation,
            "data_file": data_path.name,
            "groups": records,
            "tuple_count": sum(r.length for r in records),
            "updated_at": datetime.now(),
        })
        TableManifest.model_validate(new_manifest.model_dump())
        _atomic_write(self._manifest_path(name), new_manifest.model_dump_json(indent=2).encode("utf-8"))
        logger.debug(f"Tabela '{name}' confirmada na geração {generation} ({len(records)} grupos)")
        self._collect_garbage(name, generation)
        return new_manifest

    def _collect_garbage(self, name, current):
        """
        Remove arquivos de dados de gerações anteriores a `current - 1`.
        Com current=None remove todos (drop).
        """
        prefix = f"{name}."
        for path in self.root.glob(f"{name}.*.hpt"):
            token = path.name[len(prefix):-len(".hpt")]
            if not token.isdigit():
                continue
            if current is None or int(token) <= current - self.KEEP_GENERATIONS:
                path.unlink(missing_ok=True)

    def _blob(self, pv):
        return pv.length, serialize_ciphertext(pv.ct, self.params)

    def create_table(self, name, group_size, packs=(), overwrite=False):
        """
        Cria (ou substitui, com overwrite) uma tabela com os pacotes dados.

        Raises:
            ParameterError: Tabela existente sem overwrite, ou group_size > n-1.
        """
        self._check_name(name)
        if self.exists(name) and not overwrite:
            raise ParameterError(f"Tabela '{name}' já existe")
        if group_size > self.params.capacity:
            raise ParameterError(f"Tamanho de grupo {group_size} excede a capacidade {self.params.capacity}")
        generation = self.manifest(name).generation if self.exists(name) else 0
        manifest = TableManifest(
            table=name,
            params_id=self.params.params_id.hex(),
            group_size=group_size,
            slot_count=self.params.slot_count,
            generation=generation,
            data_file=self._data_path(name, generation).name,
        )
        return self._commit(manifest, {pv.group_id: self._blob(pv) for pv in packs})

    def put_groups(self, name, packs):
        """Substitui ou acrescenta grupos numa única troca de manifesto."""
        manifest, data = self._snapshot(name)
        blobs = self._split_blobs(manifest, data)
        for pv in packs:
            if pv.ct.params_id != self.params.params_id:
                raise ParamsMismatchError("Pacote cifrado sob outros parâmetros")
            blobs[pv.group_id] = self._blob(pv)
        return self._commit(manifest, blobs)

    def put_group(self, name, pv):
        return self.put_groups(name, [pv])

    def drop_table(self, name):
        manifest = self.manifest(name)
        self._manifest_path(name).unlink()
        self._collect_garbage(name, current=None)
        logger.debug(f"Tabela '{name}' removida ({len(manifest.groups)} grupos)")

    # -------------------------------------------------------------- reads

    def _read_data(self, manifest):
        path = self.root / manifest.data_file
        if not path.exists():
            raise NotFoundError(f"Arquivo de dados ausente: {path}")
        return path.read_bytes()

    def _snapshot(self, name):
        """
        Lê manifesto e arquivo de dados da mesma geração.

        Se o arquivo de dados sumiu entre as duas leituras (coleta feita por
        um escritor concorrente), relê o manifesto e tenta de novo.

        Raises:
            NotFoundError: Tabela inexistente, ou arquivo de dados ausente
                depois de SNAPSHOT_ATTEMPTS leituras.
        """
        for attempt in range(1, self.SNAPSHOT_ATTEMPTS + 1):
            manifest = self.manifest(name)
            if not manifest.groups:
                return manifest, b""
            try:
                return manifest, self._read_data(manifest)
            except NotFoundError:
                if attempt == self.SNAPSHOT_ATTEMPTS:
                    raise
                logger.debug(f"Geração {manifest.generation} de '{name}' coletada durante a leitura; relendo")

    def _split_blobs(self, manifest, data):
        return {
            g.group_id: (g.length, data[g.offset:g.offset + g.size])
            for g in manifest.groups
        }

    def _read_blobs(self, manifest):
        if not manifest.groups:
            return {}
        return self._split_blobs(manifest, self._read_data(manifest))

    def _to_pack(self, record, blob):
        ct = deserialize_ciphertext(blob, self.params)
        return PackedVector(ct, record.group_id, record.length, self.params.slot_count)

    def list_groups(self, name):
        return list(self.manifest(name).groups)

    def get_group(self, name, group_id):
        """
        Raises:
            NotFoundError: Tabela ou grupo inexistente.
        """
        manifest, data = self._snapshot(name)
        record = manifest.group(group_id)
        if record is None:
            raise NotFoundError(f"Grupo {group_id} não existe na tabela '{name}'")
        if len(data) < record.offset + record.size:
            raise TruncatedContainerError(f"Arquivo de dados de '{name}' truncado")
        return self._to_pack(record, data[record.offset:record.offset + record.size])

    def load_table(self, name):
        manifest, data = self._snapshot(name)
        groups = {g.group_id: self._to_pack(g, data[g.offset:g.offset + g.size]) for g in manifest.groups}
        return TableCatalog(manifest, groups)

    def group_size_bytes(self, name, group_id):
        manifest = self.manifest(name)
        record = manifest.group(group_id)
        if record is None:
            raise NotFoundError(f"Grupo {group_id} não existe na tabela '{name}'")
        return record.size

    def describe(self, name, group_id, engine):
        """Descritor de depuração: `tabela/grupo (sum = σ, size = bytes, L = ...)`."""
        pv = self.get_group(name, group_id)
        total = engine.extract_sum(pv)
        size = self.group_size_bytes(name, group_id)
        return f"{name}/{group_id} (sum = {total}, size = {size}, L = {pv.length})"
