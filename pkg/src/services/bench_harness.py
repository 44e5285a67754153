"""
Suítes de benchmark e oráculo em claro.

Cada suíte executa a mesma carga lógica no caminho empacotado e no caminho
de comparação, mede com relógio monotônico e confere o estado final
decifrado contra o PlaintextOracle.
"""

import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import psutil
from tqdm import tqdm

from src.models.bench import BenchReport
from src.services.catalog_store import partition
from src.services.errors import BenchAssertionError, OracleDivergenceError, ParameterError
from src.services.hermes_pack import InsertMode

logger = logging.getLogger(__name__)

DEFAULT_OPS = 100
SWEEP_SIZES = (128, 256, 512, 1024, 2048, 4096)

# Pisos de aceitação em escala de produção (n >= 4096)
SWEEP_RATIO_FLOOR = 4.0
SPEEDUP_FLOORS = {"encrypt": 50.0, "aggregate": 2.0}
FLOOR_MIN_SLOTS = 4096


def monitor_memory_usage():
    """Retorna o uso atual de memória em MB."""
    process = psutil.Process(os.getpid())
    return process.memory_info().rss / (1024 * 1024)


def _elapsed_ms(start):
    return (time.perf_counter() - start) * 1000


class PlaintextOracle:
    """Espelho em claro de cada grupo: valores ativos e soma mod t."""

    def __init__(self, slot_count, plain_modulus):
        self.slot_count = slot_count
        self.plain_modulus = plain_modulus
        self.groups = {}

    def pack(self, group_id, values):
        self.groups[group_id] = [int(v) for v in values]

    def insert(self, group_id, index, value):
        self.groups[group_id].insert(index, int(value))

    def append(self, group_id, value):
        self.groups[group_id].append(int(value))

    def delete(self, group_id, index):
        """Remove e devolve o valor do slot; em grupo vazio não faz nada e devolve None."""
        values = self.groups[group_id]
        if not values:
            return None
        return values.pop(index)

    def length(self, group_id):
        return len(self.groups[group_id])

    def value(self, group_id, index):
        return self.groups[group_id][index]

    def group_total(self, group_id):
        return sum(self.groups[group_id]) % self.plain_modulus

    def total(self):
        return sum(self.group_total(g) for g in self.groups) % self.plain_modulus

    def slots(self, group_id):
        """Vetor de slots esperado: valores, zeros e σ no slot n-1."""
        expected = np.zeros(self.slot_count, dtype=np.int64)
        values = self.groups[group_id]
        expected[:len(values)] = values
        expected[-1] = self.group_total(group_id)
        return expected

    def matches(self, group_id, decrypted):
        return bool(np.array_equal(np.asarray(decrypted, dtype=np.int64), self.slots(group_id)))


def _initial_group(values, size):
    return list(values[:size])


def _check_pack(engine, oracle, pv):
    return oracle.matches(pv.group_id, engine.decrypt_pack(pv)) and pv.length == oracle.length(pv.group_id)


def _singular_decrypt(engine, cts):
    return [int(engine.decrypt_pack(ct)[0]) for ct in cts]


def run_encrypt_bench(engine, values, group_size, dataset="custom", profile="custom",
                      singular_limit=None, parallel=False, verify=True, progress=False):
    """
    Cifragem empacotada (uma cifra por grupo) contra singular (uma por tupla).

    Args:
        engine (HermesEngine): Motor configurado.
        values (list): Tuplas já validadas em Z_t.
        group_size (int): Tuplas por grupo.
        singular_limit (int): Se definido, mede só essa quantidade de cifragens
            singulares e projeta o total pela média medida.
        parallel (bool): Cifra os grupos numa pool de threads (relatório marcado como paralelo).

    Returns:
        BenchReport: Totais, médias por tupla e speedup.
    """
    if group_size > engine.capacity:
        raise ParameterError(f"Tamanho de grupo {group_size} excede a capacidade {engine.capacity}")
    groups = partition(values, group_size)
    mem_before = monitor_memory_usage()

    start = time.perf_counter()
    if parallel:
        seeds = {gid: int.from_bytes(os.urandom(16), "little") for gid in groups}
        with ThreadPoolExecutor() as pool:
            packs = list(pool.map(lambda gid: engine.pack_group(groups[gid], gid, seed=seeds[gid]), sorted(groups)))
    else:
        packs = [engine.pack_group(groups[gid], gid) for gid in tqdm(sorted(groups), desc="empacotado", disable=not progress)]
    packed_ms = _elapsed_ms(start)

    sample = values if singular_limit is None else values[:singular_limit]
    start = time.perf_counter()
    singles = [engine.encrypt_singular(v) for v in tqdm(sample, desc="singular", disable=not progress)]
    singular_ms = _elapsed_ms(start)
    if sample and len(sample) < len(values):
        singular_ms = singular_ms / len(sample) * len(values)
        logger.info(f"Singular projetado a partir de {len(sample)} de {len(values)} cifragens")

    equivalent = None
    if verify and engine.secret_key is not None:
        oracle = PlaintextOracle(engine.slot_count, engine.params.plain_modulus)
        for gid, chunk in groups.items():
            oracle.pack(gid, chunk)
        equivalent = all(_check_pack(engine, oracle, pv) for pv in packs)
        equivalent = equivalent and _singular_decrypt(engine, singles) == list(sample)
        if not equivalent:
            raise OracleDivergenceError("Benchmark de cifragem divergiu do oráculo")

    return BenchReport(
        suite="encrypt",
        dataset=dataset,
        profile=profile,
        slot_count=engine.slot_count,
        tuple_count=len(values),
        group_size=group_size,
        op_count=len(values),
        packed_total_ms=packed_ms,
        baseline_total_ms=singular_ms if values else None,
        oracle_equivalent=equivalent,
        parallel=parallel,
        memory_mb=monitor_memory_usage() - mem_before,
    )


def _update_workload(values, group_size, capacity, ops, insert):
    size = min(group_size, capacity - ops) if insert else min(group_size, capacity)
    if size < 0:
        raise ParameterError(f"{ops} inserções não cabem num pacote de capacidade {capacity}")
    return _initial_group(values, size)


def run_insert_bench(engine, values, group_size, ops=DEFAULT_OPS, seed=0, mode=InsertMode.PLAIN,
                     dataset="custom", profile="custom", progress=False):
    """
    `ops` inserções em posições aleatórias (semente fixa) no grupo 1 do conjunto,
    no modo empacotado e no singular (lista de cifras de um slot).
    """
    initial = _update_workload(values, group_size, engine.capacity, ops, insert=True)
    rng = np.random.default_rng(seed)
    high = max(values) + 1 if values else engine.params.plain_modulus
    oracle = PlaintextOracle(engine.slot_count, engine.params.plain_modulus)
    oracle.pack(0, initial)
    script = []
    length = len(initial)
    for _ in range(ops):
        index = int(rng.integers(0, length + 1))
        script.append((index, int(rng.integers(0, high))))
        length += 1

    pv = engine.pack_group(initial, 0)
    singles = [engine.encrypt_singular(v) for v in initial]
    refreshes_before = engine.refresh_count
    mark = engine.trace.mark()

    start = time.perf_counter()
    for index, value in tqdm(script, desc="insert empacotado", disable=not progress):
        pv = engine.insert_at(pv, index, value, mode)
    packed_ms = _elapsed_ms(start)
    rotations = engine.trace.rotations(mark)

    start = time.perf_counter()
    for index, value in script:
        singles.insert(index, engine.encrypt_singular(value))
    singular_ms = _elapsed_ms(start)

    for index, value in script:
        oracle.insert(0, index, value)
    equivalent = None
    if engine.secret_key is not None:
        equivalent = _check_pack(engine, oracle, pv) and _singular_decrypt(engine, singles) == oracle.groups[0]
        if not equivalent:
            raise OracleDivergenceError("Benchmark de inserção divergiu do oráculo", seed=seed, prefix=script)

    return BenchReport(
        suite="insert",
        dataset=dataset,
        profile=profile,
        slot_count=engine.slot_count,
        tuple_count=len(initial),
        group_size=group_size,
        op_count=ops,
        packed_total_ms=packed_ms,
        baseline_total_ms=singular_ms,
        packed_rotations=rotations,
        baseline_rotations=0,
        refreshes=engine.refresh_count - refreshes_before,
        oracle_equivalent=equivalent,
    )


def run_delete_bench(engine, values, group_size, ops=DEFAULT_OPS, seed=0,
                     dataset="custom", profile="custom", progress=False):
    """
    `ops` remoções em posições aleatórias; quando o grupo esvazia, as remoções
    seguintes são no-ops sobre o pacote inerte.
    """
    initial = _update_workload(values, group_size, engine.capacity, ops, insert=False)
    rng = np.random.default_rng(seed)
    oracle = PlaintextOracle(engine.slot_count, engine.params.plain_modulus)
    oracle.pack(0, initial)
    script = []
    for _ in range(ops):
        length = oracle.length(0)
        index = int(rng.integers(0, length)) if length else 0
        script.append((index, oracle.delete(0, index) if length else None))

    pv = engine.pack_group(initial, 0)
    singles = [engine.encrypt_singular(v) for v in initial]
    refreshes_before = engine.refresh_count
    mark = engine.trace.mark()

    start = time.perf_counter()
    for index, value in tqdm(script, desc="delete empacotado", disable=not progress):
        pv = engine.delete_at(pv, index, value or 0)
    packed_ms = _elapsed_ms(start)
    rotations = engine.trace.rotations(mark)

    start = time.perf_counter()
    for index, value in script:
        if value is not None:
            singles.pop(index)
    singular_ms = _elapsed_ms(start)

    equivalent = None
    if engine.secret_key is not None:
        equivalent = _check_pack(engine, oracle, pv) and _singular_decrypt(engine, singles) == oracle.groups[0]
        if not equivalent:
            raise OracleDivergenceError("Benchmark de remoção divergiu do oráculo", seed=seed, prefix=script)

    return BenchReport(
        suite="delete",
        dataset=dataset,
        profile=profile,
        slot_count=engine.slot_count,
        tuple_count=len(initial),
        group_size=group_size,
        op_count=ops,
        packed_total_ms=packed_ms,
        baseline_total_ms=singular_ms,
        packed_rotations=rotations,
        baseline_rotations=0,
        refreshes=engine.refresh_count - refreshes_before,
        oracle_equivalent=equivalent,
    )


def run_group_size_sweep(engine, values, sizes=SWEEP_SIZES, ops=DEFAULT_OPS, repeats=3, seed=0,
                         include_updates=True, strict=True, dataset="custom", profile="custom", progress=False):
    """
    Para cada tamanho de grupo: mediana de `repeats` cifragens empacotadas do
    conjunto inteiro e totais de `ops` inserções e remoções.

    Com strict=False um total crescente só gera aviso no log.

    Raises:
        ParameterError: Tamanhos fora de ordem ou acima de n-1.
        BenchAssertionError: Com strict, se o total de cifragem crescer com o tamanho.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ParameterError("Tamanhos de grupo devem estar em ordem crescente")
    if sizes and sizes[-1] > engine.capacity:
        raise ParameterError(f"Tamanho de grupo {sizes[-1]} excede a capacidade {engine.capacity}")
    reports = []
    for size in tqdm(sizes, desc="varredura", disable=not progress):
        samples = []
        groups = partition(values, size)
        for _ in range(repeats):
            start = time.perf_counter()
            for gid in sorted(groups):
                engine.pack_group(groups[gid], gid)
            samples.append(_elapsed_ms(start))
        report = BenchReport(
            suite="sweep",
            dataset=dataset,
            profile=profile,
            slot_count=engine.slot_count,
            tuple_count=len(values),
            group_size=size,
            op_count=len(values),
            baseline="none",
            packed_total_ms=statistics.median(samples),
            samples_ms=samples,
        )
        if include_updates:
            inserts = run_insert_bench(engine, values, size, ops, seed)
            deletes = run_delete_bench(engine, values, size, ops, seed)
            report = report.model_copy(update={
                "insert_total_ms": inserts.packed_total_ms,
                "delete_total_ms": deletes.packed_total_ms,
                "oracle_equivalent": inserts.oracle_equivalent and deletes.oracle_equivalent,
            })
        logger.info(f"Grupo {size}: cifragem {report.packed_total_ms:.1f} ms")
        reports.append(report)

    totals = [r.packed_total_ms for r in reports]
    increasing = [(a.group_size, b.group_size) for a, b in zip(reports, reports[1:]) if b.packed_total_ms > a.packed_total_ms]
    if increasing:
        message = f"Total de cifragem cresceu entre os tamanhos {increasing}: {totals}"
        if strict:
            raise BenchAssertionError(message)
        logger.warning(message)
    return reports


def run_aggregation_bench(engine, values, group_size, dataset="custom", profile="custom"):
    """
    Soma sem rotações (global_sum dos pacotes com σ) contra a árvore de
    rotações sobre pacotes sem slot de soma, por cifra.

    Raises:
        ParameterError: Menos de 4 grupos.
    """
    groups = partition(values, group_size)
    if len(groups) < 4:
        raise ParameterError(f"A agregação exige ao menos 4 grupos (há {len(groups)})")
    packs = [engine.pack_group(groups[gid], gid) for gid in sorted(groups)]
    plain_packs = [engine.pack_plain(groups[gid], gid) for gid in sorted(groups)]
    t = engine.params.plain_modulus

    mark = engine.trace.mark()
    start = time.perf_counter()
    total_ct = engine.global_sum(packs)
    packed_ms = _elapsed_ms(start)
    packed_rotations = engine.trace.rotations(mark)

    mark = engine.trace.mark()
    start = time.perf_counter()
    folded = [engine.rotate_baseline_sum(pv) for pv in plain_packs]
    baseline_ct = engine.global_sum([pv.with_ct(ct) for pv, ct in zip(plain_packs, folded)])
    baseline_ms = _elapsed_ms(start)
    baseline_rotations = engine.trace.rotations(mark) // len(plain_packs)

    equivalent = None
    if engine.secret_key is not None:
        expected = sum(values) % t
        packed_total = engine.extract_sum(total_ct)
        baseline_total = int(engine.decrypt_pack(baseline_ct)[0])
        equivalent = packed_total == expected and baseline_total == expected
        if not equivalent:
            raise OracleDivergenceError(
                f"Agregação divergiu do oráculo: empacotada {packed_total}, rotações {baseline_total}, esperado {expected}")

    count = len(packs)
    return BenchReport(
        suite="aggregate",
        dataset=dataset,
        profile=profile,
        slot_count=engine.slot_count,
        tuple_count=len(values),
        group_size=group_size,
        op_count=count,
        baseline="rotate",
        packed_total_ms=packed_ms,
        baseline_total_ms=baseline_ms,
        packed_rotations=packed_rotations,
        baseline_rotations=baseline_rotations,
        oracle_equivalent=equivalent,
    )


def check_speedup(report, floor=None):
    """
    Confere o speedup de um relatório contra o piso da suíte.

    Raises:
        ParameterError: Suíte sem piso definido.
        BenchAssertionError: Speedup ausente ou abaixo do piso.
    """
    if floor is None:
        if report.suite not in SPEEDUP_FLOORS:
            raise ParameterError(f"Suíte '{report.suite}' não tem piso de speedup")
        floor = SPEEDUP_FLOORS[report.suite]
    speedup = report.speedup
    if speedup is None or speedup < floor:
        shown = "indefinido" if speedup is None else f"{speedup:.2f}x"
        raise BenchAssertionError(
            f"Speedup de {report.suite} ({report.dataset}, grupo {report.group_size}) = {shown}, piso {floor}x")
    return speedup


def check_sweep_ratio(reports, floor=SWEEP_RATIO_FLOOR):
    """
    Razão entre o total de cifragem do menor e do maior tamanho de grupo.

    Raises:
        ParameterError: Menos de dois pontos na varredura.
        BenchAssertionError: Razão abaixo do piso.
    """
    if len(reports) < 2:
        raise ParameterError("A razão da varredura exige ao menos dois tamanhos")
    first, last = reports[0], reports[-1]
    ratio = first.packed_total_ms / last.packed_total_ms if last.packed_total_ms > 0 else float("inf")
    if ratio < floor:
        raise BenchAssertionError(
            f"Cifragem com grupo {first.group_size} só {ratio:.2f}x mais lenta que com {last.group_size} (piso {floor}x)")
    return ratio


def check_floors(reports):
    """
    Aplica os pisos a um conjunto de relatórios: speedup de encrypt e
    aggregate, e razão da varredura. Relatórios com n < FLOOR_MIN_SLOTS são
    ignorados.

    Returns:
        dict: Rótulo -> valor medido para cada piso conferido.
    """
    checked = {}
    sweep = []
    for report in reports:
        if report.slot_count < FLOOR_MIN_SLOTS:
            continue
        if report.suite in SPEEDUP_FLOORS:
            checked[f"{report.suite}:{report.dataset}"] = check_speedup(report)
        elif report.suite == "sweep":
            sweep.append(report)
    if len(sweep) >= 2:
        checked["sweep"] = check_sweep_ratio(sweep)
    return checked


@dataclass
class FuzzResult:
    seed: int
    op_count: int
    passed: bool = True
    executed: list = field(default_factory=list)
    failure: str = None

    @property
    def prefix(self):
        """Menor prefixo de operações que reproduz a divergência."""
        return self.executed if not self.passed else []

    def raise_for_failure(self):
        if not self.passed:
            raise OracleDivergenceError(
                f"Divergência após {len(self.executed)} operações (seed={self.seed}): {self.failure}",
                seed=self.seed,
                prefix=self.prefix,
            )


FUZZ_OPS = ("pack", "insert", "insert_encrypted", "append", "delete", "sum")


def oracle_fuzz(engine, seed, op_count, max_groups=3, value_high=None, modes=(InsertMode.PLAIN, InsertMode.ENCRYPTED)):
    """
    Executa uma sequência aleatória de operações no motor e no oráculo,
    conferindo slot a slot (e a invariante da soma) após cada passo.

    As operações da sequência são descartadas do `engine.trace` ao final,
    para que milhares de sequências no mesmo motor não acumulem registro.

    Returns:
        FuzzResult: passed=False com o prefixo executado na primeira divergência.
    """
    if engine.secret_key is None:
        raise ParameterError("O fuzz precisa da chave secreta")
    mark = engine.trace.mark()
    try:
        return _run_fuzz(engine, seed, op_count, max_groups, value_high, modes)
    finally:
        engine.trace.truncate(mark)


def _run_fuzz(engine, seed, op_count, max_groups, value_high, modes):
    rng = np.random.default_rng(seed)
    n, t = engine.slot_count, engine.params.plain_modulus
    high = min(value_high or t, t)
    oracle = PlaintextOracle(n, t)
    packs = {}
    result = FuzzResult(seed=seed, op_count=op_count)
    allowed = [op for op in FUZZ_OPS if op != "insert_encrypted" or InsertMode.ENCRYPTED in modes]

    for _ in range(op_count):
        op = allowed[int(rng.integers(0, len(allowed)))] if packs else "pack"
        if op == "pack" and len(packs) >= max_groups:
            op = "append"
        gid = int(rng.choice(sorted(packs))) if packs and op != "pack" else len(packs)
        step = {"op": op, "group": gid}
        if op == "pack":
            values = rng.integers(0, high, size=int(rng.integers(0, n))).tolist()
            step["values"] = values
            packs[gid] = engine.pack_group(values, gid)
            oracle.pack(gid, values)
        elif op in ("insert", "insert_encrypted", "append"):
            length = oracle.length(gid)
            if length >= n - 1:
                op = step["op"] = "delete"
            else:
                value = int(rng.integers(0, high))
                step["value"] = value
                if op == "append":
                    packs[gid] = engine.append(packs[gid], value)
                    oracle.append(gid, value)
                else:
                    index = int(rng.integers(0, length + 1))
                    mode = InsertMode.ENCRYPTED if op == "insert_encrypted" else InsertMode.PLAIN
                    step.update(index=index, mode=mode.value)
                    packs[gid] = engine.insert_at(packs[gid], index, value, mode)
                    oracle.insert(gid, index, value)
        if op == "delete":
            length = oracle.length(gid)
            index = int(rng.integers(0, length)) if length else 0
            value = oracle.delete(gid, index)
            step.update(index=index, value=value)
            packs[gid] = engine.delete_at(packs[gid], index, value or 0)
        result.executed.append(step)

        if op == "sum":
            got = engine.extract_sum(engine.global_sum(packs.values()))
            if got != oracle.total():
                result.passed, result.failure = False, f"soma global {got} != {oracle.total()}"
                break
            continue
        decrypted = engine.decrypt_pack(packs[gid])
        if not oracle.matches(gid, decrypted) or packs[gid].length != oracle.length(gid):
            result.passed, result.failure = False, f"grupo {gid}: {decrypted.tolist()} != {oracle.slots(gid).tolist()}"
            break
        length = packs[gid].length
        if int(decrypted[n - 1]) != int(decrypted[:length].sum()) % t:
            result.passed, result.failure = False, f"invariante da soma violada no grupo {gid}"
            break
    if not result.passed:
        logger.warning(f"Fuzz falhou (seed={seed}) após {len(result.executed)} operações")
    return result
