"""
Execuções em N = 8192 (n4096) e N = 16384 (prod) sobre o hg38 sintético.
"""

import numpy as np
import pytest

from src.models.config import get_profile
from src.services import bench_harness
from src.services.bfv import BfvContext, power_of_two_steps
from src.services.data_processor import load_dataset
from src.services.hermes_pack import HermesEngine

pytestmark = pytest.mark.slow

T = 65537


def build_engine(profile_name, steps, seed=41, **kwargs):
    params = get_profile(profile_name).build()
    context = BfvContext(params, seed=seed)
    sk, pk = context.keygen(seed=seed + 1)
    galois = context.gen_rotation_keys(sk, steps, seed=seed + 2)
    return HermesEngine(context, pk, galois, secret_key=sk, **kwargs)


@pytest.fixture(scope="module")
def n4096():
    return build_engine("n4096", power_of_two_steps(4096) + [-1])


@pytest.fixture(scope="module")
def prod():
    return build_engine("prod", [1, -1])


@pytest.fixture(scope="module")
def hg38():
    return load_dataset("hg38", T, seed=0)[1]


def test_rotation_counts_at_4096(n4096, hg38):
    first = n4096.pack_group(hg38[:4095], 0)
    second = n4096.pack_group(hg38[4095:8190], 1)
    mark = n4096.trace.mark()
    total = n4096.global_sum([first, second])
    assert n4096.trace.rotations(mark) == 0
    assert n4096.extract_sum(total) == sum(hg38[:8190]) % T

    plain = n4096.pack_plain(hg38[:4096])
    mark = n4096.trace.mark()
    folded = n4096.rotate_baseline_sum(plain)
    assert n4096.trace.rotations(mark) == 12
    assert int(n4096.decrypt_pack(folded)[0]) == sum(hg38[:4096]) % T


def test_aggregation_speedup_at_4096(n4096, hg38):
    report = bench_harness.run_aggregation_bench(n4096, hg38, 4095, dataset="hg38", profile="n4096")
    assert report.packed_rotations == 0
    assert report.baseline_rotations == 12
    assert report.oracle_equivalent is True
    assert bench_harness.check_speedup(report) >= bench_harness.SPEEDUP_FLOORS["aggregate"]


def test_encrypt_speedup_at_group_4096(prod, hg38):
    report = bench_harness.run_encrypt_bench(prod, hg38, 4096, dataset="hg38", profile="prod", singular_limit=200)
    assert report.oracle_equivalent is True
    assert bench_harness.check_speedup(report) >= bench_harness.SPEEDUP_FLOORS["encrypt"]


def test_group_size_sweep_trend_and_ratio(prod, hg38):
    reports = bench_harness.run_group_size_sweep(
        prod, hg38, sizes=bench_harness.SWEEP_SIZES, ops=0, repeats=3, include_updates=False,
        strict=True, dataset="hg38", profile="prod",
    )
    assert [r.group_size for r in reports] == list(bench_harness.SWEEP_SIZES)
    assert bench_harness.check_sweep_ratio(reports) >= bench_harness.SWEEP_RATIO_FLOOR


def test_masked_chains_decrypt_while_budget_is_positive(prod):
    engine = HermesEngine(prod.context, prod.public_key, prod.galois_keys,
                          secret_key=prod.secret_key, refresh_floor_bits=None)
    n = engine.slot_count
    rng = np.random.default_rng(77)
    checked = 0
    for _ in range(50):
        shadow = [int(v) for v in rng.integers(0, T, size=int(rng.integers(1, 200)))]
        pv = engine.pack_group(shadow)
        for _ in range(int(rng.integers(1, 5))):
            if shadow and rng.random() < 0.5:
                index = int(rng.integers(0, len(shadow)))
                pv = engine.delete_at(pv, index, shadow.pop(index))
            else:
                index, v = int(rng.integers(0, len(shadow) + 1)), int(rng.integers(0, T))
                pv = engine.insert_at(pv, index, v)
                shadow.insert(index, v)
            if engine.estimated_budget(pv) > 0:
                got = [int(x) for x in engine.decrypt_pack(pv)]
                assert got[:len(shadow)] == shadow
                assert not any(got[len(shadow):n - 1])
                assert got[n - 1] == sum(shadow) % T
                checked += 1
        engine.trace.reset()
    assert checked > 0
    assert engine.refresh_count == 0
