import logging
from fractions import Fraction

import pytest

from src.services.data_processor import (
    HG38_HIGH,
    HG38_TUPLES,
    DataProcessor,
    load_dataset,
    parse_scale,
    synthesize_uniform,
)
from src.services.errors import IngestError, NotFoundError, ParameterError

T = 65537


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_csv_with_header(tmp_path):
    path = write_csv(tmp_path, "daily_cases\n10\n20\n30\n")
    processor = DataProcessor(T)
    assert processor.load_csv(path) == [10, 20, 30]
    stats = processor.get_summary_stats()
    assert stats == {"rows": 3, "min": 10, "max": 30, "sum": 60, "sum_mod_t": 60}
    assert processor.get_metadata()["file_name"] == "data.csv"


def test_csv_without_header(tmp_path):
    path = write_csv(tmp_path, "5\n7\n")
    assert DataProcessor(T).load_csv(path) == [5, 7]


def test_empty_csv(tmp_path):
    path = write_csv(tmp_path, "")
    processor = DataProcessor(T)
    assert processor.load_csv(path) == []
    assert processor.get_summary_stats()["min"] is None


def test_non_numeric_cell_names_the_row(tmp_path):
    path = write_csv(tmp_path, "value\n1\nabc\n3\n")
    with pytest.raises(IngestError) as excinfo:
        DataProcessor(T).load_csv(path)
    assert excinfo.value.row == 3


def test_value_outside_zt_is_rejected(tmp_path):
    path = write_csv(tmp_path, "1\n65537\n")
    with pytest.raises(IngestError) as excinfo:
        DataProcessor(T).load_csv(path)
    assert excinfo.value.row == 2
    assert excinfo.value.value == 65537


def test_negative_value_is_rejected():
    with pytest.raises(IngestError):
        DataProcessor(T).load_values(["-1"])


def test_reduce_mod_t_wraps_and_warns(caplog):
    processor = DataProcessor(T, reduce_mod_t=True)
    with caplog.at_level(logging.WARNING, logger="src.services.data_processor"):
        values = processor.load_values([65537, 65540, 3])
    assert values == [0, 3, 3]
    assert processor.wrapped == 2
    assert processor.get_summary_stats()["sum"] == 65537 + 65540 + 3
    assert "mod t" in caplog.text


def test_multiple_columns_are_rejected(tmp_path):
    path = write_csv(tmp_path, "a,b\n1,2\n")
    with pytest.raises(IngestError):
        DataProcessor(T).load_csv(path)


def test_missing_file(tmp_path):
    with pytest.raises(NotFoundError):
        DataProcessor(T).load_csv(tmp_path / "missing.csv")


def test_scale_floors_after_scaling():
    processor = DataProcessor(T, scale=Fraction(1, 24))
    assert processor.load_values(["48", "47", "1.5", "100000"]) == [2, 1, 0, 4166]


@pytest.mark.parametrize("text, expected", [(None, Fraction(1)), ("1/24", Fraction(1, 24)), ("3", Fraction(3))])
def test_parse_scale(text, expected):
    assert parse_scale(text) == expected


@pytest.mark.parametrize("text", ["abc", "0", "-1/2", "1/0"])
def test_parse_scale_rejects(text):
    with pytest.raises(ParameterError):
        parse_scale(text)


def test_bundled_covid_dataset():
    name, values = load_dataset("covid19", T)
    assert name == "covid19"
    assert len(values) == 341
    assert sum(values) == 11860970
    assert sum(values) % T == 64310
    assert max(values) < T


def test_bundled_bitcoin_needs_reduction():
    with pytest.raises(IngestError):
        load_dataset("bitcoin", T)
    name, values = load_dataset("bitcoin", T, reduce_mod_t=True)
    assert len(values) == 1086
    assert all(0 <= v < T for v in values)


def test_hg38_is_synthesized_deterministically():
    name, values = load_dataset("hg38", T, seed=4)
    assert name == "hg38"
    assert len(values) == HG38_TUPLES
    assert max(values) < HG38_HIGH
    assert values == load_dataset("hg38", T, seed=4)[1]
    assert synthesize_uniform(5, 10, seed=1) == synthesize_uniform(5, 10, seed=1)


def test_dataset_from_path(tmp_path):
    path = write_csv(tmp_path, "x\n1\n2\n", name="custom_table.csv")
    assert load_dataset(str(path), T) == ("custom_table", [1, 2])
