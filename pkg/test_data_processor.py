#!/usr/bin/env python3
"""
Testes de ingestão e codificação
Binning, vocabulário, divisão, codificação de linhas, schemas INI e conversores
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

# Adiciona o diretório atual ao path
sys.path.append(str(Path(__file__).parent))

from src.data_processor import (RARE_ID, EncodedDataset, bin_numeric, build_vocab, encode_row,
                                expand_row, split)
from src.errors import DataError
from src.importer import DatasetImporter, convert_movielens, load_schema, read_rows
from src.models import FieldDef, FieldSchema

SCHEMA_DIR = Path(__file__).parent / "schemas"


def small_schema():
    return FieldSchema(fields=[
        FieldDef(name="user", role="context", kind="categorical-single"),
        FieldDef(name="count", role="context", kind="numeric-binned"),
        FieldDef(name="item", role="item", kind="categorical-single"),
        FieldDef(name="genres", role="item", kind="categorical-multi"),
    ])


def test_bin_numeric():
    assert bin_numeric(None) == 0
    assert bin_numeric(float('nan')) == 0
    assert bin_numeric(-3.0) == 1
    assert bin_numeric(0.0) == 2
    assert bin_numeric(1.5) == 3
    assert bin_numeric(2.0) == 4
    assert bin_numeric(100.0) == 26


def test_build_vocab_min_count():
    """Feature vista 10 vezes ganha id próprio; 9 vezes vira rara"""
    schema = small_schema()
    rows = [["1", "a", "1", "x", "A|B"]] * 10 + [["0", "b", "", "y", "C"]] * 9
    encoded_schema = build_vocab(rows, schema, min_count=10)

    user = encoded_schema.fields[0]
    assert user.vocab == {"a": 1}
    assert user.vocab_size == 2
    assert encoded_schema.fields[3].vocab == {"A": 1, "B": 2}

    sample = encode_row(["0", "b", "", "y", "C"], encoded_schema)
    assert sample.values[0] == ((RARE_ID, 1.0),)
    assert sample.values[2] == ((RARE_ID, 1.0),)

    unseen = encode_row(["0", "zzz", "7", "never", "Q"], encoded_schema)
    assert unseen.values[0] == ((RARE_ID, 1.0),)

    with pytest.raises(DataError):
        build_vocab([], schema)


def test_vocab_lexicographic_ids():
    schema = small_schema()
    rows = [["1", u, "0", "x", "A"] for u in ["c", "a", "b"] for _ in range(2)]
    vocab = build_vocab(rows, schema, min_count=1).fields[0].vocab
    assert vocab == {"a": 1, "b": 2, "c": 3}


def test_encode_row_multi_value():
    schema = small_schema()
    rows = [["1", "a", "3", "x", "A|B|C"]] * 10
    encoded_schema = build_vocab(rows, schema, min_count=1)
    sample = encode_row(["1", "a", "3", "x", "A|B|C"], encoded_schema)

    genres = sample.values[3]
    assert len(genres) == 3
    assert all(w == pytest.approx(1.0 / 3.0) for _, w in genres)
    assert sample.values[0] == ((1, 1.0),)
    assert sample.label == 1.0

    empty = encode_row(["1", "a", "3", "x", ""], encoded_schema)
    assert empty.values[3] == ((RARE_ID, 1.0),)


def test_encode_row_errors():
    schema = build_vocab([["1", "a", "1", "x", "A"]], small_schema(), min_count=1)
    with pytest.raises(DataError, match="Linha 7"):
        encode_row(["1", "a", "x"], schema, 7)
    with pytest.raises(DataError):
        encode_row(["1", "a", "not-a-number", "x", "A"], schema, 0)


def test_timestamp_derivation():
    """Timestamp unix vira ano, mês, dia da semana e hora (UTC)"""
    fields = [FieldDef(name=f"ts_{p}", role="context", kind="categorical-single", source="ts", derive=p)
              for p in ("year", "month", "dow", "hour")]
    fields.append(FieldDef(name="item", role="item", kind="categorical-single"))
    schema = FieldSchema(fields=fields)
    assert schema.columns == ["ts", "item"]
    assert expand_row(["1", "978300760", "x"], schema) == ["2000", "12", "6", "22", "x"]
    with pytest.raises(DataError):
        expand_row(["1", "not-a-time", "x"], schema, 3)


def test_split():
    rows = list(range(10))
    train, val, test = split(rows, 7)
    assert (len(train), len(val), len(test)) == (8, 1, 1)
    assert sorted(train + val + test) == rows
    assert split(rows, 7) == (train, val, test)

    many = list(range(1000))
    assert split(many, 1)[0] != split(many, 2)[0]


def test_schema_files():
    """Schemas INI distribuídos: MovieLens com 11 campos, Criteo 39, Avazu 22"""
    movielens = load_schema(str(SCHEMA_DIR / "movielens.ini"))
    assert movielens.m == 11
    assert movielens.m_c == 9
    assert movielens.task == "regression"
    assert movielens.columns == ["user_id", "gender", "age", "occupation", "zip", "timestamp",
                                 "movie_id", "genres"]
    assert [f.name for f in movielens.fields[5:9]] == [
        "timestamp_year", "timestamp_month", "timestamp_dow", "timestamp_hour"]

    criteo = load_schema(str(SCHEMA_DIR / "criteo.ini"))
    assert criteo.m == 39
    assert criteo.fields[0].kind == "numeric-binned"
    assert criteo.fields[0].binning == "log-squared"

    assert load_schema(str(SCHEMA_DIR / "avazu.ini")).m == 22

    with pytest.raises(DataError):
        load_schema("/nonexistent/schema.ini")


def write_dataset(path: Path, rows):
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")


def test_read_rows_and_prepare(tmp_path):
    schema = small_schema()
    rng = np.random.default_rng(0)
    rows = [[str(int(rng.integers(2))), f"u{rng.integers(3)}", str(int(rng.integers(5))),
             f"i{rng.integers(4)}", "A|B" if rng.random() < 0.5 else "C"] for _ in range(200)]
    data = tmp_path / "data.tsv"
    write_dataset(data, rows)

    assert read_rows(str(data), schema) == rows

    prepared = DatasetImporter(schema, min_count=2).prepare(str(data), seed=3)
    assert (len(prepared.train), len(prepared.validation), len(prepared.test)) == (160, 20, 20)
    assert prepared.schema.fields[0].vocab_size == 4

    # linhas preenchidas com peso zero reconstroem a Sample original
    sample = prepared.train.to_sample(0, prepared.schema)
    rebuilt = EncodedDataset.from_samples([sample], prepared.schema)
    for a, b in zip(rebuilt.weights, prepared.train.select(np.array([0])).weights):
        assert np.array_equal(a[:, :a.shape[1]], b[:, :a.shape[1]])


def test_read_rows_column_mismatch(tmp_path):
    data = tmp_path / "bad.tsv"
    write_dataset(data, [["1", "a", "1", "x", "A"], ["0", "b", "2", "y"]])
    with pytest.raises(DataError, match="linha 2"):
        read_rows(str(data), small_schema())

    long = tmp_path / "long.tsv"
    write_dataset(long, [["1", "a", "1", "x", "A"], ["0", "b", "2", "y", "B", "extra"]])
    with pytest.raises(DataError, match="linha 2"):
        read_rows(str(long), small_schema())

    # campo multi-valor vazio no fim da linha continua válido
    trailing = tmp_path / "trailing.tsv"
    write_dataset(trailing, [["1", "a", "1", "x", ""]])
    assert read_rows(str(trailing), small_schema()) == [["1", "a", "1", "x", ""]]
    with pytest.raises(DataError):
        read_rows(str(tmp_path / "missing.tsv"), small_schema())


def test_convert_movielens(tmp_path):
    source = tmp_path / "ml-1m"
    source.mkdir()
    (source / "ratings.dat").write_text("1::10::5::978300760\n2::20::3::978302109\n", encoding="latin-1")
    (source / "users.dat").write_text("1::F::1::10::48067\n2::M::56::16::70072\n", encoding="latin-1")
    (source / "movies.dat").write_text("10::Toy Story (1995)::Animation|Children's|Comedy\n"
                                       "20::Jumanji (1995)::Adventure\n", encoding="latin-1")
    out = tmp_path / "ml.tsv"
    convert_movielens(str(source), str(out))

    schema = load_schema(str(SCHEMA_DIR / "movielens.ini"))
    rows = read_rows(str(out), schema)
    assert rows[0] == ["5", "1", "F", "1", "10", "48067", "978300760", "10", "Animation|Children's|Comedy"]
    encoded_schema = build_vocab(rows, schema, min_count=1)
    sample = encode_row(rows[0], encoded_schema)
    assert len(sample.values) == 11
    assert len(sample.values[10]) == 3


if __name__ == "__main__":
    logger.info("🧪 Testes de ingestão")
    sys.exit(pytest.main([__file__, "-q"]))
