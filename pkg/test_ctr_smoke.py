#!/usr/bin/env python3
"""
Teste de fumaça em dados CTR reais
Executado só quando FWFM_CRITEO_FILE ou FWFM_AVAZU_FILE apontam para os arquivos originais
"""

import os
import sys
from itertools import islice
from pathlib import Path

import pytest
from loguru import logger

# Adiciona o diretório atual ao path
sys.path.append(str(Path(__file__).parent))

from src.importer import DatasetImporter, convert_avazu, load_schema
from src.models import TrainConfig
from src.trainer import Trainer, evaluate

SCHEMA_DIR = Path(__file__).parent / "schemas"
SAMPLE_LINES = int(os.environ.get("FWFM_SMOKE_LINES", "20000"))


def head(source: str, target: Path, lines: int) -> Path:
    with open(source, encoding="utf-8") as src, open(target, "w", encoding="utf-8") as out:
        out.writelines(islice(src, lines))
    return target


def train_and_score(data: Path, schema_file: str) -> float:
    schema = load_schema(str(SCHEMA_DIR / schema_file))
    prepared = DatasetImporter(schema, min_count=2).prepare(str(data), seed=0)
    config = TrainConfig(variant="dplr", rank=2, dim=8, epochs=1, batch_size=256, learning_rate=1e-3, seed=0)
    params = Trainer(prepared.schema, config).fit(prepared.train)
    report = evaluate(prepared.test, params, "logloss")
    logger.info(f"{schema_file}: auc={report.auc} logloss={report.logloss:.4f}")
    return report.auc


@pytest.mark.skipif(not os.environ.get("FWFM_CRITEO_FILE"), reason="FWFM_CRITEO_FILE não definido")
def test_criteo_dplr_beats_chance(tmp_path):
    data = head(os.environ["FWFM_CRITEO_FILE"], tmp_path / "criteo.tsv", SAMPLE_LINES)
    assert train_and_score(data, "criteo.ini") > 0.5


@pytest.mark.skipif(not os.environ.get("FWFM_AVAZU_FILE"), reason="FWFM_AVAZU_FILE não definido")
def test_avazu_dplr_beats_chance(tmp_path):
    # cabeçalho + primeiras linhas do CSV
    raw = head(os.environ["FWFM_AVAZU_FILE"], tmp_path / "avazu.csv", SAMPLE_LINES + 1)
    data = Path(convert_avazu(str(raw), str(tmp_path / "avazu.tsv")))
    assert train_and_score(data, "avazu.ini") > 0.5


if __name__ == "__main__":
    logger.info("🧪 Teste de fumaça CTR")
    sys.exit(pytest.main([__file__, "-q"]))
