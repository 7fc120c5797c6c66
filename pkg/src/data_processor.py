"""
Processador de dados para codificação de amostras
Implementa binning numérico, vocabulário com feature rara, codificação multi-valor e divisão treino/validação/teste
"""

import math
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .config import settings
from .errors import DataError
from .models import FieldDef, FieldSchema, Sample

# Id da feature rara em todo campo
RARE_ID = 0


def bin_numeric(x: Optional[float]) -> int:
    """
    Bin de um valor numérico

    Ausente -> 0, negativo -> 1, 0 <= x <= 2 -> 2 + floor(x),
    x > 2 -> 5 + floor(ln(x)^2).
    """
    if x is None or math.isnan(x):
        return 0
    if x < 0:
        return 1
    if x <= 2:
        return 2 + int(math.floor(x))
    return 5 + int(math.floor(math.log(x) ** 2))


def _parse_numeric(value: str, field: FieldDef, row_index: Optional[int]) -> Optional[float]:
    if value == "":
        return None
    try:
        return float(value)
    except ValueError:
        raise DataError(f"Linha {row_index}: valor numérico inválido '{value}' no campo {field.name}")


def _derive(value: str, part: str) -> str:
    """Extrai ano, mês, dia da semana ou hora de um timestamp unix (UTC)"""
    if value == "":
        return ""
    moment = datetime.fromtimestamp(int(float(value)), tz=timezone.utc)
    if part == "year":
        return str(moment.year)
    if part == "month":
        return str(moment.month)
    if part == "dow":
        return str(moment.weekday())
    return str(moment.hour)


def expand_row(raw_row: Sequence[str], schema: FieldSchema,
               row_index: Optional[int] = None) -> List[str]:
    """
    Converte uma linha bruta (rótulo primeiro) em um valor por campo do modelo

    Campos derivados leem a coluna de origem e extraem sua parte do timestamp.
    """
    columns = schema.columns
    if len(raw_row) != len(columns) + 1:
        raise DataError(
            f"Linha {row_index}: esperadas {len(columns) + 1} colunas, recebidas {len(raw_row)}")
    by_column = dict(zip(columns, raw_row[1:]))
    values = []
    for field in schema.fields:
        raw = by_column[field.column]
        if field.derive is not None:
            try:
                raw = _derive(raw, field.derive)
            except (ValueError, OverflowError, OSError):
                raise DataError(f"Linha {row_index}: timestamp inválido '{raw}' em {field.column}")
        values.append(raw)
    return values


def field_tokens(value: str, field: FieldDef, row_index: Optional[int] = None) -> List[str]:
    """Tokens de vocabulário de um valor de campo"""
    if field.kind == "categorical-multi":
        return [v for v in value.split(settings.multi_value_separator) if v != ""]
    if field.kind == "numeric-binned":
        return [str(bin_numeric(_parse_numeric(value, field, row_index)))]
    return [value]


def build_vocab(rows: Iterable[Sequence[str]], schema: FieldSchema,
                min_count: Optional[int] = None) -> FieldSchema:
    """
    Constrói o vocabulário de cada campo a partir das linhas de treino

    Tokens com contagem >= min_count recebem ids 1.. em ordem lexicográfica;
    o id 0 fica reservado para a feature rara.
    """
    min_count = settings.min_count if min_count is None else min_count
    counters: List[Counter] = [Counter() for _ in schema.fields]
    total = 0
    for index, row in enumerate(rows):
        values = expand_row(row, schema, index)
        for counter, field, value in zip(counters, schema.fields, values):
            counter.update(field_tokens(value, field, index))
        total += 1

    if total == 0:
        raise DataError("Conjunto de treino vazio: impossível construir vocabulário")

    fields = []
    for counter, field in zip(counters, schema.fields):
        kept = sorted(token for token, count in counter.items() if count >= min_count)
        vocab = {token: i + 1 for i, token in enumerate(kept)}
        fields.append(field.model_copy(update={'vocab': vocab, 'vocab_size': len(vocab) + 1}))
        logger.debug(f"Campo {field.name}: {len(vocab)} features + rara ({len(counter)} distintas)")

    logger.info(f"Vocabulário construído com {total} linhas, n={sum(f.vocab_size for f in fields)}")
    return schema.model_copy(update={'fields': fields})


def encode_row(raw_row: Sequence[str], schema: FieldSchema,
               row_index: Optional[int] = None) -> Sample:
    """
    Codifica uma linha bruta em Sample

    Campo simples -> (id, 1.0); multi-valor com q valores -> q entradas de peso 1/q;
    multi-valor vazio -> (rara, 1.0); tokens fora do vocabulário -> rara.
    """
    values = expand_row(raw_row, schema, row_index)
    try:
        label = float(raw_row[0])
    except ValueError:
        raise DataError(f"Linha {row_index}: rótulo inválido '{raw_row[0]}'")

    encoded = []
    for field, value in zip(schema.fields, values):
        tokens = field_tokens(value, field, row_index)
        if not tokens:
            encoded.append(((RARE_ID, 1.0),))
            continue
        weight = 1.0 / len(tokens)
        encoded.append(tuple((field.vocab.get(t, RARE_ID), weight) for t in tokens))
    return Sample(label=label, values=tuple(encoded))


def split(rows: Sequence, seed: int) -> Tuple[list, list, list]:
    """Divisão aleatória 80/10/10 determinística dada a semente"""
    n = len(rows)
    order = np.random.default_rng(seed).permutation(n)
    n_train = n * 8 // 10
    n_val = n // 10
    train = [rows[i] for i in order[:n_train]]
    val = [rows[i] for i in order[n_train:n_train + n_val]]
    test = [rows[i] for i in order[n_train + n_val:]]
    return train, val, test


@dataclass
class EncodedDataset:
    """Amostras codificadas em matrizes por campo, preenchidas com peso zero"""

    labels: np.ndarray
    ids: List[np.ndarray]      # por campo: (N, L_f) ids globais
    weights: List[np.ndarray]  # por campo: (N, L_f) pesos

    def __len__(self) -> int:
        return len(self.labels)

    def select(self, index: np.ndarray) -> "EncodedDataset":
        return EncodedDataset(
            labels=self.labels[index],
            ids=[a[index] for a in self.ids],
            weights=[w[index] for w in self.weights],
        )

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], schema: FieldSchema) -> "EncodedDataset":
        offsets = schema.offsets
        labels = np.array([s.label for s in samples], dtype=np.float64)
        ids, weights = [], []
        for f, size in enumerate(schema.vocab_sizes):
            width = max((len(s.values[f]) for s in samples), default=1)
            field_ids = np.zeros((len(samples), width), dtype=np.int64)
            field_weights = np.zeros((len(samples), width), dtype=np.float64)
            for row, sample in enumerate(samples):
                for col, (local_id, weight) in enumerate(sample.values[f]):
                    if not 0 <= local_id < size:
                        raise DataError(f"Amostra {row}: id {local_id} fora do vocabulário do campo {f}")
                    field_ids[row, col] = local_id
                    field_weights[row, col] = weight
            ids.append(field_ids + offsets[f])
            weights.append(field_weights)
        return cls(labels=labels, ids=ids, weights=weights)

    def to_sample(self, row: int, schema: FieldSchema) -> Sample:
        """Reconstrói a Sample de uma linha (ids locais)"""
        offsets = schema.offsets
        values = []
        for f in range(len(self.ids)):
            mask = self.weights[f][row] != 0
            values.append(tuple(
                (int(i - offsets[f]), float(w))
                for i, w in zip(self.ids[f][row][mask], self.weights[f][row][mask])
            ))
        return Sample(label=float(self.labels[row]), values=tuple(values))

