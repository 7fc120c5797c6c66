"""
Ingestão de datasets
Lê schemas INI e arquivos delimitados, converte MovieLens/Avazu e prepara as divisões codificadas
"""

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from loguru import logger
from tqdm import tqdm

from .config import settings
from .data_processor import EncodedDataset, build_vocab, encode_row, split
from .errors import DataError
from .models import FieldDef, FieldSchema

DELIMITER_NAMES = {'tab': '\t', 'comma': ',', 'semicolon': ';', 'pipe': '|', 'doublecolon': '::'}
TIMESTAMP_PARTS = ('year', 'month', 'dow', 'hour')


def load_schema(path: str) -> FieldSchema:
    """
    Lê um schema INI

    Seção [dataset] com delimiter e task; uma seção [field.<nome>] por coluna
    com role, kind e binning opcional. kind = timestamp gera quatro campos
    derivados (ano, mês, dia da semana, hora).
    """
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding='utf-8'):
        raise DataError(f"Schema não encontrado: {path}")

    dataset = parser['dataset'] if parser.has_section('dataset') else {}
    delimiter = dataset.get('delimiter', 'tab')
    delimiter = DELIMITER_NAMES.get(delimiter, delimiter)
    task = dataset.get('task', 'classification')

    fields: List[FieldDef] = []
    try:
        for section in parser.sections():
            if not section.startswith('field.'):
                continue
            name = section[len('field.'):]
            spec = parser[section]
            role = spec.get('role')
            kind = spec.get('kind', 'categorical-single')
            if kind == 'timestamp':
                fields.extend(
                    FieldDef(name=f"{name}_{part}", role=role, kind='categorical-single',
                             source=name, derive=part)
                    for part in TIMESTAMP_PARTS
                )
            else:
                fields.append(FieldDef(name=name, role=role, kind=kind, binning=spec.get('binning')))
        return FieldSchema(fields=fields, delimiter=delimiter, task=task)
    except ValueError as e:
        raise DataError(f"Schema inválido em {path}: {e}")


def _check_field_counts(path: str, delimiter: str, expected: int) -> None:
    """Conta os campos de cada linha não vazia antes do pandas preencher as faltantes"""
    try:
        with open(path, encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                line = line.rstrip('\r\n')
                if not line:
                    continue
                found = len(line.split(delimiter))
                if found != expected:
                    raise DataError(
                        f"{path}: linha {line_number} com {found} colunas, esperadas {expected}")
    except FileNotFoundError:
        raise DataError(f"Arquivo de dados não encontrado: {path}")


def read_rows(path: str, schema: FieldSchema) -> List[List[str]]:
    """Lê um arquivo delimitado: rótulo primeiro, colunas na ordem do schema"""
    expected = len(schema.columns) + 1
    _check_field_counts(path, schema.delimiter, expected)
    try:
        df = pd.read_csv(
            path, sep=schema.delimiter, header=None, dtype=str, keep_default_na=False,
            quoting=csv.QUOTE_NONE, engine='python' if len(schema.delimiter) > 1 else 'c',
        )
    except FileNotFoundError:
        raise DataError(f"Arquivo de dados não encontrado: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"Falha ao ler {path}: {e}")

    if df.shape[1] != expected:
        raise DataError(f"{path}: esperadas {expected} colunas, encontradas {df.shape[1]}")
    logger.info(f"Linhas lidas de {path}: {len(df)}")
    return df.values.tolist()


@dataclass
class PreparedData:
    """Schema com vocabulário e as três divisões codificadas"""

    schema: FieldSchema
    train: EncodedDataset
    validation: EncodedDataset
    test: EncodedDataset


class DatasetImporter:
    """Orquestra leitura, divisão, vocabulário e codificação"""

    def __init__(self, schema: FieldSchema, min_count: Optional[int] = None):
        self.schema = schema
        self.min_count = settings.min_count if min_count is None else min_count

    def encode(self, rows: Sequence[Sequence[str]], schema: FieldSchema,
               desc: str = "codificando") -> EncodedDataset:
        samples = [encode_row(row, schema, i)
                   for i, row in enumerate(tqdm(rows, desc=desc, leave=False))]
        return EncodedDataset.from_samples(samples, schema)

    def prepare(self, path: str, seed: int) -> PreparedData:
        """Divide 80/10/10, constrói o vocabulário no treino e codifica as divisões"""
        rows = read_rows(path, self.schema)
        train_rows, val_rows, test_rows = split(rows, seed)
        logger.info(f"Divisão: treino={len(train_rows)} validação={len(val_rows)} teste={len(test_rows)}")

        schema = build_vocab(train_rows, self.schema, self.min_count)
        return PreparedData(
            schema=schema,
            train=self.encode(train_rows, schema, "treino"),
            validation=self.encode(val_rows, schema, "validação"),
            test=self.encode(test_rows, schema, "teste"),
        )

    def load_encoded(self, path: str) -> EncodedDataset:
        """Lê e codifica um arquivo inteiro com o vocabulário já construído"""
        return self.encode(read_rows(path, self.schema), self.schema)


def convert_movielens(source_dir: str, out_path: str) -> str:
    """
    Junta ratings.dat, users.dat e movies.dat do MovieLens-1M em um TSV

    Colunas: rating, user_id, gender, age, occupation, zip, timestamp, movie_id, genres.
    """
    source = Path(source_dir)
    read = dict(sep='::', engine='python', header=None, dtype=str, encoding='latin-1')
    try:
        ratings = pd.read_csv(source / 'ratings.dat', names=['user_id', 'movie_id', 'rating', 'timestamp'], **read)
        users = pd.read_csv(source / 'users.dat', names=['user_id', 'gender', 'age', 'occupation', 'zip'], **read)
        movies = pd.read_csv(source / 'movies.dat', names=['movie_id', 'title', 'genres'], **read)
    except FileNotFoundError as e:
        raise DataError(f"Arquivo MovieLens ausente: {e}")

    df = ratings.merge(users, on='user_id', how='left').merge(movies, on='movie_id', how='left')
    df = df.fillna('')
    columns = ['rating', 'user_id', 'gender', 'age', 'occupation', 'zip', 'timestamp', 'movie_id', 'genres']
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    df[columns].to_csv(out_path, sep='\t', header=False, index=False)
    logger.info(f"MovieLens convertido: {len(df)} linhas -> {out_path}")
    return out_path


def convert_avazu(source_csv: str, out_path: str) -> str:
    """Move 'click' para a primeira coluna e descarta 'id' do CSV do Avazu"""
    try:
        df = pd.read_csv(source_csv, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError(f"Arquivo Avazu não encontrado: {source_csv}")
    if 'click' not in df.columns:
        raise DataError(f"{source_csv}: coluna 'click' ausente")
    columns = ['click'] + [c for c in df.columns if c not in ('id', 'click')]
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    df[columns].to_csv(out_path, sep='\t', header=False, index=False)
    logger.info(f"Avazu convertido: {len(df)} linhas -> {out_path}")
    return out_path
