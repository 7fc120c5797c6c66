"""
Formato binário do modelo (little-endian)
magic LRFWFM01, cabeçalho u32/u64, parâmetros f32 e payload específico da variante
"""

import struct
from pathlib import Path
from typing import Optional

import numpy as np
from loguru import logger

from .errors import ModelFormatError
from .models import FieldSchema
from .params import (KIND_CODES, DenseSym, Dplr, FmImplicit, ModelParams, PrunedSparse)

MAGIC = b"LRFWFM01"
HEADER = struct.Struct("<5IQ")  # kind, m, m_c, k, rho, n
PRUNED_RECORD = np.dtype([('i', '<u4'), ('j', '<u4'), ('v', '<f4')])
SCHEMA_SUFFIX = ".schema.json"


def _f32(a) -> bytes:
    return np.ascontiguousarray(a, dtype='<f4').tobytes()


def model_to_bytes(params: ModelParams) -> bytes:
    """Serializa o modelo; parâmetros gravados em 32 bits"""
    interaction = params.interaction
    kind = KIND_CODES[interaction.kind]
    rho = interaction.rho if isinstance(interaction, Dplr) else 0
    m, n, k = params.m, params.n, params.k

    chunks = [
        MAGIC,
        HEADER.pack(kind, m, params.m_c, k, rho, n),
        np.asarray(params.schema.vocab_sizes, dtype='<u4').tobytes(),
        struct.pack("<f", params.b0),
        _f32(params.b),
        _f32(params.W),
    ]
    if isinstance(interaction, DenseSym):
        chunks.append(_f32(interaction.R[np.triu_indices(m, 1)]))
    elif isinstance(interaction, PrunedSparse):
        records = np.empty(interaction.q, dtype=PRUNED_RECORD)
        records['i'] = interaction.pairs[:, 0]
        records['j'] = interaction.pairs[:, 1]
        records['v'] = interaction.values
        chunks.append(struct.pack("<I", interaction.q))
        chunks.append(records.tobytes())
    elif isinstance(interaction, Dplr):
        chunks.append(_f32(interaction.U))
        chunks.append(_f32(interaction.e))
    return b"".join(chunks)


class _Reader:
    """Cursor sobre o buffer com verificação de truncamento"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ModelFormatError(f"Arquivo de modelo truncado (posição {self.pos}, faltam {size} bytes)")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def array(self, dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()


def model_from_bytes(data: bytes, schema: Optional[FieldSchema] = None) -> ModelParams:
    """
    Desserializa o modelo

    Sem schema, cria um schema sintético com os tamanhos de vocabulário do arquivo.
    """
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError("Magic inválido: não é um modelo LRFWFM01")
    kind, m, m_c, k, rho, n = HEADER.unpack(reader.take(HEADER.size))
    vocab_sizes = reader.array('<u4', m).astype(np.int64)
    if int(vocab_sizes.sum()) != n:
        raise ModelFormatError(f"Soma dos vocabulários {int(vocab_sizes.sum())} != n={n}")

    if schema is None:
        schema = FieldSchema.synthetic(vocab_sizes.tolist(), m_c)
    elif schema.vocab_sizes != vocab_sizes.tolist() or schema.m_c != m_c:
        raise ModelFormatError("Schema informado não corresponde ao modelo")

    b0 = struct.unpack("<f", reader.take(4))[0]
    b = reader.array('<f4', n).astype(np.float32)
    W = reader.array('<f4', n * k).astype(np.float32).reshape(n, k)

    if kind == KIND_CODES['fm']:
        interaction = FmImplicit()
    elif kind == KIND_CODES['fwfm']:
        upper = reader.array('<f4', m * (m - 1) // 2).astype(np.float32)
        R = np.zeros((m, m), dtype=np.float32)
        iu = np.triu_indices(m, 1)
        R[iu] = upper
        R.T[iu] = upper
        interaction = DenseSym(R=R)
    elif kind == KIND_CODES['pruned']:
        q = struct.unpack("<I", reader.take(4))[0]
        records = reader.array(PRUNED_RECORD, q)
        interaction = PrunedSparse(
            m=m, pairs=np.stack([records['i'], records['j']], axis=1).astype(np.int64),
            values=records['v'].astype(np.float32))
    elif kind == KIND_CODES['dplr']:
        U = reader.array('<f4', rho * m).astype(np.float32).reshape(rho, m)
        e = reader.array('<f4', rho).astype(np.float32)
        interaction = Dplr(U=U, e=e)
    else:
        raise ModelFormatError(f"Tipo de modelo desconhecido: {kind}")

    if reader.pos != len(data):
        raise ModelFormatError(f"{len(data) - reader.pos} bytes excedentes no arquivo de modelo")
    return ModelParams(b0=b0, b=b, W=W, schema=schema, interaction=interaction)


def save_model(params: ModelParams, path: str, write_schema: bool = True) -> str:
    """Grava o modelo e, opcionalmente, o schema com vocabulário ao lado"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(model_to_bytes(params))
    if write_schema:
        Path(str(target) + SCHEMA_SUFFIX).write_text(params.schema.model_dump_json(indent=2), encoding='utf-8')
    logger.info(f"Modelo gravado: {target} (variante={params.variant}, m={params.m}, k={params.k})")
    return str(target)


def load_model(path: str) -> ModelParams:
    """Lê o modelo, usando o schema ao lado quando existir"""
    source = Path(path)
    if not source.exists():
        raise ModelFormatError(f"Modelo não encontrado: {path}")
    schema = None
    sidecar = Path(str(source) + SCHEMA_SUFFIX)
    if sidecar.exists():
        schema = FieldSchema.model_validate_json(sidecar.read_text(encoding='utf-8'))
    return model_from_bytes(source.read_bytes(), schema)
