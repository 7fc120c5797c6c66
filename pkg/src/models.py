"""
Modelos de dados para o DPLR FwFM
Define schema de campos, configurações de treino, relatórios e registros de benchmark
"""

from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import settings
from .errors import DataError

FieldRole = Literal["context", "item"]
FieldKind = Literal["categorical-single", "categorical-multi", "numeric-binned"]
DerivedPart = Literal["year", "month", "dow", "hour"]
Variant = Literal["fm", "fwfm", "pruned", "dplr"]

# Entradas de um campo: (id local no vocabulário, peso)
FieldEntries = Tuple[Tuple[int, float], ...]


class FieldDef(BaseModel):
    """Modelo para um campo do dataset"""

    name: str = Field(..., description="Nome único do campo")
    role: FieldRole = Field(..., description="Campo de contexto ou de item")
    kind: FieldKind = Field(..., description="Tipo de codificação")
    binning: Optional[str] = Field(None, description="Regra de binning (campos numéricos)")
    source: Optional[str] = Field(None, description="Coluna bruta de origem (campos derivados)")
    derive: Optional[DerivedPart] = Field(None, description="Parte extraída do timestamp")
    vocab: Dict[str, int] = Field(default_factory=dict, description="Token -> id local")
    vocab_size: int = Field(default=1, ge=1, description="Tamanho do vocabulário, inclui id raro")

    @field_validator('binning')
    @classmethod
    def validate_binning(cls, v):
        if v is not None and v != "log-squared":
            raise ValueError(f'Regra de binning desconhecida: {v}')
        return v

    @model_validator(mode='after')
    def validate_kind(self):
        if self.kind == "numeric-binned" and self.binning is None:
            self.binning = "log-squared"
        if self.kind != "numeric-binned" and self.binning is not None:
            raise ValueError(f'Campo {self.name}: binning só vale para campos numéricos')
        if self.derive is not None and self.source is None:
            raise ValueError(f'Campo derivado {self.name} sem coluna de origem')
        return self

    @property
    def column(self) -> str:
        """Coluna bruta da qual o campo é lido"""
        return self.source or self.name


class FieldSchema(BaseModel):
    """Schema ordenado: campos de contexto seguidos dos campos de item"""

    fields: List[FieldDef] = Field(..., description="Campos na ordem do modelo")
    delimiter: str = Field(default_factory=lambda: settings.delimiter)
    task: Literal["classification", "regression"] = Field(default="classification")

    @model_validator(mode='after')
    def validate_fields(self):
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValueError('Nomes de campos devem ser únicos')
        roles = [f.role for f in self.fields]
        m_c = roles.count("context")
        if roles != ["context"] * m_c + ["item"] * (len(roles) - m_c):
            raise ValueError('Campos de contexto devem preceder os campos de item')
        if not 1 <= m_c < len(roles):
            raise ValueError(f'Esperado 1 <= m_c < m, recebido m_c={m_c}, m={len(roles)}')
        return self

    @property
    def m(self) -> int:
        return len(self.fields)

    @property
    def m_c(self) -> int:
        return sum(1 for f in self.fields if f.role == "context")

    @property
    def vocab_sizes(self) -> List[int]:
        return [f.vocab_size for f in self.fields]

    @property
    def n(self) -> int:
        return sum(self.vocab_sizes)

    @property
    def offsets(self) -> np.ndarray:
        """Primeiro id global de cada campo"""
        return np.concatenate([[0], np.cumsum(self.vocab_sizes)[:-1]]).astype(np.int64)

    @property
    def columns(self) -> List[str]:
        """Colunas brutas na ordem do arquivo (sem o rótulo)"""
        seen: List[str] = []
        for f in self.fields:
            if f.column not in seen:
                seen.append(f.column)
        return seen

    @classmethod
    def synthetic(cls, vocab_sizes: List[int], m_c: int) -> "FieldSchema":
        """Schema categórico sem tokens, usado por modelos aleatórios e pelo benchmark"""
        fields = [
            FieldDef(name=f"f{i}", role="context" if i < m_c else "item",
                     kind="categorical-single", vocab_size=int(size))
            for i, size in enumerate(vocab_sizes)
        ]
        return cls(fields=fields)


class TrainConfig(BaseModel):
    """Configuração de treino"""

    variant: Variant = Field(default="dplr")
    rank: int = Field(default=1, ge=1, description="Posto rho (DPLR) ou equivalente de poda")
    dim: int = Field(default=8, ge=1, description="Dimensão k dos embeddings")
    loss: Literal["logloss", "mse"] = Field(default="logloss")
    learning_rate: float = Field(default_factory=lambda: settings.learning_rate, gt=0)
    epochs: int = Field(default=5, ge=0)
    batch_size: int = Field(default_factory=lambda: settings.batch_size, ge=1)
    optimizer: Literal["adam", "sgd"] = Field(default="adam")
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    seed: int = Field(default_factory=lambda: settings.seed)
    weight_decay: float = Field(default=0.0, ge=0)
    keep: Optional[int] = Field(None, ge=0, description="Entradas mantidas (variante pruned)")
    finetune_epochs: int = Field(default=1, ge=0)


class EvalReport(BaseModel):
    """Relatório de avaliação"""

    count: int = Field(default=0, ge=0)
    logloss: Optional[float] = Field(None, ge=0)
    auc: Optional[float] = Field(None, ge=0, le=1)
    auc_error: Optional[str] = Field(None, description="Motivo quando a AUC é indefinida")
    mse: Optional[float] = Field(None, ge=0)

    def primary_metric(self) -> Tuple[str, float]:
        """Métrica de validação: (nome, valor) onde menor é melhor"""
        if self.mse is not None:
            return "mse", self.mse
        return "logloss", self.logloss


class PruneBudget(BaseModel):
    """Orçamento de poda: q entradas ou equivalente a posto rho"""

    keep: Optional[int] = Field(None, ge=0)
    rank_equivalent: Optional[int] = Field(None, ge=0)

    @model_validator(mode='after')
    def validate_choice(self):
        if (self.keep is None) == (self.rank_equivalent is None):
            raise ValueError('Informe exatamente um entre keep e rank_equivalent')
        return self

    def keep_count(self, m: int) -> int:
        """Número q de entradas mantidas para m campos"""
        q = self.keep if self.keep is not None else self.rank_equivalent * (m + 1)
        if q > m * (m - 1) // 2:
            raise DataError(f'q={q} excede m(m-1)/2={m * (m - 1) // 2}')
        return q


class SpectrumReport(BaseModel):
    """Espectro do erro de aproximação e limite de Von Neumann"""

    sigma_error: List[float] = Field(..., description="Valores singulares de E, decrescentes")
    lambda_vvt: List[float] = Field(..., description="Autovalores de V·Vᵀ, decrescentes")
    bound: float = Field(..., description="Soma de lambda_i·sigma_i")
    trace_value: float = Field(..., description="Tr(VᵀEV) com sinal")

    @field_validator('sigma_error')
    @classmethod
    def validate_sigma(cls, v):
        if any(s < 0 for s in v):
            raise ValueError('Valores singulares devem ser não negativos')
        return v

    @property
    def cumulative_bound(self) -> List[float]:
        return np.cumsum(np.array(self.lambda_vvt) * np.array(self.sigma_error)).tolist()


class BenchGrid(BaseModel):
    """Grade do benchmark sintético de latência"""

    m: int = Field(default_factory=lambda: settings.bench_fields, ge=2)
    context_counts: List[int] = Field(default_factory=lambda: list(settings.bench_context_counts))
    ranks: List[int] = Field(default_factory=lambda: list(settings.bench_ranks))
    auction_sizes: List[int] = Field(default_factory=lambda: list(settings.bench_auction_sizes))
    repetitions: int = Field(default_factory=lambda: settings.bench_repetitions, ge=2)
    auctions_per_measurement: int = Field(
        default_factory=lambda: settings.bench_auctions_per_measurement, ge=1)
    k: int = Field(default_factory=lambda: settings.bench_dim, ge=1)
    seed: int = Field(default_factory=lambda: settings.seed)
    engines: List[Literal["dplr", "pruned", "fm", "fwfm"]] = Field(
        default_factory=lambda: ["dplr", "pruned", "fwfm"])

    @model_validator(mode='after')
    def validate_grid(self):
        for m_c in self.context_counts:
            if not 1 <= m_c < self.m:
                raise ValueError(f'Contagem de contexto {m_c} fora de [1, {self.m})')
        if any(r < 1 for r in self.ranks) or any(n < 1 for n in self.auction_sizes):
            raise ValueError('Postos e tamanhos de leilão devem ser positivos')
        return self


class BenchRecord(BaseModel):
    """Uma medição do benchmark"""

    engine: str
    rank_or_keep: int
    m: int
    context_fields: int
    auction_size: int
    rep: int
    total_ns: int = Field(..., gt=0)
    per_item_ns: float = Field(..., gt=0)
    per_item_ops: int = Field(..., ge=0)
    low_resolution: bool = Field(default=False, description="Medição abaixo de 1µs")


@dataclass(frozen=True)
class Sample:
    """Uma linha rotulada: por campo, tuplas (id local, peso)"""

    label: float
    values: Tuple[FieldEntries, ...]

    def context_fragment(self, m_c: int) -> Tuple[FieldEntries, ...]:
        return self.values[:m_c]

    def item_fragment(self, m_c: int) -> Tuple[FieldEntries, ...]:
        return self.values[m_c:]

    @classmethod
    def join(cls, context: Tuple[FieldEntries, ...], item: Tuple[FieldEntries, ...],
             label: float = 0.0) -> "Sample":
        return cls(label=label, values=tuple(context) + tuple(item))


@dataclass(frozen=True)
class Auction:
    """Um contexto compartilhado por N itens candidatos"""

    context: Tuple[FieldEntries, ...]
    items: Tuple[Tuple[FieldEntries, ...], ...]
