"""
Configurações do DPLR FwFM
Centraliza todas as configurações do sistema
"""

from typing import List
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Carrega variáveis do arquivo .env
load_dotenv()


class Settings(BaseSettings):
    """Configurações da aplicação"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="FWFM_",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging e saída
    log_level: str = Field(default="INFO")
    log_file: str = Field(default="logs/dplr_fwfm.log")
    output_dir: str = Field(default="./outputs")
    seed: int = Field(default=2024)

    # Ingestão
    delimiter: str = Field(default="\t")
    multi_value_separator: str = Field(default="|")
    min_count: int = Field(default=10, ge=1)

    # Treino
    batch_size: int = Field(default=256, ge=1)
    eval_batch_size: int = Field(default=4096, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    lr_grid: List[float] = Field(default_factory=lambda: [1e-3, 3e-4, 1e-4])

    # Álgebra linear e decomposição
    jacobi_max_sweeps: int = Field(default=100, ge=1)
    jacobi_tol: float = Field(default=1e-12, gt=0)
    posthoc_max_iters: int = Field(default=500, ge=1)
    posthoc_tol: float = Field(default=1e-12, ge=0)

    # Benchmark sintético
    bench_fields: int = Field(default=40)
    bench_context_counts: List[int] = Field(default_factory=lambda: [10, 15, 20, 25, 30])
    bench_ranks: List[int] = Field(default_factory=lambda: [1, 2, 3])
    bench_auction_sizes: List[int] = Field(default_factory=lambda: [10, 50, 100, 500, 1000])
    bench_repetitions: int = Field(default=50, ge=2)
    bench_auctions_per_measurement: int = Field(default=10, ge=1)
    bench_dim: int = Field(default=8, ge=1)


# Instância global das configurações
settings = Settings()
