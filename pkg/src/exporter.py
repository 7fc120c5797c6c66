"""
Exportação de relatórios
Registros e resumo do benchmark, espectro do erro, log de treino e métricas
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger

from .config import settings
from .models import BenchRecord, EvalReport, SpectrumReport

BENCH_COLUMNS = ['engine', 'rank_or_keep', 'm', 'context_fields', 'auction_size', 'rep',
                 'total_ns', 'per_item_ns', 'per_item_ops']
SPECTRUM_COLUMNS = ['index', 'sigma_error', 'lambda_vvt', 'cumulative_bound']


class ReportExporter:
    """Exportador de relatórios em texto delimitado"""

    def __init__(self, export_dir: str = None):
        self.export_dir = Path(export_dir or settings.output_dir)

    def _target(self, path: Optional[str], prefix: str, suffix: str) -> Path:
        if path:
            target = Path(path)
        else:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            target = self.export_dir / f"{prefix}_{timestamp}.{suffix}"
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def export_bench_records(self, records: Sequence[BenchRecord], path: str = None) -> str:
        """CSV com o cabeçalho fixo do benchmark, uma linha por medição"""
        filepath = self._target(path, "bench", "csv")
        df = pd.DataFrame([r.model_dump() for r in records], columns=BENCH_COLUMNS + ['low_resolution'])
        df[BENCH_COLUMNS].to_csv(filepath, index=False, encoding='utf-8')
        logger.info(f"Registros do benchmark exportados: {filepath}")
        return str(filepath)

    def export_bench_summary(self, summary: pd.DataFrame, path: str = None) -> str:
        filepath = self._target(path, "bench_summary", "csv")
        summary.to_csv(filepath, index=False, encoding='utf-8')
        logger.info(f"Resumo do benchmark exportado: {filepath}")
        return str(filepath)

    def export_spectrum(self, report: SpectrumReport, path: str = None) -> str:
        """Espectro (index, sigma_error, lambda_vvt, cumulative_bound) para plotagem externa"""
        filepath = self._target(path, "spectrum", "csv")
        df = pd.DataFrame({
            'index': range(len(report.sigma_error)),
            'sigma_error': report.sigma_error,
            'lambda_vvt': report.lambda_vvt,
            'cumulative_bound': report.cumulative_bound,
        })
        df[SPECTRUM_COLUMNS].to_csv(filepath, index=False, encoding='utf-8')
        logger.info(f"Espectro exportado: {filepath} (cota={report.bound:.4f}, traço={report.trace_value:.4f})")
        return str(filepath)

    def export_training_log(self, history: List[Dict[str, float]], path: str = None) -> str:
        """Uma linha por época: epoch, train_loss, métrica de validação"""
        filepath = self._target(path, "training_log", "tsv")
        pd.DataFrame(history).to_csv(filepath, sep='\t', index=False, encoding='utf-8')
        logger.info(f"Log de treino exportado: {filepath}")
        return str(filepath)

    def export_metrics(self, report: EvalReport, path: str = None) -> str:
        filepath = self._target(path, "metrics", "json")
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(report.model_dump(), f, ensure_ascii=False, indent=2)
        logger.info(f"Métricas exportadas: {filepath}")
        return str(filepath)
