"""
Exceções do DPLR FwFM
Cada erro carrega o código de saída usado pela CLI
"""


class FwfmError(Exception):
    """Erro base do pacote"""

    exit_code = 1


class DataError(FwfmError, ValueError):
    """Schema, dados ou arquivo inconsistentes"""

    exit_code = 3


class DimensionError(DataError):
    """Dimensões incompatíveis entre operandos"""


class ModelFormatError(DataError):
    """Arquivo de modelo corrompido ou de versão desconhecida"""


class NumericError(FwfmError, ArithmeticError):
    """Falha numérica: perda não finita, divergência, não convergência"""

    exit_code = 4
