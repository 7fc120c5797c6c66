# DPLR FwFM Package
"""
Máquinas de fatoração com pesos de campo em forma diagonal mais posto baixo
Treino, poda, decomposição pós-treino e ranking com cache de contexto
"""

__version__ = "0.1.0"
