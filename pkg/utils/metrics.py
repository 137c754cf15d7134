"""
Métricas de estados quânticos e montagem de tabelas de resultados.
"""
import numpy as np
import pandas as pd
from scipy import linalg


def purity(rho):
    """
    Pureza Tr(ρ²).

    Args:
        rho: Matriz densidade.

    Returns:
        Pureza (real).
    """
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def trace_distance(rho, sigma):
    """
    Distância de traço ½‖ρ − σ‖₁.

    Args:
        rho: Matriz densidade.
        sigma: Matriz densidade de mesma dimensão.

    Returns:
        Distância (entre 0 e 1 para estados válidos).
    """
    diff = np.asarray(rho) - np.asarray(sigma)
    eigenvalues = linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.abs(eigenvalues).sum())


def von_neumann_entropy(rho):
    """Entropia −Tr(ρ ln ρ), ignorando autovalores numericamente nulos."""
    eigenvalues = linalg.eigvalsh(0.5 * (rho + np.asarray(rho).conj().T))
    eigenvalues = eigenvalues[eigenvalues > 1e-14]
    return float(-(eigenvalues * np.log(eigenvalues)).sum())


def expectation(op, rho):
    """Valor esperado Tr(op ρ) (parte real)."""
    return float(np.real(np.trace(np.asarray(op) @ np.asarray(rho))))


def relative_gap(lhs, rhs):
    """
    Diferença de Frobenius absoluta e relativa entre duas matrizes.

    Returns:
        Tupla (‖lhs − rhs‖_F, ‖lhs − rhs‖_F / ‖rhs‖_F).
    """
    absolute = float(np.linalg.norm(np.asarray(lhs) - np.asarray(rhs)))
    scale = float(np.linalg.norm(rhs))
    relative = absolute / scale if scale > 0 else absolute
    return absolute, relative


def format_duration(time_ms):
    """
    Formata o tempo em milissegundos para uma string legível.

    Args:
        time_ms: Tempo em milissegundos.

    Returns:
        String formatada.
    """
    if time_ms < 1:
        return f"{time_ms * 1000:.2f} µs"
    if time_ms < 1000:
        return f"{time_ms:.2f} ms"
    if time_ms < 60_000:
        return f"{time_ms / 1000:.2f} s"
    return f"{time_ms / 60_000:.1f} min"


def create_results_table(rows, columns=None):
    """
    Cria uma tabela a partir de uma lista de dicionários (uma linha cada).

    Args:
        rows: Lista de dicionários com valores escalares.
        columns: Ordem das colunas (opcional; por padrão a da primeira linha).

    Returns:
        DataFrame pandas.
    """
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return pd.DataFrame(rows, columns=columns)


def complex_columns(prefix, value):
    """Separa um número complexo nas colunas <prefix>_re e <prefix>_im."""
    value = complex(value)
    return {f"{prefix}_re": value.real, f"{prefix}_im": value.imag}
