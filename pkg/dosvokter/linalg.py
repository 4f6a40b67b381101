"""
Små, deterministiske matriserutiner: symmetrisk egenverdiløser og matriseeksponential
"""
import logging
import math

import numpy as np

from .errors import ModelError, SimulationError
from .settings import EXPM_MAX_TERMS, EXPM_TOL, JACOBI_MAX_SWEEPS, JACOBI_TOL

logger = logging.getLogger(__name__)


def _square(matrix) -> np.ndarray:
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ModelError(f"expected a square matrix, got shape {a.shape}")
    return a


def jacobi_eigenvalues(matrix, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """
    Egenverdier til en symmetrisk matrise med syklisk Jacobi-rotasjon.

    Konvergert når alle off-diagonaler er under tol. Returneres sortert stigende.
    """
    a = _square(matrix)
    if not np.array_equal(a, a.T):
        raise ModelError("matrix is not symmetric")
    n = a.shape[0]
    upper = np.triu_indices(n, 1)

    for sweep in range(max_sweeps):
        off = float(np.max(np.abs(a[upper]))) if n > 1 else 0.0
        if off < tol:
            logger.debug("jacobi converged after %d sweeps", sweep)
            return np.sort(np.diag(a))

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

    raise SimulationError(f"jacobi did not converge in {max_sweeps} sweeps")


def spectral_norm(matrix) -> float:
    """sqrt(lambda_max(A^T A))"""
    a = _square(matrix)
    ata = a.T @ a
    # symmetrisér eksakt før egenverdiløseren
    ata = 0.5 * (ata + ata.T)
    return math.sqrt(max(0.0, float(jacobi_eigenvalues(ata)[-1])))


def expm(matrix, tol: float = EXPM_TOL) -> np.ndarray:
    """
    Matriseeksponential med scaling and squaring rundt en Taylor-kjerne.

    Skalerer til ||A||_1 / 2^s <= 0.5, summerer Taylor-ledd til det siste
    er under tol relativt til summen, og kvadrerer s ganger.
    """
    a = _square(matrix)
    n = a.shape[0]
    norm = float(np.max(np.sum(np.abs(a), axis=0))) if n else 0.0
    if not math.isfinite(norm):
        raise SimulationError("matrix exponential of a non-finite matrix")

    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = a / (2.0 ** squarings)

    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, EXPM_MAX_TERMS + 1):
        term = term @ scaled / k
        result = result + term
        if np.max(np.abs(term)) <= tol * max(1.0, float(np.max(np.abs(result)))):
            break

    for _ in range(squarings):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise SimulationError("matrix exponential overflowed")
    return result
