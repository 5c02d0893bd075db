"""
Dense matrix primitives shared by all modules.
Norms, SPD solves and seeded random generation.

Matrices are plain 2-D float64 numpy arrays. Random streams use NumPy's PCG64
bit generator (PCG XSL RR 128/64), seeded per call, so results reproduce
across platforms and threads.
"""
from typing import Optional

import numpy as np
import scipy.linalg as sla

from errors import DimensionMismatch, InvalidDimension, InvalidRange, NotPositiveDefinite, NumericError

DenseMatrix = np.ndarray

SPD_RTOL = 1e-8


def ensure_matrix(A, name: str = "A", allow_empty: bool = False) -> DenseMatrix:
    """Привести вход к 2-D float64 и проверить инварианты (конечность, размеры)"""
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch(f"❌ {name}: ожидалась 2-D матрица, получено ndim={M.ndim}")
    if not allow_empty and (M.shape[0] == 0 or M.shape[1] == 0):
        raise InvalidDimension(f"❌ {name}: пустая матрица {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError(f"❌ {name}: есть NaN/Inf")
    return M


def row_norms(A: DenseMatrix) -> np.ndarray:
    """Euclidean norm of every row"""
    return np.linalg.norm(A, axis=1)


def frobenius_norm(A: DenseMatrix) -> float:
    A = ensure_matrix(A)
    return float(np.sqrt(np.sum(A * A)))


def l21_norm(A: DenseMatrix) -> float:
    """Sum of row-wise Euclidean norms (row-sparsity inducing)"""
    A = ensure_matrix(A)
    return float(np.sum(row_norms(A)))


def solve_spd(A: DenseMatrix, B: DenseMatrix) -> DenseMatrix:
    """
    Solve A·X = B for symmetric positive definite A via Cholesky.

    No implicit ridge is added: a nonpositive pivot raises NotPositiveDefinite and
    the caller decides how to regularize.
    """
    A = ensure_matrix(A, "A")
    B = np.asarray(B, dtype=np.float64)
    vector_rhs = B.ndim == 1
    if vector_rhs:
        B = B.reshape(-1, 1)
    B = ensure_matrix(B, "B", allow_empty=True)

    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"❌ solve_spd: A должна быть квадратной, получено {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"❌ solve_spd: A {A.shape} и B {B.shape} не согласованы")

    # symmetrize, the caller's products are symmetric only up to rounding
    A_sym = (A + A.T) * 0.5
    try:
        factor = sla.cho_factor(A_sym, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(f"❌ Разложение Холецкого не удалось: {exc}") from exc

    X = sla.cho_solve(factor, B, check_finite=False)
    if not np.all(np.isfinite(X)):
        raise NotPositiveDefinite("❌ Решение SPD системы содержит NaN/Inf")
    return X.ravel() if vector_rhs else X


def spd_residual(A: DenseMatrix, X: DenseMatrix, B: DenseMatrix) -> float:
    """‖A·X − B‖_F / ‖B‖_F (0 when B is zero and X solves exactly)"""
    resid = np.linalg.norm(A @ X - B)
    scale = np.linalg.norm(B)
    return float(resid / scale) if scale > 0 else float(resid)


def make_rng(seed: int) -> np.random.Generator:
    """Fresh PCG64 generator for a seed; never shared between calls"""
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(seed: int, stream: int) -> int:
    """Независимый воспроизводимый под-сид (seed, stream) -> 63-bit int"""
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def random_uniform_matrix(rows: int, cols: int, seed: int, lo: float = -1.0, hi: float = 1.0) -> DenseMatrix:
    """Seeded rows×cols matrix with entries uniform in [lo, hi)"""
    if rows < 1 or cols < 1:
        raise InvalidDimension(f"❌ Размеры должны быть ≥ 1, получено {rows}×{cols}")
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidRange(f"❌ Некорректный диапазон [{lo}, {hi})")
    rng = make_rng(seed)
    return rng.uniform(lo, hi, size=(rows, cols))


def random_spd_matrix(d: int, seed: int, shift: float = 1.0) -> DenseMatrix:
    """GᵀG + shift·I with G uniform [−1, 1), handy for checks"""
    G = random_uniform_matrix(d, d, seed)
    return G.T @ G + shift * np.eye(d)


def relative_change(new: DenseMatrix, old: Optional[DenseMatrix]) -> float:
    """‖new − old‖_F / (1 + ‖old‖_F)"""
    if old is None:
        return float("inf")
    return float(np.linalg.norm(new - old) / (1.0 + np.linalg.norm(old)))
