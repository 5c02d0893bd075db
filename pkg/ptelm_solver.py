"""
Parameter transfer ELM solver.

Jointly learns the source output weights β_s (ℓ2,1-regularized) and the
projection M bridging source and target hyperplanes, β_t = M·β_s, by
alternating closed-form block updates:

    L(β_s, M) = ½‖H_t M β_s − Y_t‖² + (λ1/2)‖H_s β_s − Y_s‖²
              + (λ2/2)‖β_s‖_{2,1} + (λ3/2)‖M β_s‖²

The β_s block is solved by iterative reweighting with the diagonal matrix
D_ii = 1/(2‖β_s row i‖ + ε); the M block has a closed form whose rank-deficient
Gram term β_sβ_sᵀ is repaired with a scale-aware ridge δ.
"""
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from elm_core import Activation, HiddenLayer, argmax_rows, hidden_map, init_hidden_layer, one_hot
from errors import ClassMismatch, ConfigError, DegenerateWeights, DimensionMismatch, EmptyDomain
from logger import logger
from numerics import DenseMatrix, derive_seed, ensure_matrix, relative_change, row_norms, solve_spd


@dataclass(frozen=True)
class PtelmHyperparams:
    """
    Trade-offs and iteration controls.

    delta is relative: the ridge added to β_sβ_sᵀ is delta·trace(β_sβ_sᵀ)/L.
    lambda2 and lambda3 may be 0 for the degenerate reductions.
    """
    lambda1: float = 1.0
    lambda2: float = 30.0
    lambda3: float = 10.0
    hidden_nodes: int = 500
    epsilon: float = 1e-8
    delta: float = 1e-8
    inner_max_iters: int = 30
    inner_tol: float = 1e-5
    outer_max_iters: int = 10
    outer_tol: float = 1e-6
    activation: str = "sigmoid"

    def __post_init__(self):
        strictly_positive = ("lambda1", "epsilon", "inner_tol", "outer_tol")
        non_negative = ("lambda2", "lambda3", "delta")
        for name in strictly_positive:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"❌ {name} должен быть > 0, получено {value}")
        for name in non_negative:
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigError(f"❌ {name} должен быть ≥ 0, получено {value}")
        for name in ("hidden_nodes", "inner_max_iters", "outer_max_iters"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"❌ {name} должен быть целым ≥ 1, получено {value}")
        try:
            Activation.parse(self.activation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **overrides) -> "PtelmHyperparams":
        return replace(self, **overrides)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "PtelmHyperparams":
        """Взять только известные поля (остальные ключи игнорируются)"""
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})


@dataclass(frozen=True, eq=False)
class PtelmFit:
    """Result of the alternating optimization on precomputed hidden outputs"""
    beta_s: DenseMatrix
    M: DenseMatrix
    objective_trace: Tuple[float, ...]
    inner_iterations: Tuple[int, ...]
    converged: bool

    @property
    def beta_t(self) -> DenseMatrix:
        return self.M @ self.beta_s


@dataclass(frozen=True, eq=False)
class PtelmModel:
    """Trained PTELM: layers, β_s, M; β_t = M·β_s is always recomputed"""
    source_layer: HiddenLayer
    target_layer: HiddenLayer
    beta_s: DenseMatrix
    M: DenseMatrix
    hyperparams: PtelmHyperparams
    objective_trace: Tuple[float, ...]
    class_count: int
    inner_iterations: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def beta_t(self) -> DenseMatrix:
        return self.M @ self.beta_s

    @property
    def shares_layer(self) -> bool:
        return self.source_layer is self.target_layer

    def row_sparsity(self, rel_threshold: float = 1e-6) -> int:
        """Число строк β_s с нормой ниже rel_threshold·(макс. норма строки)"""
        return count_small_rows(self.beta_s, rel_threshold)


# ========== OBJECTIVES ==========

def _check_chain(H_s, Y_s, H_t, Y_t, beta_s, M):
    H_s = ensure_matrix(H_s, "H_s")
    Y_s = ensure_matrix(Y_s, "Y_s")
    H_t = ensure_matrix(H_t, "H_t", allow_empty=True)
    Y_t = ensure_matrix(Y_t, "Y_t", allow_empty=True)
    L = H_s.shape[1]
    c = Y_s.shape[1]
    if H_s.shape[0] != Y_s.shape[0]:
        raise DimensionMismatch(f"❌ H_s {H_s.shape} и Y_s {Y_s.shape}: разное число строк")
    if H_t.shape[0] != Y_t.shape[0]:
        raise DimensionMismatch(f"❌ H_t {H_t.shape} и Y_t {Y_t.shape}: разное число строк")
    if H_t.shape[1] != L or (Y_t.shape[1] != c and Y_t.shape[0] > 0):
        raise DimensionMismatch(f"❌ Целевые H_t {H_t.shape}, Y_t {Y_t.shape} не согласованы с L={L}, c={c}")
    if beta_s is not None and beta_s.shape != (L, c):
        raise DimensionMismatch(f"❌ β_s должна быть {L}×{c}, получено {beta_s.shape}")
    if M is not None and M.shape != (L, L):
        raise DimensionMismatch(f"❌ M должна быть {L}×{L}, получено {M.shape}")
    return H_s, Y_s, H_t, Y_t.reshape(Y_t.shape[0], c)


def _data_terms(H_s, Y_s, H_t, Y_t, beta_s, M, hp: PtelmHyperparams) -> float:
    beta_t = M @ beta_s
    target = 0.5 * np.sum((H_t @ beta_t - Y_t) ** 2)
    source = 0.5 * hp.lambda1 * np.sum((H_s @ beta_s - Y_s) ** 2)
    bridge = 0.5 * hp.lambda3 * np.sum(beta_t * beta_t)
    return float(target + source + bridge)


def objective(H_s, Y_s, H_t, Y_t, beta_s, M, hp: PtelmHyperparams) -> float:
    """Full training objective L(β_s, M)"""
    H_s, Y_s, H_t, Y_t = _check_chain(H_s, Y_s, H_t, Y_t, beta_s, M)
    penalty = 0.5 * hp.lambda2 * float(np.sum(row_norms(beta_s)))
    return _data_terms(H_s, Y_s, H_t, Y_t, beta_s, M, hp) + penalty


def smoothed_row_penalty(beta_s: DenseMatrix, epsilon: float) -> float:
    """
    Σ φ(‖row‖) with φ(s) = s − (ε/2)·ln(1 + 2s/ε).

    φ is the function whose quadratic majorizer at s₀ has weight
    φ'(s₀)/s₀ = 2/(2s₀ + ε), i.e. exactly the reweighting D of the inner loop.
    """
    s = row_norms(beta_s)
    return float(np.sum(s - 0.5 * epsilon * np.log1p(2.0 * s / epsilon)))


def smoothed_objective(H_s, Y_s, H_t, Y_t, beta_s, M, hp: PtelmHyperparams) -> float:
    """Objective with the ℓ2,1 term replaced by its ε-smoothed form; descends under reweighting"""
    H_s, Y_s, H_t, Y_t = _check_chain(H_s, Y_s, H_t, Y_t, beta_s, M)
    penalty = 0.5 * hp.lambda2 * smoothed_row_penalty(beta_s, hp.epsilon)
    return _data_terms(H_s, Y_s, H_t, Y_t, beta_s, M, hp) + penalty


def transformed_target_hidden(H_t: DenseMatrix, M: DenseMatrix) -> DenseMatrix:
    """H̃_t = H_t·M: the projection read as a column transform of target features"""
    return ensure_matrix(H_t, "H_t", allow_empty=True) @ M


def transformed_objective(H_s, Y_s, H_t_tilde, Y_t, beta, hp: PtelmHyperparams) -> float:
    """½‖H̃_t β − Y_t‖² + (λ1/2)‖H_s β − Y_s‖² + (λ2/2)‖β‖_{2,1}  (no bridge term)"""
    target = 0.5 * np.sum((H_t_tilde @ beta - Y_t) ** 2)
    source = 0.5 * hp.lambda1 * np.sum((H_s @ beta - Y_s) ** 2)
    return float(target + source + 0.5 * hp.lambda2 * np.sum(row_norms(beta)))


# ========== β_s BLOCK ==========

def subgradient_D(beta_s: DenseMatrix, epsilon: float) -> DenseMatrix:
    """Diagonal D with D_ii = 1/(2‖β_s row i‖ + ε)"""
    if not epsilon > 0:
        raise ConfigError(f"❌ ε должен быть > 0, получено {epsilon}")
    return np.diag(1.0 / (2.0 * row_norms(beta_s) + epsilon))


def update_beta_s(H_s, H_t, M, Y_s, Y_t, D, hp: PtelmHyperparams) -> DenseMatrix:
    """
    β_s = (λ1 H_sᵀH_s + MᵀH_tᵀH_t M + λ2 D + λ3 MᵀM)⁻¹ (λ1 H_sᵀY_s + MᵀH_tᵀY_t)
    """
    H_s, Y_s, H_t, Y_t = _check_chain(H_s, Y_s, H_t, Y_t, None, M)
    L = H_s.shape[1]
    if D.shape != (L, L):
        raise DimensionMismatch(f"❌ D должна быть {L}×{L}, получено {D.shape}")
    HtM = H_t @ M
    A = hp.lambda1 * (H_s.T @ H_s) + HtM.T @ HtM + hp.lambda2 * D + hp.lambda3 * (M.T @ M)
    rhs = hp.lambda1 * (H_s.T @ Y_s) + HtM.T @ Y_t
    return solve_spd(A, rhs)


def beta_stationarity_residual(H_s, H_t, M, Y_s, Y_t, D, beta_s, hp: PtelmHyperparams) -> float:
    """‖∂L/∂β_s‖_F with the ℓ2,1 sub-gradient taken as 2Dβ_s"""
    HtM = H_t @ M
    grad = (HtM.T @ (HtM @ beta_s - Y_t)
            + hp.lambda1 * H_s.T @ (H_s @ beta_s - Y_s)
            + hp.lambda2 * D @ beta_s
            + hp.lambda3 * M.T @ M @ beta_s)
    return float(np.linalg.norm(grad))


def iterate_beta_s(H_s, H_t, M, Y_s, Y_t, hp: PtelmHyperparams,
                   beta_init: Optional[DenseMatrix] = None) -> Iterator[Tuple[DenseMatrix, DenseMatrix]]:
    """
    Reweighted iterations of the β_s block: yields (β, D) where D produced β.

    D⁰ = I when no warm start is given, otherwise D⁰ is computed from beta_init,
    which makes every step a majorize-minimize step of the smoothed objective.
    """
    L = np.shape(H_s)[1]
    D = np.eye(L) if beta_init is None else subgradient_D(beta_init, hp.epsilon)
    for _ in range(hp.inner_max_iters):
        beta = update_beta_s(H_s, H_t, M, Y_s, Y_t, D, hp)
        yield beta, D
        D = subgradient_D(beta, hp.epsilon)


def solve_beta_s(H_s, H_t, M, Y_s, Y_t, hp: PtelmHyperparams,
                 beta_init: Optional[DenseMatrix] = None) -> DenseMatrix:
    beta, _ = solve_beta_s_with_count(H_s, H_t, M, Y_s, Y_t, hp, beta_init)
    return beta


def solve_beta_s_with_count(H_s, H_t, M, Y_s, Y_t, hp: PtelmHyperparams,
                            beta_init: Optional[DenseMatrix] = None) -> Tuple[DenseMatrix, int]:
    """Крутим перевзвешивание до сходимости по относительному изменению β или до inner_max_iters"""
    previous = beta_init
    beta = beta_init
    iterations = 0
    for beta, _ in iterate_beta_s(H_s, H_t, M, Y_s, Y_t, hp, beta_init):
        iterations += 1
        if relative_change(beta, previous) < hp.inner_tol:
            break
        previous = beta
    return beta, iterations


# ========== M BLOCK ==========

def gram_delta(beta_s: DenseMatrix, rel_delta: float) -> float:
    """Absolute ridge δ = rel_delta·trace(β_sβ_sᵀ)/L"""
    return float(rel_delta * np.sum(beta_s * beta_s) / beta_s.shape[0])


def update_M(H_t, Y_t, beta_s, lambda3: float, delta: float) -> DenseMatrix:
    """
    M = (H_tᵀH_t + λ3 I)⁻¹ H_tᵀY_t β_sᵀ (β_sβ_sᵀ + δI)⁻¹

    δ is absolute here; it turns the exact minimizer into the minimizer of the
    objective plus (δ/2)·(‖H_t M‖² + λ3‖M‖²).
    """
    H_t = ensure_matrix(H_t, "H_t", allow_empty=True)
    Y_t = ensure_matrix(Y_t, "Y_t", allow_empty=True)
    beta_s = ensure_matrix(beta_s, "beta_s")
    L = beta_s.shape[0]
    if H_t.shape[1] != L or H_t.shape[0] != Y_t.shape[0]:
        raise DimensionMismatch(f"❌ H_t {H_t.shape}, Y_t {Y_t.shape} и β_s {beta_s.shape} не согласованы")
    if Y_t.shape[0] > 0 and Y_t.shape[1] != beta_s.shape[1]:
        raise DimensionMismatch(f"❌ Y_t {Y_t.shape} и β_s {beta_s.shape}: разное число классов")
    if not np.any(row_norms(beta_s) > 0):
        raise DegenerateWeights("❌ β_s нулевая: проекцию M не определить")

    A = H_t.T @ H_t + lambda3 * np.eye(L)
    right = H_t.T @ Y_t.reshape(Y_t.shape[0], beta_s.shape[1]) @ beta_s.T
    left_solved = solve_spd(A, right)
    G = beta_s @ beta_s.T + delta * np.eye(L)
    # G symmetric: X·G⁻¹ = (G⁻¹·Xᵀ)ᵀ
    return solve_spd(G, left_solved.T).T


def m_stationarity_residual(H_t, Y_t, beta_s, M, lambda3: float, delta: float) -> float:
    """‖∂/∂M‖_F of the δ-modified M subproblem"""
    L = beta_s.shape[0]
    A = H_t.T @ H_t + lambda3 * np.eye(L)
    grad = (H_t.T @ (H_t @ M @ beta_s - Y_t) @ beta_s.T
            + lambda3 * M @ beta_s @ beta_s.T
            + delta * A @ M)
    return float(np.linalg.norm(grad))


# ========== OUTER LOOP ==========

def fit_projection(H_s, Y_s, H_t, Y_t, hp: PtelmHyperparams) -> PtelmFit:
    """
    Alternate the β_s block and the M block from M⁰ = I.
    Stops when the relative objective decrease drops below outer_tol.
    """
    H_s, Y_s, H_t, Y_t = _check_chain(H_s, Y_s, H_t, Y_t, None, None)
    L = H_s.shape[1]
    M = np.eye(L)
    beta_s: Optional[DenseMatrix] = None
    trace: List[float] = []
    inner_counts: List[int] = []
    converged = False

    for outer in range(hp.outer_max_iters):
        beta_s, inner = solve_beta_s_with_count(H_s, H_t, M, Y_s, Y_t, hp, beta_init=beta_s)
        M = update_M(H_t, Y_t, beta_s, hp.lambda3, gram_delta(beta_s, hp.delta))
        value = objective(H_s, Y_s, H_t, Y_t, beta_s, M, hp)
        trace.append(value)
        inner_counts.append(inner)
        logger.debug(f"Итерация {outer + 1}: L = {value:.10g}, внутренних шагов {inner}")

        if len(trace) > 1:
            decrease = trace[-2] - trace[-1]
            if decrease < hp.outer_tol * abs(trace[-2]):
                converged = True
                break

    return PtelmFit(beta_s=beta_s, M=M, objective_trace=tuple(trace),
                    inner_iterations=tuple(inner_counts), converged=converged)


def build_layers(n_source_features: int, n_target_features: int,
                 hp: PtelmHyperparams, seed: int) -> Tuple[HiddenLayer, HiddenLayer]:
    """One shared layer when feature dims agree, otherwise two independent layers"""
    source_layer = init_hidden_layer(n_source_features, hp.hidden_nodes, hp.activation, seed)
    if n_source_features == n_target_features:
        return source_layer, source_layer
    target_layer = init_hidden_layer(n_target_features, hp.hidden_nodes, hp.activation, derive_seed(seed, 2))
    return source_layer, target_layer


def resolve_class_count(y_s: np.ndarray, y_t: np.ndarray, class_count: Optional[int] = None) -> int:
    c = int(class_count) if class_count is not None else int(max(y_s.max(), y_t.max())) + 1
    for name, y in (("источника", y_s), ("цели", y_t)):
        if y.min() < 0 or y.max() >= c:
            raise ClassMismatch(f"❌ Метки {name} вне диапазона [0, {c})")
    missing = set(np.unique(y_t).tolist()) - set(np.unique(y_s).tolist())
    if missing:
        raise ClassMismatch(f"❌ Классы цели {sorted(missing)} отсутствуют в источнике")
    return c


def train_ptelm(X_s, y_s: Sequence[int], X_t, y_t: Sequence[int], hp: PtelmHyperparams,
                seed: int, class_count: Optional[int] = None) -> PtelmModel:
    """Полное обучение PTELM на сырых признаках обоих доменов"""
    y_s = np.asarray(y_s, dtype=np.int64)
    y_t = np.asarray(y_t, dtype=np.int64)
    if y_s.size == 0 or np.shape(X_s)[0] == 0:
        raise EmptyDomain("❌ В источнике нет размеченных примеров")
    if y_t.size == 0 or np.shape(X_t)[0] == 0:
        raise EmptyDomain("❌ В цели нет размеченных примеров")
    X_s = ensure_matrix(X_s, "X_s")
    X_t = ensure_matrix(X_t, "X_t")
    if X_s.shape[0] != y_s.size or X_t.shape[0] != y_t.size:
        raise DimensionMismatch("❌ Число строк X и длина y различаются")
    c = resolve_class_count(y_s, y_t, class_count)

    source_layer, target_layer = build_layers(X_s.shape[1], X_t.shape[1], hp, seed)
    H_s = hidden_map(source_layer, X_s)
    H_t = hidden_map(target_layer, X_t)

    logger.solver(f"PTELM: m={H_s.shape[0]}, n={H_t.shape[0]}, L={hp.hidden_nodes}, c={c}, "
                  f"λ=({hp.lambda1:g}, {hp.lambda2:g}, {hp.lambda3:g})")
    fit = fit_projection(H_s, one_hot(y_s, c), H_t, one_hot(y_t, c), hp)
    logger.debug(f"PTELM: {len(fit.objective_trace)} внешних итераций, L = {fit.objective_trace[-1]:.6g}")

    return PtelmModel(source_layer=source_layer, target_layer=target_layer,
                      beta_s=fit.beta_s, M=fit.M, hyperparams=hp,
                      objective_trace=fit.objective_trace, class_count=c,
                      inner_iterations=fit.inner_iterations)


def predict_target(model: PtelmModel, X: DenseMatrix) -> np.ndarray:
    """Argmax of H_t·β_t on the target layer"""
    H = hidden_map(model.target_layer, X)
    return argmax_rows(H @ model.beta_t)


def count_small_rows(beta: DenseMatrix, rel_threshold: float) -> int:
    norms = row_norms(beta)
    top = norms.max() if norms.size else 0.0
    return int(np.sum(norms < rel_threshold * top)) if top > 0 else int(norms.size)
