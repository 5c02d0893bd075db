"""
Regularized extreme learning machine.
Random frozen hidden layer, closed-form ridge output weights and argmax prediction.
Serves as the ELM_s / ELM_t baselines and as the feature map used by PTELM.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from errors import DimensionMismatch, InvalidDimension, InvalidRange, LabelOutOfRange
from numerics import DenseMatrix, derive_seed, ensure_matrix, random_uniform_matrix, solve_spd

WEIGHT_RANGE = (-1.0, 1.0)


class Activation(Enum):
    """Activation g(·) of the hidden layer"""
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU = "relu"

    @classmethod
    def parse(cls, value) -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().strip())
        except ValueError:
            raise ValueError(f"❌ Неизвестная активация '{value}' (sigmoid, tanh, relu)") from None

    def apply(self, Z: DenseMatrix) -> DenseMatrix:
        if self is Activation.SIGMOID:
            return expit(Z)
        if self is Activation.TANH:
            return np.tanh(Z)
        return np.maximum(Z, 0.0)


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    """
    Random input weights W [n_features × L], biases b [L] and activation.
    Arrays are read-only: the layer is never retrained.
    """
    W: DenseMatrix
    b: np.ndarray
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        object.__setattr__(self, "W", np.array(self.W, dtype=np.float64))
        object.__setattr__(self, "b", np.array(self.b, dtype=np.float64))
        if self.W.ndim != 2 or self.W.shape[1] < 1:
            raise InvalidDimension(f"❌ Некорректная форма W: {self.W.shape}")
        if self.b.shape != (self.W.shape[1],):
            raise DimensionMismatch(f"❌ W {self.W.shape} и b {self.b.shape} не согласованы")
        self.W.setflags(write=False)
        self.b.setflags(write=False)

    @property
    def n_features(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_nodes(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True, eq=False)
class ElmModel:
    """Trained ELM: hidden layer + output weights β [L × c]"""
    layer: HiddenLayer
    beta: DenseMatrix
    lam: float
    class_count: int

    def predict(self, X: DenseMatrix) -> np.ndarray:
        return predict(self.layer, self.beta, X)


def init_hidden_layer(n_features: int, L: int, activation="sigmoid", seed: int = 0) -> HiddenLayer:
    """Случайный скрытый слой: W и b равномерно из [−1, 1), детерминированно по seed"""
    if n_features < 1 or L < 1:
        raise InvalidDimension(f"❌ n_features и L должны быть ≥ 1, получено {n_features}, {L}")
    lo, hi = WEIGHT_RANGE
    W = random_uniform_matrix(n_features, L, seed, lo, hi)
    b = random_uniform_matrix(1, L, derive_seed(seed, 1), lo, hi)[0]
    return HiddenLayer(W=W, b=b, activation=Activation.parse(activation))


def hidden_map(layer: HiddenLayer, X: DenseMatrix) -> DenseMatrix:
    """H[i, j] = g(W[:, j]·X[i, :] + b[j])"""
    X = ensure_matrix(X, "X", allow_empty=True)
    if X.shape[1] != layer.n_features:
        raise DimensionMismatch(f"❌ X имеет {X.shape[1]} признаков, слой ожидает {layer.n_features}")
    H = layer.activation.apply(X @ layer.W + layer.b)
    return ensure_matrix(H, "H", allow_empty=True)


def train_elm(H: DenseMatrix, Y: DenseMatrix, lam: float) -> DenseMatrix:
    """β = (HᵀH + I/λ)⁻¹ HᵀY"""
    if not lam > 0:
        raise InvalidRange(f"❌ λ должна быть > 0, получено {lam}")
    H = ensure_matrix(H, "H")
    Y = ensure_matrix(Y, "Y")
    if H.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"❌ H {H.shape} и Y {Y.shape}: разное число строк")
    A = H.T @ H + np.eye(H.shape[1]) / lam
    return solve_spd(A, H.T @ Y)


def stationarity_residual(H: DenseMatrix, Y: DenseMatrix, beta: DenseMatrix, lam: float) -> float:
    """‖β + λHᵀ(Hβ − Y)‖_F, zero at the ridge optimum"""
    return float(np.linalg.norm(beta + lam * H.T @ (H @ beta - Y)))


def elm_objective(H: DenseMatrix, Y: DenseMatrix, beta: DenseMatrix, lam: float) -> float:
    """½‖β‖_F² + (λ/2)‖Hβ − Y‖_F²"""
    return float(0.5 * np.sum(beta * beta) + 0.5 * lam * np.sum((H @ beta - Y) ** 2))


def one_hot(labels: Sequence[int], c: int) -> DenseMatrix:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionMismatch("❌ Метки должны быть вектором")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise LabelOutOfRange(f"❌ Метки вне диапазона [0, {c})")
    Y = np.zeros((labels.size, c))
    Y[np.arange(labels.size), labels.astype(np.int64)] = 1.0
    return Y


def decision_scores(layer: HiddenLayer, beta: DenseMatrix, X: DenseMatrix) -> DenseMatrix:
    H = hidden_map(layer, X)
    if H.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"❌ H {H.shape} и β {beta.shape} не согласованы")
    return H @ beta


def predict(layer: HiddenLayer, beta: DenseMatrix, X: DenseMatrix) -> np.ndarray:
    """Row-wise argmax of Hβ; ties go to the lowest column index"""
    return argmax_rows(decision_scores(layer, beta, X))


def argmax_rows(scores: DenseMatrix) -> np.ndarray:
    # np.argmax returns the first maximum
    return np.argmax(scores, axis=1).astype(np.int64)


def accuracy(pred: Sequence[int], truth: Sequence[int]) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"❌ Длины предсказаний {pred.shape} и меток {truth.shape} различаются")
    if pred.size == 0:
        return 0.0
    return float(np.mean(pred == truth))


def fit_elm(X: DenseMatrix, y: Sequence[int], layer: HiddenLayer, lam: float,
            class_count: Optional[int] = None) -> ElmModel:
    """Обучить ELM на сырых признаках с заданным скрытым слоем"""
    y = np.asarray(y)
    c = int(class_count if class_count is not None else y.max() + 1)
    beta = train_elm(hidden_map(layer, X), one_hot(y, c), lam)
    return ElmModel(layer=layer, beta=beta, lam=lam, class_count=c)
