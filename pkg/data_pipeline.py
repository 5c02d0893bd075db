"""
Data pipeline module.
CSV ingestion, standardization, PCA reduction and the per-class sampling protocol
that produces reproducible train/test splits. Also the synthetic rotated-Gaussians
domain shift used for desk checks.
"""
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import (DataError, EmptyFile, InsufficientClassSamples, InvalidDimension, LabelOutOfRange,
                    ParseError, RaggedRows)
from logger import logger
from numerics import DenseMatrix, derive_seed, ensure_matrix, make_rng

CONSTANT_STD = 1e-12

# labeled source samples per class of the Office-Caltech protocol
OFFICE_SOURCE_PER_CLASS = {"amazon": 20, "webcam": 8, "dslr": 8, "caltech": 8}


class SplitRole(Enum):
    SOURCE = "source"
    TARGET = "target"

    @property
    def stream(self) -> int:
        return 101 if self is SplitRole.SOURCE else 102


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """
    One domain: features X [N × d], dense labels y in [0, c).

    label_mapping maps original file labels to dense ones; indices, when set,
    are the row positions of this subset inside the dataset it was drawn from.
    """
    name: str
    X: DenseMatrix
    y: np.ndarray
    class_count: int
    label_mapping: Dict[int, int] = field(default_factory=dict)
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        X = ensure_matrix(self.X, f"{self.name}.X", allow_empty=True)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if y.ndim != 1 or y.size != X.shape[0]:
            raise DataError(f"❌ {self.name}: {X.shape[0]} строк признаков, но {y.size} меток")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise LabelOutOfRange(f"❌ {self.name}: метки вне диапазона [0, {self.class_count})")

    @property
    def size(self) -> int:
        return int(self.y.size)

    @property
    def n_features(self) -> int:
        return int(self.X.shape[1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.class_count)

    def subset(self, rows: np.ndarray) -> "DomainDataset":
        rows = np.asarray(rows, dtype=np.int64)
        base = rows if self.indices is None else self.indices[rows]
        return DomainDataset(name=self.name, X=self.X[rows], y=self.y[rows], class_count=self.class_count,
                             label_mapping=dict(self.label_mapping), indices=base)

    def with_features(self, X: DenseMatrix) -> "DomainDataset":
        return DomainDataset(name=self.name, X=X, y=self.y, class_count=self.class_count,
                             label_mapping=dict(self.label_mapping), indices=self.indices)


@dataclass(frozen=True)
class SplitSpec:
    """Per-class sampling counts of one trial"""
    source_per_class: int
    target_labeled_per_class: int
    trial_seed: int = 0

    def per_class(self, role: SplitRole) -> int:
        return self.source_per_class if role is SplitRole.SOURCE else self.target_labeled_per_class


# ========== CSV ==========

_RAGGED_RE = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def _read_frame(path: Path, has_header: bool) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, header=0 if has_header else None, dtype=str,
                            keep_default_na=False, encoding="utf-8", skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"❌ Пустой файл: {path}") from None
    except pd.errors.ParserError as exc:
        match = _RAGGED_RE.search(str(exc))
        if match:
            expected, line, got = (int(g) for g in match.groups())
            raise RaggedRows(row=line, expected=expected, got=got) from None
        raise DataError(f"❌ Не удалось прочитать {path}: {exc}") from None
    if frame.shape[0] == 0:
        raise EmptyFile(f"❌ В файле нет строк данных: {path}")

    # fewer fields than the widest row come back as NaN
    missing = frame.isna().to_numpy()
    if missing.any():
        row = int(np.argwhere(missing.any(axis=1))[0][0])
        got = int((~missing[row]).sum())
        raise RaggedRows(row=row, expected=frame.shape[1], got=got)
    return frame


def _parse_float_column(values: np.ndarray, col: int) -> np.ndarray:
    try:
        parsed = values.astype(np.float64)
    except (TypeError, ValueError):
        parsed = None
    if parsed is None or not np.all(np.isfinite(parsed)):
        parsed = np.empty(values.size, dtype=np.float64)
        for row, raw in enumerate(values):
            try:
                number = float(str(raw).strip())
            except ValueError:
                raise ParseError(row, col, str(raw)) from None
            if not np.isfinite(number):
                raise ParseError(row, col, str(raw))
            parsed[row] = number
    return parsed


def _parse_label_column(values: np.ndarray, col: int) -> np.ndarray:
    labels = np.empty(values.size, dtype=np.int64)
    for row, raw in enumerate(values):
        try:
            labels[row] = int(str(raw).strip())
        except ValueError:
            raise ParseError(row, col, str(raw)) from None
    return labels


def load_csv(path: Union[str, Path], has_header: bool = False, label_column: int = -1,
             name: Optional[str] = None) -> DomainDataset:
    """
    Загрузить домен из CSV (UTF-8, через запятую).

    Признаки: все колонки кроме label_column, в исходном порядке. Метки
    переотображаются в плотный диапазон [0, c); отображение хранится в label_mapping.
    Ошибки ParseError(row, col) используют 0-based индексы строки данных и колонки.
    """
    path = Path(path)
    logger.data(f"Читаю {path}")
    frame = _read_frame(path, has_header)
    raw = frame.to_numpy(dtype=object)
    n_cols = raw.shape[1]
    if not -n_cols <= label_column < n_cols:
        raise DataError(f"❌ Колонка меток {label_column} вне диапазона (колонок: {n_cols})")
    label_col = label_column % n_cols
    feature_cols = [j for j in range(n_cols) if j != label_col]
    if not feature_cols:
        raise DataError(f"❌ В {path} нет колонок признаков")

    X = np.column_stack([_parse_float_column(raw[:, j], j) for j in feature_cols])
    original = _parse_label_column(raw[:, label_col], label_col)
    uniques = np.unique(original)
    mapping = {int(label): dense for dense, label in enumerate(uniques)}
    y = np.searchsorted(uniques, original)

    dataset = DomainDataset(name=name or path.stem, X=X, y=y, class_count=len(uniques), label_mapping=mapping)
    logger.data(f"{dataset.name}: {dataset.size} строк, {dataset.n_features} признаков, {dataset.class_count} классов")
    return dataset


def save_csv(dataset: DomainDataset, path: Union[str, Path], has_header: bool = True) -> Path:
    """Сохранить домен: признаки с полной точностью (%.17g), метка последней колонкой в исходных значениях"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    inverse = {dense: original for original, dense in dataset.label_mapping.items()}
    labels = [inverse.get(int(v), int(v)) for v in dataset.y]
    frame = pd.DataFrame(dataset.X, columns=[f"f{j}" for j in range(dataset.n_features)])
    frame["label"] = labels
    frame.to_csv(path, index=False, header=has_header, float_format="%.17g", lineterminator="\n")
    return path


# ========== STANDARDIZATION ==========

def standardize(X: DenseMatrix) -> Tuple[DenseMatrix, np.ndarray, np.ndarray]:
    """
    Column-wise zero mean / unit variance with the population (divisor N) convention.
    Constant columns become 0 and their std is recorded as 1.
    """
    X = ensure_matrix(X, "X")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= CONSTANT_STD
    std = np.where(constant, 1.0, std)
    Z = (X - mean) / std
    Z[:, constant] = 0.0
    return Z, mean, std


def apply_standardization(X: DenseMatrix, mean: np.ndarray, std: np.ndarray) -> DenseMatrix:
    return (ensure_matrix(X, "X", allow_empty=True) - mean) / std


def standardize_dataset(dataset: DomainDataset) -> DomainDataset:
    Z, _, _ = standardize(dataset.X)
    return dataset.with_features(Z)


# ========== PCA ==========

@dataclass(frozen=True, eq=False)
class PcaBasis:
    mean: np.ndarray
    components: DenseMatrix          # d × k, orthonormal columns
    singular_values: np.ndarray      # top-k of the centered data
    explained_variance_ratio: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[1]


def pca_fit(X: DenseMatrix, k: int) -> PcaBasis:
    """
    Deterministic truncated SVD of the centered X.
    Sign convention: each component's largest-magnitude entry is positive.
    """
    X = ensure_matrix(X, "X")
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise InvalidDimension(f"❌ k={k} должно быть в [1, {min(n, d)}]")

    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:k].T.copy()
    pivots = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[pivots, np.arange(k)])
    components *= np.where(signs == 0, 1.0, signs)

    tol = s.max() * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if k > rank:
        logger.warning(f"🚨 RankDeficient: k={k} больше численного ранга {rank}, лишние компоненты обнулены")
        components[:, rank:] = 0.0

    total = float(np.sum(s ** 2))
    ratio = (s[:k] ** 2) / total if total > 0 else np.zeros(k)
    return PcaBasis(mean=mean, components=components, singular_values=s[:k].copy(), explained_variance_ratio=ratio)


def pca_apply(basis: PcaBasis, X: DenseMatrix) -> DenseMatrix:
    X = ensure_matrix(X, "X", allow_empty=True)
    if X.shape[1] != basis.mean.size:
        raise DataError(f"❌ PCA: ожидалось {basis.mean.size} признаков, получено {X.shape[1]}")
    return (X - basis.mean) @ basis.components


def pca_fit_transform(X: DenseMatrix, k: int) -> Tuple[DenseMatrix, DenseMatrix]:
    basis = pca_fit(X, k)
    return pca_apply(basis, X), basis.components


# ========== SPLITS ==========

def sample_split(dataset: DomainDataset, spec: SplitSpec,
                 role: Union[SplitRole, str]) -> Tuple[DomainDataset, DomainDataset]:
    """
    Draw exactly per_class samples of every class without replacement into train.
    Target: every other row goes to test. Source: test is empty.
    """
    role = SplitRole(role) if not isinstance(role, SplitRole) else role
    need = spec.per_class(role)
    if need < 1:
        raise DataError(f"❌ Число примеров на класс должно быть ≥ 1, получено {need}")
    rng = make_rng(derive_seed(spec.trial_seed, role.stream))

    chosen: List[np.ndarray] = []
    for label in range(dataset.class_count):
        rows = np.flatnonzero(dataset.y == label)
        if rows.size < need:
            raise InsufficientClassSamples(label, int(rows.size), need)
        chosen.append(np.sort(rng.choice(rows, size=need, replace=False)))
    train_rows = np.concatenate(chosen)

    if role is SplitRole.TARGET:
        test_rows = np.setdiff1d(np.arange(dataset.size), train_rows)
    else:
        test_rows = np.empty(0, dtype=np.int64)
    return dataset.subset(train_rows), dataset.subset(test_rows)


def office_source_per_class(name: str) -> Optional[int]:
    return OFFICE_SOURCE_PER_CLASS.get(str(name).lower())


def write_split_manifest(path: Union[str, Path], train: DomainDataset, test: DomainDataset,
                         role: Union[SplitRole, str], spec: SplitSpec) -> Path:
    """Текстовый манифест: выбранные индексы строк по классам (train и test)"""
    role = SplitRole(role) if not isinstance(role, SplitRole) else role
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "# split manifest",
        f"# dataset={train.name} role={role.value} trial_seed={spec.trial_seed} per_class={spec.per_class(role)}",
    ]
    for part, subset in (("train", train), ("test", test)):
        indices = subset.indices if subset.indices is not None else np.arange(subset.size)
        for label in range(subset.class_count):
            rows = indices[subset.y == label]
            lines.append(f"{part} class {label}: " + " ".join(str(int(r)) for r in rows))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_split_manifest(path: Union[str, Path]) -> Dict[str, Dict[int, List[int]]]:
    result: Dict[str, Dict[int, List[int]]] = {"train": {}, "test": {}}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(":")
        part, _, label = head.split()
        result[part][int(label)] = [int(v) for v in rest.split()]
    return result


# ========== SYNTHETIC SHIFT ==========

def make_rotated_gaussians(per_class: int, class_count: int = 3, rotation_deg: float = 0.0,
                           radius: float = 3.0, spread: float = 1.0, seed: int = 0,
                           name: str = "synthetic") -> DomainDataset:
    """2-D isotropic Gaussian blobs on a circle, rotated by rotation_deg"""
    if per_class < 1 or class_count < 2:
        raise InvalidDimension(f"❌ per_class ≥ 1 и class_count ≥ 2, получено {per_class}, {class_count}")
    rng = make_rng(seed)
    angles = np.pi / 2 + 2 * np.pi * np.arange(class_count) / class_count + np.deg2rad(rotation_deg)
    means = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    y = np.repeat(np.arange(class_count), per_class)
    X = means[y] + spread * rng.standard_normal((y.size, 2))
    return DomainDataset(name=name, X=X, y=y, class_count=class_count,
                         label_mapping={k: k for k in range(class_count)})


def make_rotated_shift(source_per_class: int = 100, target_per_class: int = 70, rotation_deg: float = 60.0,
                       class_count: int = 3, radius: float = 3.0, spread: float = 1.0,
                       seed: int = 0) -> Tuple[DomainDataset, DomainDataset]:
    """Пара доменов: цель = источник, повернутый на rotation_deg"""
    source = make_rotated_gaussians(source_per_class, class_count, 0.0, radius, spread,
                                    derive_seed(seed, 11), name="synthetic_source")
    target = make_rotated_gaussians(target_per_class, class_count, rotation_deg, radius, spread,
                                    derive_seed(seed, 12), name="synthetic_target")
    return source, target
