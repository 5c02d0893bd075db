"""
Experiment harness.
Runs seeded multi-trial domain-shift experiments comparing ELM_s, ELM_t and PTELM,
aggregates mean ± std, sweeps single hyperparameters and labeled-target counts.

Per trial k the seed is base_seed + k: it drives the source/target split draws and the
hidden layer shared by every method, so all methods see the same test set.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config_loader import ConfigLoader, config
from data_pipeline import (DomainDataset, SplitRole, SplitSpec, load_csv, make_rotated_shift, pca_apply,
                           pca_fit, sample_split, standardize_dataset, write_split_manifest)
from elm_core import fit_elm
from errors import ClassMismatch, ConfigError, EmptyDomain, LabelOutOfRange, PtelmError, TrialFailed
from logger import logger
from numerics import derive_seed
from ptelm_solver import PtelmHyperparams, build_layers, predict_target, train_ptelm

METHODS = ("elm_s", "elm_t", "ptelm")
DATA_SOURCES = ("csv", "rotated_gaussians")

# sweepable parameter → PtelmHyperparams field
SWEEP_PARAMS = {
    "lambda1": "lambda1", "λ1": "lambda1",
    "lambda2": "lambda2", "λ2": "lambda2",
    "lambda3": "lambda3", "λ3": "lambda3",
    "L": "hidden_nodes", "hidden_nodes": "hidden_nodes",
}


@dataclass(frozen=True)
class SyntheticShift:
    """Rotated-Gaussians generator settings"""
    source_per_class: int = 100
    target_per_class: int = 70
    rotation_deg: float = 60.0
    radius: float = 3.0
    spread: float = 1.0
    class_count: int = 3
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment"""
    source_path: Optional[str] = None
    target_path: Optional[str] = None
    source_name: str = "source"
    target_name: str = "target"
    has_header: bool = False
    label_column: int = -1
    split: SplitSpec = field(default_factory=lambda: SplitSpec(20, 3, 0))
    trials: int = 20
    methods: Tuple[str, ...] = METHODS
    hyperparams: PtelmHyperparams = field(default_factory=PtelmHyperparams)
    elm_lambda: float = 1.0
    pca_dims: Optional[int] = None
    standardize: bool = True
    base_seed: int = 0
    output_dir: str = "results"
    report_format: str = "csv"
    workers: int = 1
    data_source: str = "csv"
    synthetic: SyntheticShift = field(default_factory=SyntheticShift)
    progress_bar: bool = True

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"❌ trials должно быть целым ≥ 1, получено {self.trials}")
        if not self.methods:
            raise ConfigError("❌ Список методов пуст")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"❌ Неизвестные методы {unknown} (доступны {', '.join(METHODS)})")
        if not (np.isfinite(self.elm_lambda) and self.elm_lambda > 0):
            raise ConfigError(f"❌ elm_lambda должна быть > 0, получено {self.elm_lambda}")
        if self.pca_dims is not None and (int(self.pca_dims) != self.pca_dims or self.pca_dims < 1):
            raise ConfigError(f"❌ pca_dims должно быть целым ≥ 1, получено {self.pca_dims}")
        if self.data_source not in DATA_SOURCES:
            raise ConfigError(f"❌ Неизвестный data_source '{self.data_source}'")
        if self.report_format not in ("csv", "json"):
            raise ConfigError(f"❌ report_format должен быть csv или json, получено '{self.report_format}'")
        if self.workers < 1:
            raise ConfigError(f"❌ workers должно быть ≥ 1, получено {self.workers}")
        if self.split.source_per_class < 1 or self.split.target_labeled_per_class < 1:
            raise ConfigError("❌ source_per_class и target_labeled_per_class должны быть ≥ 1")
        if self.data_source == "csv":
            for key in ("source_path", "target_path"):
                path = getattr(self, key)
                if not path or not Path(path).is_file():
                    raise ConfigError(f"❌ {key}: файл не найден ({path})")

    @property
    def source_per_class(self) -> int:
        return self.split.source_per_class

    @property
    def target_labeled_per_class(self) -> int:
        return self.split.target_labeled_per_class

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        """Собрать конфигурацию из плоского словаря (ключи как в файле эксперимента)"""
        values = dict(values)
        try:
            hp = PtelmHyperparams.from_dict(values)
            base_seed = int(values.get("base_seed", 0))
            synthetic = SyntheticShift(**{
                f.name: values[f"synthetic_{f.name}"] for f in fields(SyntheticShift)
                if f"synthetic_{f.name}" in values
            })
            split = SplitSpec(int(values.get("source_per_class", 20)),
                              int(values.get("target_labeled_per_class", 3)), base_seed)
            methods = values.get("methods", METHODS)
            if isinstance(methods, str):
                methods = [m for m in methods.replace(";", ",").split(",") if m.strip()]
            pca_dims = values.get("pca_dims")
            own = {f.name for f in fields(cls)} - {"split", "hyperparams", "synthetic", "methods", "pca_dims"}
            plain = {k: v for k, v in values.items() if k in own}
            plain["base_seed"] = base_seed
            return cls(split=split, hyperparams=hp, synthetic=synthetic,
                       methods=tuple(str(m).strip().lower() for m in methods),
                       pca_dims=None if pca_dims is None else int(pca_dims), **plain)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"❌ Некорректная конфигурация эксперимента: {exc}") from exc

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Переопределить поля; параметры солвера и размеры выборок направляются во вложенные объекты"""
        hp_fields = {f.name for f in fields(PtelmHyperparams)}
        hp = {k: overrides.pop(k) for k in list(overrides) if k in hp_fields}
        split = {k: overrides.pop(k) for k in list(overrides)
                 if k in ("source_per_class", "target_labeled_per_class")}
        cfg = replace(self, **overrides) if overrides else self
        if "base_seed" in overrides:
            split.setdefault("trial_seed", cfg.base_seed)
        if hp:
            cfg = replace(cfg, hyperparams=cfg.hyperparams.with_overrides(**hp))
        if split:
            cfg = replace(cfg, split=replace(cfg.split, **split))
        return cfg

    def trial_seed(self, trial_index: int) -> int:
        return self.base_seed + trial_index

    def summary(self) -> Dict[str, Any]:
        hp = self.hyperparams
        data = (f"{self.source_name} → {self.target_name}" if self.data_source == "csv"
                else f"rotated_gaussians ({self.synthetic.rotation_deg:g}°)")
        return {
            "Данные": data,
            "Методы": ", ".join(self.methods),
            "Испытаний": self.trials,
            "Источник/цель на класс": f"{self.source_per_class}/{self.target_labeled_per_class}",
            "L": hp.hidden_nodes,
            "λ1, λ2, λ3": f"{hp.lambda1:g}, {hp.lambda2:g}, {hp.lambda3:g}",
            "PCA": self.pca_dims or "нет",
            "Выход": self.output_dir,
        }


@dataclass(frozen=True, eq=False)
class TrialResult:
    trial_index: int
    accuracies: Dict[str, float]
    confusions: Dict[str, np.ndarray]
    objective_trace: Tuple[float, ...]
    test_size: int
    class_count: int
    split_spec: SplitSpec
    splits: Dict[str, Tuple[DomainDataset, DomainDataset]]


@dataclass(frozen=True, eq=False)
class AggregateResult:
    methods: Tuple[str, ...]
    mean: Dict[str, float]
    std: Dict[str, float]
    mean_confusion: Dict[str, np.ndarray]
    trials: List[TrialResult]
    class_count: int
    single_trial: bool


@dataclass(frozen=True)
class CurvePoint:
    value: float
    mean: Dict[str, float]
    std: Dict[str, float]


@dataclass(frozen=True)
class CurveResult:
    """Table of (value, mean, std) per method for a one-parameter study"""
    param: str
    methods: Tuple[str, ...]
    points: Tuple[CurvePoint, ...]


def load_experiment_config(path, overrides: Optional[Dict[str, Any]] = None,
                           loader: Optional[ConfigLoader] = None) -> ExperimentConfig:
    """Файл эксперимента поверх config.json → ExperimentConfig"""
    values = (loader or config).load_experiment_file(path, overrides)
    return ExperimentConfig.from_dict(values)


# ========== DATA ==========

def _check_domains(cfg: ExperimentConfig, source: DomainDataset,
                   target: DomainDataset) -> Tuple[DomainDataset, DomainDataset]:
    if source.size == 0 or target.size == 0:
        raise EmptyDomain("❌ Один из доменов пуст")
    if source.class_count != target.class_count or set(source.label_mapping) != set(target.label_mapping):
        raise ClassMismatch(f"❌ Наборы классов доменов различаются: "
                            f"{sorted(source.label_mapping)} и {sorted(target.label_mapping)}")
    # elm_s applies the source layer to target rows
    if "elm_s" in cfg.methods and cfg.pca_dims is None and source.n_features != target.n_features:
        raise ConfigError(f"❌ elm_s требует одинаковой размерности доменов ({source.n_features} и "
                          f"{target.n_features}): задайте pca_dims или уберите elm_s из methods")
    return source, target


def load_domains(cfg: ExperimentConfig, trial_index: int = 0) -> Tuple[DomainDataset, DomainDataset]:
    """
    Загрузить (или сгенерировать) оба домена и стандартизовать каждый отдельно.
    Synthetic domains are redrawn for every trial; CSV domains do not depend on trial_index.
    """
    if cfg.data_source == "rotated_gaussians":
        s = cfg.synthetic
        source, target = make_rotated_shift(s.source_per_class, s.target_per_class, s.rotation_deg,
                                            s.class_count, s.radius, s.spread,
                                            derive_seed(s.seed, cfg.trial_seed(trial_index)))
    else:
        source = load_csv(cfg.source_path, cfg.has_header, cfg.label_column, cfg.source_name)
        target = load_csv(cfg.target_path, cfg.has_header, cfg.label_column, cfg.target_name)
    if cfg.standardize:
        source, target = standardize_dataset(source), standardize_dataset(target)
    return _check_domains(cfg, source, target)


def _project(cfg: ExperimentConfig, src_train: DomainDataset, tgt_train: DomainDataset,
             tgt_test: DomainDataset) -> Tuple[DomainDataset, DomainDataset, DomainDataset]:
    """PCA fitted on the union of the training rows, applied to every split"""
    if cfg.pca_dims is None:
        return src_train, tgt_train, tgt_test
    if src_train.n_features != tgt_train.n_features:
        raise ConfigError("❌ PCA требует одинаковой размерности признаков в доменах")
    basis = pca_fit(np.vstack([src_train.X, tgt_train.X]), cfg.pca_dims)
    return tuple(ds.with_features(pca_apply(basis, ds.X)) for ds in (src_train, tgt_train, tgt_test))


# ========== TRIALS ==========

def confusion_matrix(pred: Sequence[int], truth: Sequence[int], c: int) -> np.ndarray:
    """(i, j) — число примеров класса i, предсказанных как j"""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LabelOutOfRange(f"❌ Длины предсказаний {pred.shape} и меток {truth.shape} различаются")
    for name, labels in (("pred", pred), ("truth", truth)):
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise LabelOutOfRange(f"❌ {name}: метки вне диапазона [0, {c})")
    matrix = np.zeros((c, c), dtype=np.int64)
    np.add.at(matrix, (truth, pred), 1)
    return matrix


def accuracy_from_confusion(matrix: np.ndarray) -> float:
    total = int(matrix.sum())
    return float(np.trace(matrix)) / total if total else 0.0


def run_trial(cfg: ExperimentConfig, trial_index: int,
              domains: Optional[Tuple[DomainDataset, DomainDataset]] = None) -> TrialResult:
    """Одно испытание: сплиты, обучение выбранных методов, оценка на общем тесте цели"""
    seed = cfg.trial_seed(trial_index)
    if domains is None or cfg.data_source == "rotated_gaussians":
        domains = load_domains(cfg, trial_index)
    source, target = domains
    spec = replace(cfg.split, trial_seed=seed)

    src_train, src_test = sample_split(source, spec, SplitRole.SOURCE)
    tgt_train, tgt_test = sample_split(target, spec, SplitRole.TARGET)
    if tgt_test.size == 0:
        raise EmptyDomain("❌ После выборки размеченных примеров тест цели пуст")
    X_s, X_t, X_test = (ds.X for ds in _project(cfg, src_train, tgt_train, tgt_test))
    c = source.class_count
    hp = cfg.hyperparams
    source_layer, target_layer = build_layers(X_s.shape[1], X_t.shape[1], hp, seed)

    predictions: Dict[str, np.ndarray] = {}
    trace: Tuple[float, ...] = ()
    if "elm_s" in cfg.methods:
        predictions["elm_s"] = fit_elm(X_s, src_train.y, source_layer, cfg.elm_lambda, c).predict(X_test)
    if "elm_t" in cfg.methods:
        predictions["elm_t"] = fit_elm(X_t, tgt_train.y, target_layer, cfg.elm_lambda, c).predict(X_test)
    if "ptelm" in cfg.methods:
        model = train_ptelm(X_s, src_train.y, X_t, tgt_train.y, hp, seed, class_count=c)
        predictions["ptelm"] = predict_target(model, X_test)
        trace = model.objective_trace

    confusions = {m: confusion_matrix(predictions[m], tgt_test.y, c) for m in cfg.methods}
    accuracies = {m: accuracy_from_confusion(confusions[m]) for m in cfg.methods}
    logger.trial(f"Испытание {trial_index}: " + ", ".join(f"{m}={accuracies[m]:.4f}" for m in cfg.methods))

    return TrialResult(
        trial_index=trial_index, accuracies=accuracies, confusions=confusions, objective_trace=trace,
        test_size=tgt_test.size, class_count=c, split_spec=spec,
        splits={SplitRole.SOURCE.value: (src_train, src_test), SplitRole.TARGET.value: (tgt_train, tgt_test)},
    )


def _guarded_trial(cfg: ExperimentConfig, trial_index: int, domains) -> TrialResult:
    try:
        return run_trial(cfg, trial_index, domains)
    except PtelmError as exc:
        raise TrialFailed(trial_index, exc) from exc
    except (ArithmeticError, ValueError) as exc:
        raise TrialFailed(trial_index, exc) from exc


def run_trials(cfg: ExperimentConfig) -> List[TrialResult]:
    """Все испытания 0..trials−1; результат упорядочен по индексу"""
    domains = load_domains(cfg) if cfg.data_source == "csv" else None
    indices = range(cfg.trials)
    progress = tqdm(total=cfg.trials, desc="trials", unit="trial", disable=not cfg.progress_bar, leave=False)
    results: List[TrialResult] = []
    try:
        if cfg.workers == 1:
            for k in indices:
                results.append(_guarded_trial(cfg, k, domains))
                progress.update(1)
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_guarded_trial, cfg, k, domains) for k in indices]
                try:
                    for future in futures:
                        results.append(future.result())
                        progress.update(1)
                except TrialFailed:
                    for future in futures:
                        future.cancel()
                    raise
    finally:
        progress.close()
    return sorted(results, key=lambda r: r.trial_index)


def aggregate(trials: Sequence[TrialResult], methods: Sequence[str]) -> AggregateResult:
    """Mean and sample std (divisor trials−1); a single trial reports std 0"""
    if not trials:
        raise EmptyDomain("❌ Нет испытаний для агрегации")
    mean, std, mean_confusion = {}, {}, {}
    for m in methods:
        accs = np.array([t.accuracies[m] for t in trials])
        mean[m] = float(np.mean(accs))
        std[m] = float(np.std(accs, ddof=1)) if accs.size > 1 else 0.0
        mean_confusion[m] = np.mean(np.stack([t.confusions[m] for t in trials]), axis=0)
    return AggregateResult(methods=tuple(methods), mean=mean, std=std, mean_confusion=mean_confusion,
                           trials=list(trials), class_count=trials[0].class_count,
                           single_trial=len(trials) == 1)


def run_experiment(cfg: ExperimentConfig, write_report: bool = True) -> AggregateResult:
    """Полный эксперимент: испытания, агрегация, отчет"""
    trials = run_trials(cfg)
    result = aggregate(trials, cfg.methods)
    logger.log_stats({m: f"{100 * result.mean[m]:.1f} ± {100 * result.std[m]:.1f}%" for m in cfg.methods},
                     title=f"ТОЧНОСТЬ ({len(trials)} испытаний)")
    if result.single_trial:
        logger.warning("Одно испытание: std принято равным 0")
    if write_report:
        from report_writer import emit_report
        emit_report(result, cfg.report_format, cfg.output_dir)
    return result


# ========== STUDIES ==========

def _curve(cfg: ExperimentConfig, param: str, key: str, values: Sequence[float], cast,
           write_report: bool) -> CurveResult:
    if len(values) == 0:
        raise ConfigError(f"❌ Пустая сетка значений для {param}")
    points = []
    for value in values:
        logger.subsection(f"{param} = {value:g}")
        logger.indent()
        try:
            result = run_experiment(cfg.with_overrides(**{key: cast(value)}), write_report=False)
        finally:
            logger.dedent()
        points.append(CurvePoint(value=float(value), mean=result.mean, std=result.std))
    curve = CurveResult(param=param, methods=tuple(cfg.methods), points=tuple(points))
    if write_report:
        from report_writer import emit_curve
        emit_curve(curve, cfg.report_format, cfg.output_dir)
    return curve


def sensitivity_sweep(cfg: ExperimentConfig, param: str, grid: Sequence[float],
                      write_report: bool = True) -> CurveResult:
    """Менять один параметр (λ1, λ2, λ3 или L) при фиксированных остальных"""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"❌ Параметр '{param}' не поддерживается (lambda1, lambda2, lambda3, L)")
    key = SWEEP_PARAMS[param]
    cast = int if key == "hidden_nodes" else float
    name = "L" if key == "hidden_nodes" else key
    return _curve(cfg, name, key, grid, cast, write_report)


def learning_curve(cfg: ExperimentConfig, counts: Sequence[int], write_report: bool = True) -> CurveResult:
    """Точность в зависимости от числа размеченных примеров цели на класс"""
    return _curve(cfg, "target_labeled_per_class", "target_labeled_per_class", counts, int, write_report)


def emit_split_manifests(cfg: ExperimentConfig, output_dir: Optional[str] = None) -> List[Path]:
    """Только сплиты: манифесты индексов для каждого испытания, без обучения"""
    root = Path(output_dir or cfg.output_dir) / "splits"
    domains = load_domains(cfg) if cfg.data_source == "csv" else None
    written = []
    for k in range(cfg.trials):
        source, target = domains if domains is not None else load_domains(cfg, k)
        spec = replace(cfg.split, trial_seed=cfg.trial_seed(k))
        for role, dataset in ((SplitRole.SOURCE, source), (SplitRole.TARGET, target)):
            train, test = sample_split(dataset, spec, role)
            written.append(write_split_manifest(root / f"trial{k:03d}_{role.value}.txt", train, test, role, spec))
    logger.report(f"Манифесты сплитов: {len(written)} файлов в {root}")
    return written
