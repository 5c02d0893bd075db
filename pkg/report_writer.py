"""
Report emission module.
Writes accuracy tables, confusion matrices, objective traces, split manifests
and sweep curves as CSV or JSON files.

CSV numbers use 6 significant digits (%.6g); JSON keeps full float repr.
"""
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Union

import numpy as np
import pandas as pd

from data_pipeline import write_split_manifest
from errors import ReportWriteError
from logger import logger

if TYPE_CHECKING:
    from experiment_harness import AggregateResult, CurveResult

CSV_FLOAT_FORMAT = "%.6g"
REPORT_SCHEMA = "ptelm-report/1"
CURVE_SCHEMA = "ptelm-curve/1"
FORMATS = ("csv", "json")


def _write_frame(frame: pd.DataFrame, path: Path, index: bool = False, index_label: str = None) -> Path:
    frame.to_csv(path, index=index, index_label=index_label, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def confusion_frame(matrix: np.ndarray) -> pd.DataFrame:
    """c×c таблица: строки — истинный класс, колонки — предсказанный"""
    c = matrix.shape[0]
    return pd.DataFrame(matrix, index=pd.Index(range(c), name="truth\\pred"), columns=[str(j) for j in range(c)])


def _write_manifests(result: "AggregateResult", root: Path) -> List[Path]:
    written = []
    for trial in result.trials:
        for role, (train, test) in trial.splits.items():
            path = root / "splits" / f"trial{trial.trial_index:03d}_{role}.txt"
            written.append(write_split_manifest(path, train, test, role, trial.split_spec))
    return written


def _emit_csv(result: "AggregateResult", root: Path) -> List[Path]:
    written = []
    summary = pd.DataFrame([
        {"method": m, "mean": result.mean[m], "std": result.std[m],
         "trials": len(result.trials), "single_trial": result.single_trial}
        for m in result.methods
    ])
    written.append(_write_frame(summary, root / "summary.csv"))

    rows = [{"trial": t.trial_index, "method": m, "accuracy": t.accuracies[m], "test_size": t.test_size}
            for t in result.trials for m in result.methods]
    written.append(_write_frame(pd.DataFrame(rows), root / "accuracy.csv"))

    confusion_dir = root / "confusion"
    confusion_dir.mkdir(parents=True, exist_ok=True)
    for m in result.methods:
        for t in result.trials:
            path = confusion_dir / f"{m}_trial{t.trial_index:03d}.csv"
            written.append(_write_frame(confusion_frame(t.confusions[m]), path, index=True, index_label="truth\\pred"))
        path = confusion_dir / f"{m}_mean.csv"
        written.append(_write_frame(confusion_frame(result.mean_confusion[m]), path, index=True,
                                    index_label="truth\\pred"))

    traces = [{"trial": t.trial_index, "iteration": i + 1, "objective": v}
              for t in result.trials for i, v in enumerate(t.objective_trace)]
    frame = pd.DataFrame(traces, columns=["trial", "iteration", "objective"])
    written.append(_write_frame(frame, root / "objective_trace.csv"))
    return written


def report_payload(result: "AggregateResult") -> Dict[str, Any]:
    """JSON-совместимое представление отчета (схема ptelm-report/1, см. README)"""
    return {
        "schema": REPORT_SCHEMA,
        "methods": list(result.methods),
        "class_count": result.class_count,
        "single_trial": result.single_trial,
        "summary": {m: {"mean": result.mean[m], "std": result.std[m]} for m in result.methods},
        "mean_confusion": {m: result.mean_confusion[m].tolist() for m in result.methods},
        "trials": [
            {
                "trial": t.trial_index,
                "test_size": t.test_size,
                "accuracy": {m: t.accuracies[m] for m in result.methods},
                "confusion": {m: t.confusions[m].tolist() for m in result.methods},
                "objective_trace": list(t.objective_trace),
            }
            for t in result.trials
        ],
    }


def emit_report(result: "AggregateResult", fmt: str = "csv", output_dir: Union[str, Path] = "results") -> List[Path]:
    """Записать отчет эксперимента; возвращает список созданных файлов"""
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise ValueError(f"❌ Неизвестный формат отчета '{fmt}'")
    root = Path(output_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            written = _emit_csv(result, root)
        else:
            path = root / "report.json"
            path.write_text(json.dumps(report_payload(result), indent=2) + "\n", encoding="utf-8")
            written = [path]
        written += _write_manifests(result, root)
    except OSError as exc:
        raise ReportWriteError(f"❌ Не удалось записать отчет в {root}: {exc}") from exc

    logger.report(f"Отчет ({fmt}) записан в {root}: {len(written)} файлов")
    return written


def emit_curve(curve: "CurveResult", fmt: str = "csv", output_dir: Union[str, Path] = "results") -> Path:
    """Кривая value → (mean, std) по методам: sweep_<param>.csv или .json"""
    root = Path(output_dir)
    rows = [{"value": point.value, "method": m, "mean": point.mean[m], "std": point.std[m]}
            for point in curve.points for m in curve.methods]
    try:
        root.mkdir(parents=True, exist_ok=True)
        if fmt.lower() == "json":
            path = root / f"sweep_{curve.param}.json"
            payload = {"schema": CURVE_SCHEMA, "param": curve.param, "rows": rows}
            path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        else:
            path = _write_frame(pd.DataFrame(rows, columns=["value", "method", "mean", "std"]),
                                root / f"sweep_{curve.param}.csv")
    except OSError as exc:
        raise ReportWriteError(f"❌ Не удалось записать кривую в {root}: {exc}") from exc
    logger.report(f"Кривая {curve.param} записана: {path}")
    return path
