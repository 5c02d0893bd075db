"""
Experiment config validation module.
Strict parsing and validation of flat experiment files before anything is loaded or trained.
"""
import json
import re
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

SOLVER_KEYS = {
    "lambda1", "lambda2", "lambda3", "hidden_nodes", "epsilon", "delta",
    "inner_max_iters", "inner_tol", "outer_max_iters", "outer_tol", "activation",
}
HARNESS_KEYS = {
    "source_path", "target_path", "source_name", "target_name", "has_header", "label_column",
    "source_per_class", "target_labeled_per_class", "trials", "methods", "elm_lambda", "pca_dims",
    "standardize", "base_seed", "output_dir", "report_format", "workers", "data_source", "progress_bar",
}
SYNTHETIC_KEYS = {
    "synthetic_source_per_class", "synthetic_target_per_class", "synthetic_rotation_deg",
    "synthetic_radius", "synthetic_spread", "synthetic_class_count", "synthetic_seed",
}
KNOWN_KEYS = SOLVER_KEYS | HARNESS_KEYS | SYNTHETIC_KEYS

VALID_METHODS = ("elm_s", "elm_t", "ptelm")
INT_KEYS = ("hidden_nodes", "inner_max_iters", "outer_max_iters", "trials", "source_per_class",
            "target_labeled_per_class", "workers", "synthetic_source_per_class",
            "synthetic_target_per_class", "synthetic_class_count")
POSITIVE_KEYS = ("lambda1", "epsilon", "inner_tol", "outer_tol", "elm_lambda", "synthetic_radius")
NON_NEGATIVE_KEYS = ("lambda2", "lambda3", "delta", "synthetic_spread")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ExperimentConfigValidator:
    """Validates experiment files: syntax, known keys, value ranges, referenced files"""

    @staticmethod
    def parse_config_text(text: str) -> Tuple[bool, Optional[Dict], str]:
        """
        Parse a flat JSON object strictly.
        Lines starting with '#' or '//' are comments.

        Returns: (is_valid, parsed_dict, error_msg)
        """
        if not text or not text.strip():
            return False, None, "Пустой файл конфигурации"

        clean_str = "\n".join(line for line in text.splitlines()
                              if not re.match(r"^\s*(#|//)", line))
        try:
            parsed = json.loads(clean_str)
        except json.JSONDecodeError as e:
            return False, None, f"Некорректный JSON: {str(e)[:80]}"

        if not isinstance(parsed, dict):
            return False, None, "Конфигурация должна быть объектом JSON"

        for key, value in parsed.items():
            if isinstance(value, dict) or (isinstance(value, list) and key != "methods"):
                return False, None, f"Ключ '{key}': допускаются только плоские значения"

        unknown = sorted(set(parsed) - KNOWN_KEYS)
        if unknown:
            return False, None, f"Неизвестные ключи: {', '.join(unknown)}"

        return True, parsed, ""

    @staticmethod
    def validate_methods(methods: Any) -> Tuple[bool, str]:
        if isinstance(methods, str):
            methods = [m for m in methods.split(",") if m.strip()]
        if not isinstance(methods, (list, tuple)) or len(methods) == 0:
            return False, "Список методов 'methods' пуст"
        unknown = [m for m in methods if str(m).strip().lower() not in VALID_METHODS]
        if unknown:
            return False, f"Неизвестные методы {unknown} (доступны {', '.join(VALID_METHODS)})"
        return True, ""

    @staticmethod
    def validate_full_config(values: Dict[str, Any]) -> Tuple[bool, str]:
        """
        Full validation of a merged experiment dict.

        Validates:
        - no unknown keys
        - integers, positive and non-negative reals
        - methods, report format, data source
        - data files exist for csv experiments
        """
        unknown = sorted(set(values) - KNOWN_KEYS)
        if unknown:
            return False, f"Неизвестные ключи: {', '.join(unknown)}"

        ok, error = ExperimentConfigValidator.validate_methods(values.get("methods", VALID_METHODS))
        if not ok:
            return False, error

        for key in INT_KEYS:
            if key in values:
                value = values[key]
                if not (_is_number(value) and int(value) == value and value >= 1):
                    return False, f"'{key}' должен быть целым ≥ 1, получено {value!r}"

        for key in ("base_seed", "label_column", "synthetic_seed"):
            value = values.get(key, 0)
            if not (_is_number(value) and int(value) == value):
                return False, f"'{key}' должен быть целым, получено {value!r}"

        for key in POSITIVE_KEYS:
            if key in values and not (_is_number(values[key]) and values[key] > 0):
                return False, f"'{key}' должен быть > 0, получено {values[key]!r}"

        for key in NON_NEGATIVE_KEYS:
            if key in values and not (_is_number(values[key]) and values[key] >= 0):
                return False, f"'{key}' должен быть ≥ 0, получено {values[key]!r}"

        pca_dims = values.get("pca_dims")
        if pca_dims is not None and not (_is_number(pca_dims) and int(pca_dims) == pca_dims and pca_dims >= 1):
            return False, f"'pca_dims' должен быть целым ≥ 1 или null, получено {pca_dims!r}"

        for key in ("has_header", "standardize", "progress_bar"):
            if key in values and not isinstance(values[key], bool):
                return False, f"'{key}' должен быть true или false"

        if values.get("report_format", "csv") not in ("csv", "json"):
            return False, f"Формат отчета должен быть 'csv' или 'json'"

        data_source = values.get("data_source", "csv")
        if data_source not in ("csv", "rotated_gaussians"):
            return False, f"Неизвестный data_source '{data_source}'"

        if data_source == "csv":
            for key in ("source_path", "target_path"):
                path = values.get(key)
                if not path:
                    return False, f"Требуется '{key}' для data_source=csv"
                if not Path(path).is_file():
                    return False, f"Файл '{key}' не найден: {path}"
        elif values.get("source_per_class", 1) > values.get("synthetic_source_per_class", 100):
            return False, "source_per_class больше числа сгенерированных примеров на класс"

        return True, ""
