"""
Configuration loader module.
Loads defaults from config.json and environment variables, merges experiment files on top.
Supports .env file for local development.
"""
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from config_validator import ExperimentConfigValidator
from data_pipeline import office_source_per_class
from errors import ConfigError

DEFAULT_CONFIG_FILE = Path(__file__).resolve().parent / "config.json"

# harness settings that are not experiment keys
_LOADER_ONLY_KEYS = ("output_dir_env",)


class ConfigLoader:
    """Loads and manages configuration from config.json and environment"""

    def __init__(self, config_file: Union[str, Path] = DEFAULT_CONFIG_FILE):
        # Load .env file if it exists (for development only)
        env_file = Path(".env")
        if env_file.exists():
            load_dotenv(env_file)

        self.config_file = Path(config_file)
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Загрузить конфигурацию из config.json"""
        if not self.config_file.exists():
            raise FileNotFoundError(f"❌ Файл конфигурации не найден: {self.config_file}")

        with open(self.config_file, "r", encoding="utf-8") as f:
            return json.load(f)

    def get_solver_config(self) -> Dict[str, Any]:
        """Параметры PTELM по умолчанию"""
        return dict(self.config.get("solver", {}))

    def get_harness_config(self) -> Dict[str, Any]:
        """Параметры протокола; output_dir берется из переменной окружения, если она задана"""
        harness = dict(self.config.get("harness", {}))
        harness["output_dir"] = self.default_output_dir()
        return harness

    def get_synthetic_config(self) -> Dict[str, Any]:
        return dict(self.config.get("synthetic", {}))

    def get_logging_config(self) -> Dict[str, Any]:
        """Получить конфигурацию логирования"""
        return self.config.get("logging", {"level": "INFO"})

    def get_all_config(self) -> Dict[str, Any]:
        """Получить всю конфигурацию"""
        return self.config.copy()

    def default_output_dir(self) -> str:
        harness = self.config.get("harness", {})
        env_var = harness.get("output_dir_env", "PTELM_OUTPUT_DIR")
        return os.getenv(env_var) or harness.get("output_dir", "results")

    def experiment_defaults(self) -> Dict[str, Any]:
        merged = {**self.get_solver_config(), **self.get_harness_config(), **self.get_synthetic_config()}
        for key in _LOADER_ONLY_KEYS:
            merged.pop(key, None)
        return merged

    def merge_experiment(self, values: Dict[str, Any]) -> Dict[str, Any]:
        """
        Наложить значения файла эксперимента на значения по умолчанию.
        source_per_class falls back to the Office-Caltech preset of source_name,
        or to the whole synthetic pool for rotated_gaussians.
        """
        merged = {**self.experiment_defaults(), **values}
        if "source_per_class" not in values:
            if merged.get("data_source") == "rotated_gaussians":
                merged["source_per_class"] = merged["synthetic_source_per_class"]
            else:
                preset = office_source_per_class(merged.get("source_name", ""))
                if preset is not None:
                    merged["source_per_class"] = preset
        ok, error = ExperimentConfigValidator.validate_full_config(merged)
        if not ok:
            raise ConfigError(f"❌ {error}")
        return merged

    def load_experiment_file(self, path: Union[str, Path],
                             overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """Прочитать файл эксперимента и вернуть полный плоский словарь параметров"""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"❌ Не удалось прочитать файл эксперимента {path}: {exc}") from exc
        ok, values, error = ExperimentConfigValidator.parse_config_text(text)
        if not ok:
            raise ConfigError(f"❌ {path}: {error}")
        values = self._resolve_paths(values, path.parent)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return self.merge_experiment(values)

    @staticmethod
    def _resolve_paths(values: Dict[str, Any], base: Path) -> Dict[str, Any]:
        # data paths in the file are relative to the file itself
        for key in ("source_path", "target_path"):
            value = values.get(key)
            if isinstance(value, str) and value and not Path(value).is_absolute():
                values[key] = str(base / value)
        return values


# Global config instance
config = ConfigLoader()
