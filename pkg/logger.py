"""
Rich logging module with colors and emojis.
Provides structured logging for data loading, solver runs and experiment trials.
"""
import threading
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

from colorama import Fore, Style, init

init(autoreset=True)


class LogLevel(Enum):
    """Log level enumeration"""
    # Основные уровни логирования с яркими цветами
    ERROR = ("❌", Fore.RED + Style.BRIGHT)
    WARNING = ("🚨", Fore.YELLOW + Style.BRIGHT)
    INFO = ("📋", Fore.WHITE + Style.BRIGHT)
    SUCCESS = ("✅", Fore.GREEN + Style.BRIGHT)

    # Информационные уровни
    DATA = ("📂", Fore.WHITE)
    SOLVER = ("🧮", Fore.CYAN)
    TRIAL = ("🎯", Fore.WHITE)
    METRIC = ("📊", Fore.GREEN)
    REPORT = ("💾", Fore.MAGENTA)
    DEBUG = ("🔧", Fore.WHITE)


class LogLevelFilter(Enum):
    """Фильтр уровней логирования"""
    DEBUG = 0      # Все сообщения
    INFO = 1       # INFO и выше (без DEBUG)
    WARNING = 2    # WARNING и выше
    ERROR = 3      # Только ERROR


class ExperimentLogger:
    """Logger for experiment runs with rich formatting"""

    def __init__(self, log_level: str = "INFO"):
        self.log_level = self._parse_log_level(log_level)
        self.indent_level = 0
        self._print_lock = threading.Lock()  # trials may log from worker threads

    @staticmethod
    def _parse_log_level(level_str: str) -> LogLevelFilter:
        """Преобразовать строку уровня в enum"""
        level_map = {
            "DEBUG": LogLevelFilter.DEBUG,
            "INFO": LogLevelFilter.INFO,
            "WARNING": LogLevelFilter.WARNING,
            "ERROR": LogLevelFilter.ERROR
        }
        return level_map.get(str(level_str).upper(), LogLevelFilter.INFO)

    def set_log_level(self, level: str):
        """Установить уровень логирования"""
        self.log_level = self._parse_log_level(level)

    def _enabled(self, threshold: LogLevelFilter) -> bool:
        return self.log_level.value <= threshold.value

    def _format_message(self, level: LogLevel, message: str, prefix: Optional[str] = None) -> str:
        """Format message with timestamp, emoji, and color"""
        timestamp = datetime.now().strftime("%H:%M:%S")
        emoji, color = level.value
        indent = "  " * self.indent_level

        # Format: emoji [HH:MM:SS] [PREFIX] message
        ts = f"{Style.DIM}[{timestamp}]{Style.RESET_ALL}"

        if prefix:
            prefix_label = f"{Style.BRIGHT}{Fore.CYAN}[{prefix}]{Style.RESET_ALL}"
            return f"{indent}{emoji} {ts} {prefix_label} {color}{message}{Style.RESET_ALL}"
        return f"{indent}{emoji} {ts} {color}{message}{Style.RESET_ALL}"

    def _print_with_flush(self, text: str):
        """Print with immediate flush and lock so parallel trials don't interleave lines"""
        with self._print_lock:
            print(text, flush=True)

    def _emit(self, level: LogLevel, message: str, prefix: str, threshold: LogLevelFilter):
        if self._enabled(threshold):
            self._print_with_flush(self._format_message(level, message, prefix))

    # ========== MAIN LOG METHODS ==========

    def data(self, message: str):
        """Log data loading / preprocessing step"""
        self._emit(LogLevel.DATA, message, "DATA", LogLevelFilter.INFO)

    def solver(self, message: str):
        """Log solver progress"""
        self._emit(LogLevel.SOLVER, message, "SOLVER", LogLevelFilter.INFO)

    def trial(self, message: str):
        """Log trial step"""
        self._emit(LogLevel.TRIAL, message, "TRIAL", LogLevelFilter.INFO)

    def metric(self, message: str):
        """Log metric / result"""
        self._emit(LogLevel.METRIC, message, "RESULT", LogLevelFilter.INFO)

    def report(self, message: str):
        """Log written artifact"""
        self._emit(LogLevel.REPORT, message, "REPORT", LogLevelFilter.INFO)

    def success(self, message: str):
        self._emit(LogLevel.SUCCESS, message, "SUCCESS", LogLevelFilter.INFO)

    def info(self, message: str):
        self._emit(LogLevel.INFO, message, "INFO", LogLevelFilter.INFO)

    def debug(self, message: str):
        self._emit(LogLevel.DEBUG, message, "DEBUG", LogLevelFilter.DEBUG)

    def warning(self, message: str):
        self._emit(LogLevel.WARNING, message, "WARNING", LogLevelFilter.WARNING)

    def error(self, message: str):
        self._emit(LogLevel.ERROR, message, "ERROR", LogLevelFilter.ERROR)

    # ========== SECTION & FORMATTING METHODS ==========

    def section(self, title: str):
        """Log section header with pretty formatting"""
        if not self._enabled(LogLevelFilter.INFO):
            return
        border = "=" * 60
        section_output = [
            "",
            f"{Fore.CYAN}{border}",
            f"{Fore.CYAN}>>> {title}",
            f"{Fore.CYAN}{border}{Style.RESET_ALL}"
        ]
        self._print_with_flush("\n".join(section_output))

    def subsection(self, title: str):
        """Log subsection header"""
        if self._enabled(LogLevelFilter.INFO):
            self._print_with_flush(f"\n{Fore.BLUE}━━━ {title} ━━━{Style.RESET_ALL}\n")

    def log_config(self, config_dict: Dict[str, Any], title: str = "КОНФИГУРАЦИЯ"):
        """Log configuration in pretty format"""
        self.section(f"⚙️ {title}")
        for key, value in config_dict.items():
            self.info(f"{key}: {value}")

    def log_stats(self, stats_dict: Dict[str, Any], title: str = "СТАТИСТИКА"):
        """Log statistics/results in formatted table"""
        self.section(f"📊 {title}")
        for key, value in stats_dict.items():
            self.metric(f"{key}: {value}")

    def indent(self):
        """Increase indentation level"""
        self.indent_level += 1

    def dedent(self):
        """Decrease indentation level"""
        if self.indent_level > 0:
            self.indent_level -= 1


# Global logger instance
logger = ExperimentLogger(log_level="INFO")
