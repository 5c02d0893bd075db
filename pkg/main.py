"""
Main entry point for the PTELM transfer-learning toolkit.
Handles the command-line interface: run, sweep, curve, split, version.
"""
import argparse
import sys
from typing import List, Optional

from config_loader import config
from errors import ConfigError, PtelmError, exit_code_for
from experiment_harness import (emit_split_manifests, learning_curve, load_experiment_config, run_experiment,
                                sensitivity_sweep)
from logger import logger

__version__ = "1.0.0"


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ожидался список чисел через запятую: '{text}'") from None


def _int_list(text: str) -> List[int]:
    values = _float_list(text)
    if any(int(v) != v for v in values):
        raise argparse.ArgumentTypeError(f"ожидался список целых через запятую: '{text}'")
    return [int(v) for v in values]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptelm", description="PTELM: перенос параметров ELM между доменами")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_command(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="файл эксперимента (плоский JSON)")
        cmd.add_argument("--output-dir", dest="output_dir", help="каталог отчета")
        cmd.add_argument("--format", dest="report_format", choices=("csv", "json"), help="формат отчета")
        cmd.add_argument("--trials", type=int, help="число испытаний")
        cmd.add_argument("--workers", type=int, help="параллельные испытания")
        cmd.add_argument("--seed", dest="base_seed", type=int, help="base_seed")
        return cmd

    experiment_command("run", "запустить эксперимент")
    sweep = experiment_command("sweep", "чувствительность к одному параметру")
    sweep.add_argument("--param", required=True, help="lambda1 | lambda2 | lambda3 | L")
    sweep.add_argument("--grid", required=True, type=_float_list, help="значения через запятую")
    curve = experiment_command("curve", "кривая по числу размеченных примеров цели")
    curve.add_argument("--counts", required=True, type=_int_list, help="например 5,10,15,20")
    experiment_command("split", "только манифесты сплитов")
    sub.add_parser("version", help="версия")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""

    # Configure logging level from config
    logging_config = config.get_logging_config()
    logger.set_log_level(logging_config.get("level", "INFO"))

    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(f"ptelm {__version__}")
        return 0

    logger.section("🚀 PTELM 🚀")
    try:
        overrides = {k: getattr(args, k) for k in ("output_dir", "report_format", "trials", "workers", "base_seed")}
        cfg = load_experiment_config(args.config, overrides)
        logger.log_config(cfg.summary())

        if args.command == "run":
            run_experiment(cfg)
        elif args.command == "sweep":
            sensitivity_sweep(cfg, args.param, args.grid)
        elif args.command == "curve":
            learning_curve(cfg, args.counts)
        elif args.command == "split":
            emit_split_manifests(cfg)

    except KeyboardInterrupt:
        logger.warning("Выполнение прервано пользователем (Ctrl+C)")
        return 130
    except PtelmError as e:
        logger.error(str(e))
        return exit_code_for(e)
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Ошибка конфигурации: {e}")
        return ConfigError.exit_code

    logger.success("✅ Готово")
    return 0


if __name__ == "__main__":
    sys.exit(main())
