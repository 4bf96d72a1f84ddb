from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.config.run_config import FIELD_UNITS, LENGTH_UNITS, RunConfig, load_config, parse_quantity
from src.config.settings import settings
from src.errors import ConfigError, DonorStarkError, SchemaError
from src.logging_conf import configure_logging
from src.services import pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _number_list(raw: str, units: Dict[str, float], flag: str) -> List[float]:
    items = [item for item in raw.split(",") if item.strip()]
    if not items:
        raise ConfigError(f"{flag} needs at least one value", field=flag)
    return [parse_quantity(item.strip(), units, flag) for item in items]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="donor-stark",
        description="Simula el desplazamiento Stark hiperfino de un donador en silicio cerca de una interfaz.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Ruta al documento JSON de configuracion de la corrida.")
    common.add_argument("--out", default=None, help="Directorio de salida (reemplaza output_dir de la configuracion).")
    common.add_argument("--workers", type=int, default=None, help="Cantidad de hilos de trabajo (ej. 4).")
    common.add_argument("--seed", type=int, default=None, help="Semilla del vector inicial de Lanczos.")
    common.add_argument("--fields", default=None, help="Campos en V/um separados por coma (ej. -1,-0.5,0,0.5,1).")
    common.add_argument("--depths", default=None, help="Profundidades en nm separadas por coma (ej. 5,10,20).")
    common.add_argument(
        "--quick",
        action="store_true",
        help="Reduce el dominio a un cubo de 8 nm y la grilla de campos a 5 puntos (para CI).",
    )
    common.add_argument("--log-level", default=None, help="Nivel de logging (por defecto LOG_LEVEL o INFO).")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("bands", parents=[common], help="Reporte de bandas del silicio en volumen.")
    subparsers.add_parser("calibrate", parents=[common], help="Calibra u0 contra la energia de enlace objetivo.")
    solve = subparsers.add_parser("solve", parents=[common], help="Autoestados a campo cero y a un campo finito.")
    solve.add_argument("--field", default=None, help="Campo finito en V/um (por defecto el mayor |campo| de la grilla).")
    solve.add_argument("--b0", type=float, default=0.0, help="Campo magnetico estatico en Tesla para los niveles de espin.")
    solve.add_argument("--g", type=float, default=pipeline.SI_P_G_FACTOR, help="Factor g del electron del donador.")
    solve.add_argument(
        "--a0-mhz", type=float, default=pipeline.SI_P_A0_MHZ, help="Constante hiperfina de referencia en MHz."
    )
    subparsers.add_parser("sweep", parents=[common], help="Barrido en campo a la profundidad configurada.")
    subparsers.add_parser("depth-scan", parents=[common], help="Barridos y ajustes para cada profundidad.")
    subparsers.add_parser("oracle", parents=[common], help="Compara la pendiente perturbativa del dipolo con el barrido.")
    subparsers.add_parser("dense-check", parents=[common], help="Compara Lanczos con diagonalizacion densa (64 sitios).")
    plot = subparsers.add_parser("plot", parents=[common], help="Genera CSV y SVG por figura desde un depth-scan.")
    plot.add_argument("--from", dest="source", default=None, help="Documento depth_scan.json a graficar.")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then ``--quick``, then explicit flags (so ``--fields``/``--depths`` win over the quick grid)."""
    config = load_config(args.config)
    if args.quick:
        config = config.quick()
    fields = None if args.fields is None else _number_list(args.fields, FIELD_UNITS, "--fields")
    depths = None if args.depths is None else _number_list(args.depths, LENGTH_UNITS, "--depths")
    return config.with_overrides(
        output_dir=args.out, workers=args.workers, seed=args.seed, fields=fields, depths=depths
    )


def dispatch(args: argparse.Namespace, config: RunConfig) -> Dict[str, Any]:
    if args.command == "solve":
        field = None if args.field is None else parse_quantity(args.field, FIELD_UNITS, "--field")
        return pipeline.run_solve(config, field_value=field, b0=args.b0, g_factor=args.g, a0_mhz=args.a0_mhz)
    if args.command == "plot":
        return pipeline.run_plot(config, None if args.source is None else Path(args.source))
    return pipeline.COMMANDS[args.command](config)


def _status_line(command: str, result: Dict[str, Any]) -> str:
    if command == "dense-check":
        return f"{result['status']}, max |dlambda| = {result['max_abs_eigenvalue_difference_ev']:.3e} eV"
    if command == "oracle":
        return f"slopes agree: {result['slopes_agree']}"
    return "ok"


def _emit_error(document: Dict[str, Any]) -> None:
    sys.stderr.write(json.dumps(document, sort_keys=True, default=str) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.runtime.log_level)
    try:
        config = resolve_config(args)
        result = dispatch(args, config)
    except SchemaError as exc:
        _emit_error(exc.to_document())
        return EXIT_CONFIG
    except DonorStarkError as exc:
        _emit_error(exc.to_document())
        return EXIT_FAILURE
    except Exception as exc:  # pylint: disable=broad-except
        logger.exception("Unhandled error: %s", exc)
        _emit_error({"error": "internal", "message": str(exc), "details": {"type": type(exc).__name__}})
        return EXIT_FAILURE
    print(f"{args.command}: {_status_line(args.command, result)}")
    if args.command == "dense-check" and result["status"] != "PASS":
        return EXIT_FAILURE
    return EXIT_OK


__all__ = ["build_parser", "dispatch", "main", "resolve_config"]
