"""
Ponto de entrada da linha de comando.

Subcomandos: constraints, gamma, correspond, evolve.
Códigos de saída: 0 sucesso, 2 configuração, 3 inconsistência do modelo,
4 violação de validade numérica.
"""
import argparse
import logging
import sys
import time

from algorithms.errors import (
    ConfigError,
    ConstraintViolationError,
    DegenerateModelError,
    FirstClassConstraintError,
    InconsistentDynamicsError,
    LayoutMismatchError,
    NotPhysicalError,
    NumericalBreachError,
    SingularConstraintMatrixError,
    TruncationError,
)
from cli.commands import COMMANDS
from cli.config import load_config
from utils.metrics import format_duration

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CODES = {
    ConfigError: 2,
    LayoutMismatchError: 2,
    ConstraintViolationError: 2,
    InconsistentDynamicsError: 3,
    FirstClassConstraintError: 3,
    SingularConstraintMatrixError: 3,
    DegenerateModelError: 3,
    NotPhysicalError: 4,
    TruncationError: 4,
    NumericalBreachError: 4,
}


def exit_code_for(error):
    for cls in type(error).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="arquivo JSON do experimento")
    common.add_argument("--out", help="diretório de saída (sobrepõe output.dir)")
    common.add_argument("--fock-dim", type=int, help="truncagem N usada nos dois modos")
    common.add_argument("--tau", type=float, help="tempo de coarse-graining τ")
    common.add_argument("--sweep", help="varredura NOME=v1,v2,...")
    common.add_argument("--interior-exclude", type=int, help="níveis descartados no bloco interior")
    common.add_argument("--jobs", type=int, default=1, help="threads para a varredura")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v para INFO, -vv para DEBUG")

    parser = argparse.ArgumentParser(
        prog="dissipation-constraints",
        description="Vínculos de Dirac, dissipação por coarse-graining e correspondência clássico-quântica.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("constraints", parents=[common], help="cadeia de vínculos de Dirac")
    subparsers.add_parser("gamma", parents=[common], help="matriz de dissipação do modelo")
    subparsers.add_parser("correspond", parents=[common], help="verificação da correspondência")
    subparsers.add_parser("evolve", parents=[common], help="dinâmica de Lindblad e exata")
    return parser


def configure_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    """Executa um subcomando e retorna o código de saída."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    overrides = {
        "out": args.out,
        "fock_dim": args.fock_dim,
        "tau": args.tau,
        "sweep": args.sweep,
        "interior_exclude": args.interior_exclude,
        "jobs": args.jobs,
    }
    start_time = time.time()
    try:
        config = load_config(args.config, overrides)
        written = COMMANDS[args.command](config)
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        print(f"erro: {e}", file=sys.stderr)
        return code

    for path in written:
        print(path)
    logger.info("%s concluído em %s", args.command, format_duration((time.time() - start_time) * 1000))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
