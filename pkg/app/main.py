import sys
from typing import List, Optional

from cli.commands import run_command
from cli.parser import parse_args
from geometry.arc_model import to_plain
from utils.config import override_config
from utils.error_handler import ErrorType, QcfError, handle_error
from utils.file_handler import dumps_document
from utils.flow_stats import reset_flow_stats
from utils.logger import log_info


def main(argv: Optional[List[str]] = None) -> int:
    """
    Точка входа qcf.

    Returns:
        int: Код выхода: 0 успех, 2 проверка не пройдена, 3 сбой построения,
            4 некорректный вход
    """
    try:
        args = parse_args(argv)
        override_config(
            seed=args.seed, mesh_floor_mult=args.mesh_floor_mult, flow_engine=args.engine
        )
        reset_flow_stats()
        log_info(f"Команда {args.command} запущена")
        code = run_command(args)
        log_info(f"Команда {args.command} завершена с кодом {code}")
        return code
    except QcfError as e:
        handle_error(e.error_type, e, show_cli_error=True)
        trace = getattr(e, "trace", None)
        if trace:
            sys.stderr.write(dumps_document({"trace": to_plain(trace)}))
        return e.exit_code
    except Exception as e:
        handle_error(ErrorType.UNKNOWN_ERROR, e, show_cli_error=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
