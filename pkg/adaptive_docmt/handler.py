import sys
from typing import Optional, Sequence

from adaptive_docmt.adapters.cli_adapter import CliAdapter
from adaptive_docmt.utils.app_exception import RUNTIME_ERROR, USAGE_ERROR, ApplicationException
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

adapter = None


def run(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    """
    Run one command line and return its exit code: 0 on success, 2 for usage
    or configuration errors, 1 for runtime failures.
    """
    global adapter
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    err = err or sys.stderr
    log.debug(f"argv: {argv}")
    try:
        if adapter is None:
            adapter = CliAdapter()
        response = adapter.process_event(argv)
        if response:
            print(response, file=out)
        return 0
    except ApplicationException as e:
        log.error(f"exception: {e}")
        print(f"error: {e.message}", file=err)
        if e.status_code == USAGE_ERROR and "usage:" not in e.message:
            print(adapter.usage(argv), file=err)
        return e.status_code
    except OSError as e:
        log.error(f"exception: {e}")
        print(f"error: {e}", file=err)
        return RUNTIME_ERROR
    except SystemExit as e:
        # --help exits through argparse
        return e.code if isinstance(e.code, int) else 0
    except Exception as e:
        log.error(f"exception: {e}", exc_info=True)
        print(f"error: {e}", file=err)
        return RUNTIME_ERROR


def main():
    sys.exit(run())
