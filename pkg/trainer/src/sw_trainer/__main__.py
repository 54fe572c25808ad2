"""Entry point: ``python -m sw_trainer --workdir <dir>``.

Reads request.json from the working directory, runs the job, and always
leaves a terminal status.json behind: ``done`` with metrics on success,
``failed`` with the error message (and a nonzero exit) otherwise.
"""

import argparse
import sys
import traceback
from pathlib import Path

from .formats import write_status
from .job import run_job


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sw_trainer", description=__doc__)
    parser.add_argument("--workdir", required=True)
    args = parser.parse_args(argv)
    workdir = Path(args.workdir)
    try:
        status = run_job(workdir)
    except Exception as exc:  # any failure must surface through the protocol
        traceback.print_exc()
        try:
            write_status(workdir, "failed", error=f"{type(exc).__name__}: {exc}")
        except OSError:
            pass  # workdir unusable; the exit code still signals failure
        return 1
    print(
        f"done: accuracy={status['accuracy']:.4f} "
        f"wall_seconds={status['wall_seconds']:.2f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
