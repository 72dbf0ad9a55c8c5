import os
import sys

# BLAS reads its thread count at import time, so apply --threads before numpy loads
for i, arg in enumerate(sys.argv):
    value = arg.split("=", 1)[1] if arg.startswith("--threads=") else (
        sys.argv[i + 1] if arg == "--threads" and i + 1 < len(sys.argv) else None)
    if value is not None and value.isdigit():
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = value

from .cli import main  # noqa: E402


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
