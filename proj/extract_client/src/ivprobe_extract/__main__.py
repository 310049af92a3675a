import argparse
import logging
import sys
from pathlib import Path

from .extract import DataError, ExtractionJob, ModelLoadError, run

EXIT_DATA = 3
EXIT_MODEL = 5


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="ivprobe-extract", description="dump final-layer [CLS] states in ivprobe formats")
    p.add_argument("--model", required=True, help="transformers model name or local directory")
    p.add_argument("--input", required=True, type=Path, help="CSV: premise,hypothesis[,monotonicity,relation,entailment]")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    args = p.parse_args(argv)
    if args.batch_size < 1:
        p.error("--batch-size must be positive")
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    job = ExtractionJob(args.model, args.input, args.out, args.batch_size, args.device)
    try:
        result = run(job)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ModelLoadError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODEL
    rows, cols = result.representations.shape
    print(f"wrote {rows}x{cols} representations to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
