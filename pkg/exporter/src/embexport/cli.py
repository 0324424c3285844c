"""Command-line entry point: encode an id/text file into DEMB embeddings."""

from __future__ import annotations

import argparse
import sys

from .encoders import ModelResolutionError
from .export import ExportError, ExportJob, run_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Encode 'id<TAB>text' lines with a bi-encoder and write "
                    "the DEMB embedding container plus an .ids sidecar.")
    parser.add_argument("--model", required=True,
                        help="encoder id: hash://<dim> or a "
                             "sentence-transformers checkpoint")
    parser.add_argument("--input", required=True, metavar="FILE",
                        help="input text file, one 'id<TAB>text' per line")
    parser.add_argument("--output", required=True, metavar="FILE",
                        help="output embedding file (.ids sidecar written "
                             "next to it)")
    parser.add_argument("--ids-output", metavar="FILE",
                        help="override the ids sidecar path")
    parser.add_argument("--batch-size", type=int, default=32, metavar="N")
    parser.add_argument("--device", default=None,
                        help="device hint for transformer encoders")
    parser.add_argument("--max-tokens", type=int, default=256, metavar="N",
                        help="truncation length for the hashing encoder")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(model=args.model, input_path=args.input,
                    output_path=args.output, ids_path=args.ids_output,
                    batch_size=args.batch_size, device=args.device,
                    max_tokens=args.max_tokens)
    try:
        report = run_export(job)
    except (ExportError, ModelResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.summary())
    return 0


if __name__ == "__main__":
    sys.exit(main())
