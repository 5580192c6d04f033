import argparse
import sys

from .encoders import EncoderError
from .export import ExportError, ExportJob, export


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export", description="Export sentence embeddings for a requirements CSV"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="encode a CSV into an embedding file")
    p.add_argument("--input", required=True, help="requirements CSV")
    p.add_argument("--model", required=True, help="encoder name (hash-<dim> or a checkpoint)")
    p.add_argument("--output", required=True, help="embedding file to write")
    p.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        job = ExportJob(
            input_path=args.input,
            model=args.model,
            output_path=args.output,
            batch_size=args.batch_size,
        )
        count = export(job)
    except (ExportError, EncoderError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {count} embeddings to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
