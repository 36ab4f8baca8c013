"""Standalone exporter entry point: config JSON in, dataset directory out."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .export import export, load_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ccexport",
        description="Export CNN deconvolution masks and predictions as a "
                    "conceptcover dataset.",
    )
    parser.add_argument("--config", required=True, help="export config JSON")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="override the config's activation threshold")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.epsilon is not None:
            if args.epsilon < 0:
                parser.error("--epsilon must be >= 0")
            config = dataclasses.replace(config, epsilon=args.epsilon)
        report = export(config, args.out)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"exported {report['exported']} images "
          f"({len(report['skipped'])} skipped) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
