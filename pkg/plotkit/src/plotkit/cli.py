"""Command-line entry point: render every figure in a spec document."""
from __future__ import annotations

import argparse
import sys

from .figures import FigureError, load_figure_specs, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render figures (PNG + SVG) from simulator CSV logs as "
                    "described by a JSON figure-spec document.")
    parser.add_argument("spec", help="figure-spec JSON file")
    args = parser.parse_args(argv)

    try:
        specs = load_figure_specs(args.spec)
        for spec in specs:
            for path in render(spec):
                print(path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
