"""smoothbench-plot --spec PATH: render one figure from experiment artifacts."""

from __future__ import annotations

import argparse
import sys

from .render import render
from .spec import SpecError, parse_spec_file


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="smoothbench-plot", description=__doc__)
    parser.add_argument("--spec", required=True, help="key=value figure spec file")
    args = parser.parse_args(argv)
    try:
        spec = parse_spec_file(args.spec)
        out = render(spec)
    except SpecError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
