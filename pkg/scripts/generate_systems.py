#!/usr/bin/env python
"""Regenerate the bundled system files in systems/."""

import argparse
from pathlib import Path

from ltvcert.suite import write_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    default = Path(__file__).resolve().parent.parent / "systems"
    ap.add_argument("--out-dir", default=str(default))
    args = ap.parse_args()
    out = write_suite(args.out_dir)
    print(f"wrote suite to {out}")


if __name__ == "__main__":
    main()
