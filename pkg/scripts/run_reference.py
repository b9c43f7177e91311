#!/usr/bin/env python3
"""Run the benchmark configuration and write its diagnostics time series.

Writes the config actually used next to the outputs so the run is
reproducible from the artifacts alone.
"""

import argparse
import pathlib
import sys

from chemoflow.cli import main as cli_main
from chemoflow.config import reference_config_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/reference", help="output directory")
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--snapshots", action="store_true")
    args = ap.parse_args()

    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    text = reference_config_text(gamma=args.gamma, t_end=args.t_end)
    if args.snapshots:
        text = text.replace("snapshots = false", "snapshots = true")
    cfg_path = outdir / "config.ini"
    cfg_path.write_text(text)
    return cli_main(["run", str(cfg_path), "--output", str(outdir)])


if __name__ == "__main__":
    sys.exit(main())
