"""Run every shipped config through the CLI and summarize exit codes."""

import argparse
import sys
from pathlib import Path

from matmart.cli import main as cli

COMMAND = {"heavy_b3": "bounds", "entropy_l2": "entropy"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=str(Path(__file__).resolve().parent.parent / "configs"))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    for cfg in sorted(Path(args.configs).glob("*.json")):
        cmd = COMMAND.get(cfg.stem, "verify")
        code = cli([cmd, "--config", str(cfg), "--out", str(Path(args.out) / cfg.stem),
                    "--threads", str(args.threads)])
        print(f"{cfg.stem:>22} {cmd:>8} exit {code}", file=sys.stdout, flush=True)


if __name__ == "__main__":
    main()
