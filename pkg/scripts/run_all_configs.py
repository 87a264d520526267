"""Run every example config through the CLI, writing results to an output directory."""

import argparse
import sys
from pathlib import Path

from powergap.cli import load_config, run

HERE = Path(__file__).resolve().parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results", type=Path)
    args = ap.parse_args()
    status = 0
    for cfg in sorted((HERE / "configs").glob("*.toml")):
        command = load_config(str(cfg))["subcommand"]
        prefix = args.out_dir / cfg.stem
        code = run([command, "--config", str(cfg), "--out", str(prefix)])
        print(f"{cfg.name:32s} {command:10s} exit {code}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
