#!/usr/bin/env python3
"""Byzantine-leader walkthrough: tamper, rejection, honest retry, replay.

Thin wrapper over `fedeval tamper-demo` followed by `fedeval verify-replay`
on the exported chain, so the whole transparency story runs as one script.

Usage: python scripts/tamper_demo.py [--out DIR]
"""

import argparse

from fedeval.cli import main as cli_main

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/tamper-demo")
    parser.add_argument("--delta", default="1e-6")
    args = parser.parse_args()
    code = cli_main(["tamper-demo", "--out", args.out, "--delta", args.delta])
    if code == 0:
        code = cli_main(["verify-replay", "--chain", f"{args.out}/chain.json"])
    raise SystemExit(code)
