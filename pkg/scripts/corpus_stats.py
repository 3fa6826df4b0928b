"""Run both weakening modes over the program corpus and print verdicts and query histograms."""

import argparse
from collections import Counter
from pathlib import Path

from slicer.engine import SlicerConfig, WeakeningMode, verify_cfa
from slicer.lang import load_program
from slicer.smt import SolverSession

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("files", nargs="*", type=Path)
    args = ap.parse_args()
    files = args.files or sorted((ROOT / "programs").glob("*.prog"))

    totals = {m: Counter() for m in WeakeningMode}
    session = SolverSession()
    try:
        print(f"{'program':24s} {'cex':8s} {'syntactic':10s}")
        for f in files:
            cfa = load_program(f.read_text())
            row = []
            for mode in WeakeningMode:
                _, _, verdict = verify_cfa(cfa, SlicerConfig(weakening=mode), session)
                totals[mode].update(e.queries for e in verdict.stats.weakenings)
                row.append(verdict.status.value)
            print(f"{f.name:24s} {row[0]:8s} {row[1]:10s}")
    finally:
        session.close()
    for mode in WeakeningMode:
        hist = sorted(totals[mode].items())
        print(f"{mode.value} query histogram:", " ".join(f"{q}:{n}" for q, n in hist) or "(empty)")


if __name__ == "__main__":
    main()
