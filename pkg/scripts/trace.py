"""Print the ART and every weakening step for a program (default: programs/nested_flag.prog)."""

import argparse
from pathlib import Path

from slicer.cfa import edge_map
from slicer.engine import SlicerConfig, WeakeningMode, prepare_cfa, run_fixpoint
from slicer.formula import to_text
from slicer.lang import load_program
from slicer.smt import SolverSession

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("program", nargs="?", type=Path, default=ROOT / "programs" / "nested_flag.prog")
    ap.add_argument("--weakening", choices=[m.value for m in WeakeningMode], default="cex")
    args = ap.parse_args()

    cfa = prepare_cfa(load_program(args.program.read_text()))
    print(cfa.dump())
    session = SolverSession()
    try:
        art, verdict = run_fixpoint(cfa, SlicerConfig(weakening=args.weakening), session)
    finally:
        session.close()
    print(art.dump())
    edges = edge_map(cfa)
    for ev in verdict.stats.weakenings:
        e = edges[ev.edge]
        removed = ", ".join(to_text(l) for l in ev.removed) or "-"
        print(f"node {ev.node}: {ev.kind:13s} {cfa.label(e.src)} -> {cfa.label(e.dst)}"
              f"  queries={ev.queries}  dropped: {removed}")
    print(f"\nverdict: {verdict.status.value} ({verdict.reason})")
    for n, f in sorted(verdict.invariant.items()):
        print(f"  {cfa.label(n)}: {to_text(f)}")


if __name__ == "__main__":
    main()
