"""Tabulate the counter-program grid: psi satisfiability, oracle reachability, slicer verdict."""

from slicer.engine import SlicerConfig, verify_cfa
from slicer.formula import to_text
from slicer.lang import load_program
from slicer.oracle import (
    FiniteDomain, counter_grid, counter_loop_head, counter_program_source, enumerate_reachable,
    gen_counter_program, psi_witnesses,
)
from slicer.smt import SolverSession


def main() -> None:
    session = SolverSession()
    try:
        print(f"{'#':>2} {'m':>1} {'n':>1}  {'psi witnesses':18s} {'reach':>5} {'verdict':8s} G")
        for k, spec in enumerate(counter_grid()):
            wit = psi_witnesses(spec)
            reach = enumerate_reachable(gen_counter_program(spec), FiniteDomain(0, 1))
            n_states = len(reach[counter_loop_head(gen_counter_program(spec))])
            _, _, verdict = verify_cfa(load_program(counter_program_source(spec)), SlicerConfig(), session)
            w = ",".join("".join(map(str, x)) for x in wit) or "-"
            print(f"{k:>2} {spec.m:>1} {spec.n:>1}  {w:18s} {n_states:>2}/{2 ** (spec.m + 1):<2} "
                  f"{verdict.status.value:8s} {to_text(spec.G)}")
    finally:
        session.close()


if __name__ == "__main__":
    main()
