"""Three-item example with bounds [1, 2]: subset probabilities and node values.

    python3 scripts/worked_example.py
"""

import numpy as np

from dagchoice.core import Bounds
from dagchoice.dag import build_bic, build_muc
from dagchoice.oracle import enumerate_lmdc
from dagchoice.recursive_logit import arc_utilities, solve_value

UTILS = np.array([-1.0, -1.5, -2.0])
BOUNDS = Bounds(1, 2)


def main():
    cs = enumerate_lmdc(3, BOUNDS)
    for row, p in zip(cs.counts, cs.probabilities(UTILS)):
        names = ",".join(f"s{i + 1}" for i in np.flatnonzero(row))
        print(f"{{{names}}}: {p:.6f}")
    for label, dag in (("BiC", build_bic(3, BOUNDS)), ("MuC", build_muc(3, BOUNDS))):
        table = solve_value(dag, arc_utilities(dag, UTILS))
        print(f"{label}: {dag.n_nodes} nodes, {dag.n_arcs} arcs")
        for k in range(dag.n_nodes):
            print(f"  {dag.node(k)}: V={table.V[k]:.6f}")


if __name__ == "__main__":
    main()
