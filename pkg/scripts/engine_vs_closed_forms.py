"""Compare couplings extracted by the perturbative engine with the closed-form rates.

Runs in units of J with J/U = 1/25 by default.
"""

import argparse

from transmon_bh import effmodels as em
from transmon_bh.fock import enumerate_basis, stack_anharmonicity
from transmon_bh.lattice import build_chain
from transmon_bh.perturbation import build_projected, extract_coupling


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--U", type=float, default=25.0, help="U in units of J")
    parser.add_argument("--N-max", dest="n_max", type=int, default=5)
    args = parser.parse_args()
    J, U = 1.0, args.U

    print(f"{'rate':>14s} {'engine':>14s} {'closed form':>14s} {'ratio':>10s}")
    for N in range(2, args.n_max + 1):
        stack = build_projected(enumerate_basis(4, N), build_chain(4, J, U), stack_anharmonicity(N))
        pairs = [("tilde_J", extract_coupling(stack, [0, 0, N, 0], [0, N, 0, 0], N), em.tilde_J(N, J, U))]
        plus = build_projected(enumerate_basis(4, N + 1), build_chain(4, J, U), stack_anharmonicity(N))
        pairs.append(("T", extract_coupling(plus, [0, N, 1, 0], [1, N, 0, 0], 2), em.stack_boson_T(N, J, U)))
        pairs.append(("Xi", extract_coupling(plus, [0, N, 1, 0], [0, 1, N, 0], N - 1),
                      em.stack_boson_Xi(N, J, U)))
        for name, engine, closed in pairs:
            print(f"{name + f' N={N}':>14s} {engine:+14.6e} {closed:+14.6e} {engine / closed:10.6f}")


if __name__ == "__main__":
    main()
