"""Print closed-form effective rates (MHz) and nontrivial-state probabilities for a range of stack sizes.

usage: python3 scripts/rate_table.py [--J 10] [--U 250] [--N-max 5]
"""

import argparse

from transmon_bh import effmodels as em
from transmon_bh.errors import DomainError
from transmon_bh.units import mhz, to_mhz


def row(label, fn, scale=to_mhz):
    try:
        return f"{label:>22s}  {scale(fn()):+.6e}"
    except DomainError as exc:
        return f"{label:>22s}  n/a ({exc})"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--J", type=float, default=10.0)
    parser.add_argument("--U", type=float, default=250.0)
    parser.add_argument("--N-max", dest="n_max", type=int, default=5)
    args = parser.parse_args()
    J, U = mhz(args.J), mhz(args.U)

    for N in range(2, args.n_max + 1):
        print(f"N = {N}")
        print(row("tilde_J", lambda: em.tilde_J(N, J, U)))
        for ell in (1, 2):
            print(row(f"omega_diff l={ell}", lambda: em.tilde_omega_diff(N, ell, J, U)))
        print(row("V", lambda: em.stack_boson_V(N, J, U)))
        print(row("T", lambda: em.stack_boson_T(N, J, U)))
        print(row("Xi", lambda: em.stack_boson_Xi(N, J, U)))
        print(row("V_ell l=1", lambda: em.V_ell(N, 1, J, U)))
        if N >= 3:
            print(row("Xi_ell l=1", lambda: em.Xi_ell(N, 1, J, U)))
            print(row(f"Xi1 M={N - 1}", lambda: em.Xi1(N, N - 1, J, U)))
        print(row("P_nontrivial", lambda: em.nontrivial_probability(N), scale=float))


if __name__ == "__main__":
    main()
