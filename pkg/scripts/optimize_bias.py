#!/usr/bin/env python3
"""Tune a per-qubit measurement-bias distribution for a Hamiltonian file
and report the variance improvement over uniform classical shadows.

Usage:
    python scripts/optimize_bias.py h.txt --cost diag --out beta.json
    python scripts/optimize_bias.py h.txt --cost full --bits 1100 --out beta.json
"""

import argparse

from lbcs import (SingleReference, cost_diag, cost_full, load_observable,
                  optimize, uniform_beta)
from lbcs.optimizer import OptimizerConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("hamiltonian")
    parser.add_argument("--cost", choices=["diag", "full"], default="diag")
    parser.add_argument("--bits", default=None,
                        help="reference bitstring (full cost only)")
    parser.add_argument("--out", default=None, help="write beta JSON here")
    parser.add_argument("--delta", type=float, default=0.5)
    parser.add_argument("--max-iter", type=int, default=10_000)
    args = parser.parse_args()

    h = load_observable(args.hamiltonian)
    reference = SingleReference.from_bits(args.bits) if args.bits else None
    if args.cost == "full" and reference is None:
        parser.error("--bits is required for the full cost")

    config = OptimizerConfig(step=args.delta, max_iterations=args.max_iter)
    result = optimize(h, args.cost, config, reference=reference)

    uniform = uniform_beta(h.n)
    if args.cost == "diag":
        before = cost_diag(h, uniform)
    else:
        before = cost_full(h, reference, uniform)

    print(f"qubits: {h.n}, terms: {h.num_terms()}")
    print(f"converged: {result.converged} in {result.iterations} iterations "
          f"(kkt residual {result.kkt_residual:.2e})")
    print(f"cost: {before:.6g} (uniform) -> {result.cost:.6g} "
          f"({before / result.cost:.2f}x)")
    for i, row in enumerate(result.beta.rows, start=1):
        print(f"qubit {i:2d}: X={row[0]:.4f}  Y={row[1]:.4f}  Z={row[2]:.4f}")
    if args.out:
        result.beta.save(args.out)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
