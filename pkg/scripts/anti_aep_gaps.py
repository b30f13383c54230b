"""Finite-n gaps between restricted one-shot rates and their unrestricted counterparts."""

import argparse

import numpy as np

from conelab import linalg as la
from conelab.entropies import conditional_entropy, umegaki_relative_entropy
from conelab.sweep import coherent_dmax_rate, singlet_hmin_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--coherent-max", type=int, default=3)
    ap.add_argument("--singlet-max", type=int, default=2)
    args = ap.parse_args()

    D = umegaki_relative_entropy(la.max_coherent(2).mat, np.eye(2) / 2)
    print(f"coherence: D(varsigma_2 || pi_2) = {D:.6f} bits per copy")
    for n in range(1, args.coherent_max + 1):
        r = coherent_dmax_rate(n)
        print(f"  n={n}: (1/n) d_max^Diagonal = {r.value_bits:+.3e}  gap = {D - r.value_bits:.6f}")

    H = conditional_entropy(la.max_entangled(2))
    print(f"entanglement: H(A|B) at tau_2 = {H:.6f} bits per copy")
    for n in range(1, args.singlet_max + 1):
        r = singlet_hmin_rate(n)
        print(f"  n={n}: (1/n) h_min^PPT = {r.value_bits:+.3e}  gap = {r.value_bits - H:.6f}")


if __name__ == "__main__":
    main()
