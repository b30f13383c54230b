"""Extended min-entropy of the two-qubit identity channel, for each direction and cone."""

from conelab import linalg as la
from conelab.cones import PPT, Positive
from conelab.supermaps import extended_min_entropy


def main():
    channel = la.identity_choi(4)  # A0 B0 -> A1 B1, all qubits
    for direction in ("B|A", "A|B"):
        for k in (Positive(), PPT()):
            r = extended_min_entropy(channel, direction, k)
            print(f"H_ext^{k.name}({direction}) = {r.value_bits:+.9f} bits  "
                  f"(program value {r.program_value:.9f}, status {r.report.status})")


if __name__ == "__main__":
    main()
