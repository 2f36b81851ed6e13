#!/usr/bin/env python3
"""Scan the weak-coupling threshold on the 2D torus and print the verdicts.

The certificate requires |epsilon| < (Delta/4) e^-1; the scan shows the flip
from certified exponential decay to refusal as the coupling grows.
"""

import math

import numpy as np

from gibbscert.bounds import nearest_neighbor_certificate
from gibbscert.lattice import periodic_grid
from gibbscert.model import GibbsModel, cosine_potential, gaussian_potential, nearest_neighbor_coupling


def main():
    geom = periodic_grid([4, 4])
    for label, pot in [
        ("Gaussian (Delta = 1)", gaussian_potential(1.0)),
        ("cosine a=0.1 (Delta = e^-0.2)", cosine_potential(1.0, 0.1, 1.0)),
    ]:
        print(f"\n{label}")
        print(f"{'epsilon':>9} {'margin':>12} {'prefactor':>12}  verdict")
        for eps in np.arange(0.01, 0.125, 0.01):
            model = GibbsModel(geom, pot, nearest_neighbor_coupling(float(eps)))
            cert = nearest_neighbor_certificate(model)
            pf = f"{cert.prefactor:12.4f}" if cert.prefactor else " " * 12
            verdict = "certified" if cert.passed else "refused"
            print(f"{eps:9.3f} {cert.margin:12.5f} {pf}  {verdict}")
        print(f"threshold e^-1/4 scaled by Delta: {cert.threshold:.6f}")
        print(f"(pure-Gaussian reference: {math.exp(-1.0) / 4.0:.6f})")


if __name__ == "__main__":
    main()
