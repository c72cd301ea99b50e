#!/usr/bin/env python3
"""Regenerate the dense-LAPACK reference eigenvalue for the bent-strip case.

The acceptance suite pins the lowest eigenvalue of the reference bent
strip (kappa(s) = 0.5 exp(-s^2), half-width 1) against a value computed
by an independent dense solver.  This script reproduces that number: it
assembles the Hamiltonian on [-64, 64] x (-1, 1) at spacings 1/6 and 1/8,
takes all eigenvalues with LAPACK (scipy.linalg.eigh, no Lanczos, no
shift-invert), and Richardson-extrapolates the lowest one at second order
with step ratio 4/3.

Expect roughly ten minutes of runtime and ~2 GB of memory: the finer grid
is a 15345^2 dense matrix.  Result frozen in tests/test_acceptance.py:

    DENSE_REFERENCE_BENT_STRIP = 2.46616275
"""

import time

import scipy.linalg as la

from tubespectra import (
    CoefficientField,
    CrossSection,
    CurvatureProfile,
    EffectivePotential,
    TruncatedGrid,
    assemble_hamiltonian,
    gaussian_bump,
    metric_from_profile,
)


def main():
    profile = CurvatureProfile([gaussian_bump(0.5, 1.0)], (-1e4, 1e4))
    metric = metric_from_profile(profile, 1.0)
    coeffs = CoefficientField(metric)
    potential = EffectivePotential(metric)

    values = {}
    for inv in (6, 8):
        grid = TruncatedGrid.interval(64.0, 1.0 / inv, 1.0)
        op = assemble_hamiltonian(coeffs, potential, grid)
        t0 = time.time()
        w = la.eigh(op.to_dense(), eigvals_only=True, subset_by_index=[0, 2])
        values[inv] = w
        print(f"spacing 1/{inv}: n={op.shape[0]} lowest={w[0]:.9f} "
              f"({time.time() - t0:.0f}s)", flush=True)

    r2 = (8.0 / 6.0) ** 2
    ext = values[8] + (values[8] - values[6]) / (r2 - 1.0)
    print("extrapolated lowest three:", ext)
    print(f"DENSE_REFERENCE_BENT_STRIP = {ext[0]:.8f}")


if __name__ == "__main__":
    main()
