"""Dirichlet spectrum of the cross-section and the threshold set.

The eigenvalues nu_1 < nu_2 <= ... of the Dirichlet Laplacian on the
bounded cross-section omega are the energies where new transverse
channels open; nu_1 is the onset of the essential spectrum and the whole
list forms the threshold set.  Intervals, rectangles and discs are solved
analytically (disc via Bessel zeros found by bracketed root refinement);
general planar shapes come in as grid masks and are solved by the 5-point
Dirichlet stencil with Richardson extrapolation over two resolutions.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, InputError, ResolutionError

__all__ = [
    "CrossSection",
    "ThresholdSet",
    "BelowLowestThreshold",
    "BELOW_LOWEST_THRESHOLD",
    "cross_section_spectrum",
    "rho_of_lambda",
]


class BelowLowestThreshold:
    """Tagged +infinity returned by rho below the first threshold.

    A dedicated type (never a float sentinel) so the piecewise definition
    of rho cannot be confused with a huge finite value.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "+inf (below lowest threshold)"

    def __bool__(self):
        return True


BELOW_LOWEST_THRESHOLD = BelowLowestThreshold()


@dataclass(frozen=True)
class CrossSection:
    """Bounded open connected cross-section omega in R^(d-1).

    ``kind`` is one of interval | rectangle | disc | mask.  ``a`` is
    sup_{u in omega} |u| with the centre of mass at the origin.
    """

    kind: str
    dim: int
    a: float
    params: tuple = ()
    mask: np.ndarray = None
    mask_extent: tuple = None

    @staticmethod
    def interval(a):
        if a <= 0:
            raise InputError("interval half-width must be positive")
        return CrossSection(kind="interval", dim=1, a=float(a), params=(float(a),))

    @staticmethod
    def rectangle(lx, ly):
        if lx <= 0 or ly <= 0:
            raise InputError("rectangle sides must be positive")
        a = 0.5 * float(np.hypot(lx, ly))
        return CrossSection(kind="rectangle", dim=2, a=a, params=(float(lx), float(ly)))

    @staticmethod
    def disc(radius):
        if radius <= 0:
            raise InputError("disc radius must be positive")
        return CrossSection(kind="disc", dim=2, a=float(radius), params=(float(radius),))

    @staticmethod
    def from_mask(mask, extent):
        """General omega as a boolean interior mask on a grid box.

        ``extent`` = (width_x, width_y) of the full grid box; the mask
        must be connected (4-neighbour) and nonempty.  Coordinates are
        recentred so the mask's centre of mass sits at the origin, which
        fixes the radius a = sup|u| (the spectrum is translation
        invariant).
        """
        from scipy import ndimage

        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2 or not mask.any():
            raise InputError("mask must be a nonempty 2-d boolean array")
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        _, n_components = ndimage.label(mask, structure=structure)
        if n_components != 1:
            raise InputError(f"mask is disconnected ({n_components} components)")
        wx, wy = float(extent[0]), float(extent[1])
        xs = (np.arange(mask.shape[0]) + 0.5) / mask.shape[0] * wx
        ys = (np.arange(mask.shape[1]) + 0.5) / mask.shape[1] * wy
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        cx, cy = float(X[mask].mean()), float(Y[mask].mean())
        a = float(np.max(np.hypot(X[mask] - cx, Y[mask] - cy)))
        return CrossSection(kind="mask", dim=2, a=a, mask=mask, mask_extent=(wx, wy))


@dataclass(frozen=True)
class ThresholdSet:
    """Nondecreasing transverse eigenvalues with exactness tags."""

    nu: tuple
    exactness: tuple  # per entry: 'analytic' | 'discretized'

    def __post_init__(self):
        if len(self.nu) != len(self.exactness):
            raise InputError("nu and exactness must have equal length")
        if not self.nu:
            raise InputError("threshold set cannot be empty")
        arr = np.asarray(self.nu)
        if arr[0] <= 0:
            raise InputError("nu_1 must be positive")
        if np.any(np.diff(arr) < -1e-12):
            raise InputError("thresholds must be nondecreasing")

    @property
    def nu1(self):
        return self.nu[0]

    def __len__(self):
        return len(self.nu)

    def __getitem__(self, i):
        return self.nu[i]


def _interval_spectrum(a, n_max):
    nu = [(n * np.pi / (2.0 * a)) ** 2 for n in range(1, n_max + 1)]
    return ThresholdSet(tuple(nu), ("analytic",) * n_max)


def _rectangle_spectrum(lx, ly, n_max):
    # heap enumeration of pi^2 (m^2/lx^2 + n^2/ly^2) with multiplicity
    def val(m, n):
        return np.pi**2 * ((m / lx) ** 2 + (n / ly) ** 2)

    heap = [(val(1, 1), 1, 1)]
    seen = {(1, 1)}
    out = []
    while len(out) < n_max:
        v, m, n = heapq.heappop(heap)
        out.append(v)
        for m2, n2 in ((m + 1, n), (m, n + 1)):
            if (m2, n2) not in seen:
                seen.add((m2, n2))
                heapq.heappush(heap, (val(m2, n2), m2, n2))
    return ThresholdSet(tuple(out), ("analytic",) * n_max)


def _bessel_zeros(order, count):
    """First ``count`` positive zeros of J_order by scan + bracketed root.

    Scanning step pi/8 cannot skip a zero (consecutive zeros of J_m are
    more than pi/2 apart); each bracket is polished to ~1e-13.
    """
    from scipy.optimize import brentq
    from scipy.special import jv

    zeros = []
    step = np.pi / 8.0
    x = max(order, 1e-3)
    f_prev = jv(order, x)
    while len(zeros) < count:
        x_next = x + step
        f_next = jv(order, x_next)
        if f_prev == 0.0:
            zeros.append(x)
        elif f_prev * f_next < 0.0:
            zeros.append(brentq(lambda t: jv(order, t), x, x_next, xtol=1e-13, rtol=1e-15))
        x, f_prev = x_next, f_next
    return zeros


def _disc_spectrum(radius, n_max):
    # nu = (j_{m,k}/R)^2, multiplicity 2 for m >= 1 (sin/cos branches)
    values = []
    m = 0
    while True:
        zeros = _bessel_zeros(m, n_max)
        first = (zeros[0] / radius) ** 2
        vals = [(z / radius) ** 2 for z in zeros]
        mult = 1 if m == 0 else 2
        for v in vals:
            values.extend([v] * mult)
        values.sort()
        values = values[: max(n_max, 1)]
        if len(values) >= n_max and first > values[n_max - 1]:
            break
        m += 1
    return ThresholdSet(tuple(values[:n_max]), ("analytic",) * n_max)


def _mask_fd_eigenvalues(mask, extent, factor, n_max):
    """5-point Dirichlet eigenvalues on the mask refined by ``factor``.

    Unknowns live on cell corners: a node is interior iff all four cells
    around it belong to the mask, so for grid-aligned shapes the Dirichlet
    wall sits exactly on the mask boundary and the eigenvalues converge at
    second order (cell-centred placement would lose an order through the
    half-cell wall offset).
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import eigsh

    cells = np.kron(mask, np.ones((factor, factor), dtype=bool))
    nx, ny = cells.shape
    hx = extent[0] / nx
    hy = extent[1] / ny
    interior = (
        cells[:-1, :-1] & cells[1:, :-1] & cells[:-1, 1:] & cells[1:, 1:]
    )
    idx = -np.ones(interior.shape, dtype=np.int64)
    idx[interior] = np.arange(interior.sum())
    n = int(interior.sum())
    if n <= n_max:
        raise ResolutionError("mask grid too coarse for the requested mode count")

    rows, cols, vals = [], [], []
    diag = np.full(n, 2.0 / hx**2 + 2.0 / hy**2)
    for axis, h in ((0, hx), (1, hy)):
        if axis == 0:
            here = interior[:-1, :] & interior[1:, :]
            r, c = idx[:-1, :][here], idx[1:, :][here]
        else:
            here = interior[:, :-1] & interior[:, 1:]
            r, c = idx[:, :-1][here], idx[:, 1:][here]
        rows.append(r)
        cols.append(c)
        vals.append(np.full(r.size, -1.0 / h**2))
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    m = m + m.T + sp.diags(diag)
    k = min(n_max, n - 2)
    if n <= 1200:
        return np.sort(np.linalg.eigvalsh(m.toarray()))[:k]
    v0 = np.full(n, 1.0 / np.sqrt(n))
    return np.sort(eigsh(m.tocsc(), k=k, sigma=0.0, which="LM",
                         return_eigenvectors=False, v0=v0))


def _mask_spectrum(omega, n_max, grid_resolution):
    mask, extent = omega.mask, omega.mask_extent
    base = max(1, int(grid_resolution) if grid_resolution else 1)
    shortest = min(mask.shape) * base
    if shortest < 16:
        raise ResolutionError(
            f"grid-mask needs >= 16 interior points per shortest side (got {shortest})"
        )
    coarse = _mask_fd_eigenvalues(mask, extent, base, n_max)
    fine = _mask_fd_eigenvalues(mask, extent, 2 * base, n_max)
    extrap = (4.0 * fine - coarse) / 3.0
    extrap = np.maximum.accumulate(extrap)  # extrapolation may disturb ties
    return ThresholdSet(tuple(float(v) for v in extrap), ("discretized",) * n_max)


def cross_section_spectrum(omega, n_max, grid_resolution=None):
    """Lowest ``n_max`` Dirichlet eigenvalues of omega, with multiplicity."""
    if n_max < 1:
        raise InputError("n_max must be at least 1")
    if omega.kind == "interval":
        return _interval_spectrum(omega.params[0], n_max)
    if omega.kind == "rectangle":
        return _rectangle_spectrum(*omega.params, n_max)
    if omega.kind == "disc":
        return _disc_spectrum(omega.params[0], n_max)
    if omega.kind == "mask":
        return _mask_spectrum(omega, n_max, grid_resolution)
    raise InputError(f"unknown cross-section kind {omega.kind!r}")


def rho_of_lambda(thresholds, lam):
    """Distance from lam down to the nearest threshold below it.

    rho(lam) = lam - sup{zeta in T : zeta <= lam}; below nu_1 the value is
    the tagged infinity.  Raises CoverageError when lam reaches the last
    known threshold, since an unknown larger one could then lie below lam.
    """
    lam = float(lam)
    nu = np.asarray(thresholds.nu)
    if lam < nu[0]:
        return BELOW_LOWEST_THRESHOLD
    if lam >= nu[-1]:
        raise CoverageError(
            f"lambda={lam:g} is not bracketed by the threshold list "
            f"(last known {nu[-1]:g}); extend n_max"
        )
    return lam - float(nu[nu <= lam].max())
