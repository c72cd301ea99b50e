"""Reference-tube metric h(s, u) and every derivative the pipeline needs.

For a tube about a curve in R^d the longitudinal metric coefficient is

    h(s, u) = 1 + u^mu R_mu^alpha(s) K_alpha^1(s),

affine in the transverse coordinates, and all of its s-derivatives follow
in closed form from the rotation system dR/ds = -R K_sub:

    h_,1   = u . R (k' - K k)
    h_,11  = u . R (k'' - K' k - 2 K k' + K K k)
    h_,111 = u . R (k''' - K'' k - 3 K k'' - 3 K' k' + K' K k
                     + 2 K K' k + 3 K K k' - K K K k)

with k = (K_alpha^1) and K the transverse sub-block of the generator.
For strips on an abstract surface of Gauss curvature K_g the coefficient
instead solves the transverse Jacobi equation h_,22 + K_g h = 0 with
h(.,0) = 1, h_,2(.,0) = -kappa; s-derivatives then come from order-4
finite differences because no closed form exists for general K_g.

Both variants expose the same evaluator interface, vectorized over numpy
arrays, so the operator assembly downstream never branches on the source.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EllipticityError, InputError
from .frames import RotationField
from .profiles import CurvatureProfile

__all__ = [
    "TubeMetric",
    "EuclideanTubeMetric",
    "SurfaceStripMetric",
    "SurfaceData",
    "EllipticityBounds",
    "metric_from_frames",
    "metric_from_profile",
    "metric_from_jacobi",
    "ellipticity_bounds",
    "export_metric_csv",
]


class TubeMetric:
    """Common evaluator interface for g = diag(h^2, 1, ..., 1).

    Scalar combinations rather than raw partials are exposed because they
    are what the effective potential consumes:

    ``hu_sq``    = delta^{mu nu} h_,mu h_,nu
    ``lap_u``    = delta^{mu nu} h_,mu nu
    ``hu_sq_s``  = d/ds of ``hu_sq``
    ``lap_u_s``  = delta^{mu nu} h_,1 mu nu
    ``cross_su`` = delta^{mu nu} h_,1mu h_,nu

    Evaluators are immutable after construction; concurrent evaluation is
    safe.
    """

    source = "abstract"

    def __init__(self, a, dimension, s_range):
        if a <= 0:
            raise InputError("tube radius a must be positive")
        self.a = float(a)
        self.dimension = int(dimension)
        self.s_range = (float(s_range[0]), float(s_range[1]))
        self._bounds = None

    # -- transverse argument normalisation ---------------------------------
    def _split_u(self, u):
        u = np.asarray(u, dtype=float)
        m = self.dimension - 1
        if m == 1:
            if u.ndim and u.shape[-1] == 1:
                return u[..., 0][..., None]
            return u[..., None]
        if u.ndim == 0 or u.shape[-1] != m:
            raise InputError(f"transverse point needs {m} components")
        return u

    def det_g(self, s, u):
        """|g| = h^2."""
        return self.h(s, u) ** 2

    # Subclasses implement: h, h_s, h_ss, h_sss, h_u, hu_sq, hu_sq_s,
    # lap_u, lap_u_s, cross_su.

    @property
    def bounds(self):
        """Cached ellipticity bounds (c-, c+)."""
        if self._bounds is None:
            self._bounds = ellipticity_bounds(self)
        return self._bounds

    @property
    def c_minus(self):
        return self.bounds.c_minus

    @property
    def c_plus(self):
        return self.bounds.c_plus


class EuclideanTubeMetric(TubeMetric):
    """Metric of a tube about a curve in R^d, from curvature data.

    The rotation samples are interpolated entrywise with cubic splines in
    s (exact for d=2, where the rotation is the scalar 1), while the
    curvature vectors are evaluated analytically, so the closed-form
    derivative identities hold to spline accuracy.
    """

    source = "euclidean-tube"

    def __init__(self, profile: CurvatureProfile, rotations, a):
        super().__init__(a, profile.dimension, profile.s_range)
        self.profile = profile
        self.kappa1_sup = profile.kappa1_sup()
        product = self.a * self.kappa1_sup
        if product >= 1.0:
            raise EllipticityError(
                f"a * sup|kappa_1| = {product:g} >= 1: tube map not a local "
                "diffeomorphism",
                where=product,
            )

        m = profile.dimension - 1
        if m == 1:
            self._rot = None  # rotation is identically the scalar 1
        else:
            if rotations is None:
                raise InputError("d >= 3 requires transverse rotation samples")
            if isinstance(rotations, RotationField):
                s_grid, mats = rotations.s_grid, rotations.matrices
            else:
                s_grid, mats = rotations
            if mats.shape[-1] != m:
                raise InputError("rotation block size does not match the profile")
            from scipy.interpolate import CubicSpline

            self._rot = CubicSpline(s_grid, mats, axis=0)
            self._rot_range = (float(s_grid[0]), float(s_grid[-1]))

    def _rotation(self, s):
        s = np.asarray(s, dtype=float)
        m = self.dimension - 1
        if self._rot is None:
            return np.ones(s.shape + (1, 1))
        lo, hi = self._rot_range
        if s.size and (s.min() < lo - 1e-12 or s.max() > hi + 1e-12):
            raise InputError("evaluation outside the rotation sample range")
        return self._rot(np.clip(s, lo, hi))

    # -- closed-form coefficient vectors -----------------------------------
    def _w(self, s, order):
        """Coefficient vector of u in d^order h/ds^order, shape (..., d-1)."""
        p = self.profile
        k0 = p.first_column(s, 0)
        if order == 0:
            v = k0
        elif order == 1:
            v = p.first_column(s, 1) - _mv(p.sub_block(s, 0), k0)
        elif order == 2:
            K0 = p.sub_block(s, 0)
            k1 = p.first_column(s, 1)
            v = (
                p.first_column(s, 2)
                - _mv(p.sub_block(s, 1), k0)
                - 2.0 * _mv(K0, k1)
                + _mv(K0, _mv(K0, k0))
            )
        elif order == 3:
            K0 = p.sub_block(s, 0)
            K1 = p.sub_block(s, 1)
            k1 = p.first_column(s, 1)
            k2 = p.first_column(s, 2)
            v = (
                p.first_column(s, 3)
                - _mv(p.sub_block(s, 2), k0)
                - 3.0 * _mv(K0, k2)
                - 3.0 * _mv(K1, k1)
                + _mv(K1, _mv(K0, k0))
                + 2.0 * _mv(K0, _mv(K1, k0))
                + 3.0 * _mv(K0, _mv(K0, k1))
                - _mv(K0, _mv(K0, _mv(K0, k0)))
            )
        else:
            raise InputError(f"no closed form beyond third s-derivative (got {order})")
        return _mv(self._rotation(s), v)

    def _contract(self, s, u, order):
        u = self._split_u(u)
        w = self._w(np.asarray(s, dtype=float), order)
        shape = np.broadcast_shapes(w.shape, u.shape)
        return np.einsum(
            "...m,...m->...", np.broadcast_to(w, shape), np.broadcast_to(u, shape)
        )

    def h(self, s, u):
        return 1.0 + self._contract(s, u, 0)

    def h_s(self, s, u):
        return self._contract(s, u, 1)

    def h_ss(self, s, u):
        return self._contract(s, u, 2)

    def h_sss(self, s, u):
        return self._contract(s, u, 3)

    def h_u(self, s, u):
        u = self._split_u(u)
        w = self._w(np.asarray(s, dtype=float), 0)
        return np.broadcast_to(w, np.broadcast_shapes(w.shape, u.shape)).copy()

    # Rotation orthogonality collapses the transverse contractions to
    # curvature scalars; these identities are exact, no interpolation.
    def hu_sq(self, s, u):
        kap = self.profile.kappa(1, s, 0)
        return self._bcast(kap**2, s, u)

    def hu_sq_s(self, s, u):
        val = 2.0 * self.profile.kappa(1, s, 0) * self.profile.kappa(1, s, 1)
        return self._bcast(val, s, u)

    def cross_su(self, s, u):
        val = self.profile.kappa(1, s, 0) * self.profile.kappa(1, s, 1)
        return self._bcast(val, s, u)

    def lap_u(self, s, u):
        return self._bcast(np.zeros(np.shape(np.asarray(s, dtype=float))), s, u)

    def lap_u_s(self, s, u):
        return self._bcast(np.zeros(np.shape(np.asarray(s, dtype=float))), s, u)

    def _bcast(self, val, s, u):
        u = self._split_u(u)
        shape = np.broadcast_shapes(np.shape(val), u.shape[:-1])
        return np.broadcast_to(np.asarray(val, dtype=float), shape).copy()

    def analytic_bounds(self):
        """(1 - a sup|kappa1|, 1 + a sup|kappa1|)."""
        prod = self.a * self.kappa1_sup
        return 1.0 - prod, 1.0 + prod


def _mv(mat, vec):
    return np.einsum("...ij,...j->...i", mat, vec)


@dataclass(frozen=True)
class SurfaceData:
    """Geometry of a strip's ambient surface in Fermi coordinates.

    ``gauss_curvature(s, u)`` must broadcast over arrays and stay bounded
    on the strip; ``kappa(s)`` is the geodesic curvature of the base
    curve.
    """

    gauss_curvature: Callable
    kappa: Callable
    a: float
    s_range: tuple

    def __post_init__(self):
        probe_s = np.linspace(self.s_range[0], self.s_range[1], 64)
        probe = self.gauss_curvature(probe_s, np.zeros_like(probe_s))
        if not np.all(np.isfinite(probe)):
            raise InputError("Gauss curvature is not finite on the strip centreline")


class SurfaceStripMetric(TubeMetric):
    """Strip metric obtained by integrating the Jacobi equation.

    h is computed on demand by a vectorized RK4 sweep in u (from the
    centreline outward, both directions, all requested s at once) over an
    internal u grid, and evaluated in between with cubic Hermite
    interpolation using the stored transverse derivative.  Evaluating at
    the exact requested s (instead of interpolating stored columns) keeps
    the s-interpolation error out of the finite-difference s-derivatives.
    """

    source = "surface-strip"

    def __init__(self, surface: SurfaceData, u_step=None, fd_step=1e-2):
        super().__init__(surface.a, 2, surface.s_range)
        self.surface = surface
        a = self.a
        if u_step is None:
            u_step = a / 256.0
        n_half = max(8, int(np.ceil(a / u_step)))
        self.u_nodes = np.linspace(-a, a, 2 * n_half + 1)
        self._i0 = n_half
        self.fd_step = float(fd_step)
        self._cache = {}

    # -- Jacobi sweep -------------------------------------------------------
    _CACHE_LIMIT = 64

    def _sweep_cached(self, s_values):
        # the pipeline re-requests identical s arrays many times (stencil
        # offsets, repeated quantities); keying on the raw bytes is exact
        key = s_values.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = self._sweep(s_values)
            if len(self._cache) >= self._CACHE_LIMIT:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = hit
        return hit

    def _sweep(self, s_values):
        """Integrate h'' = -K h in u for every s at once.

        Returns (h, h_u) arrays of shape (len(s_values), len(u_nodes)).
        Raises EllipticityError at the first focal point (h <= 0).
        """
        K = self.surface.gauss_curvature
        s = np.asarray(s_values, dtype=float)
        nu = self.u_nodes.size
        h = np.empty((s.size, nu))
        hu = np.empty((s.size, nu))
        h[:, self._i0] = 1.0
        hu[:, self._i0] = -np.asarray(self.surface.kappa(s), dtype=float)

        def step(j_from, j_to):
            u0 = self.u_nodes[j_from]
            du = self.u_nodes[j_to] - u0
            y1, y2 = h[:, j_from], hu[:, j_from]

            def f(u, a1, a2):
                return a2, -K(s, np.full_like(s, u)) * a1

            k1a, k1b = f(u0, y1, y2)
            k2a, k2b = f(u0 + du / 2, y1 + du / 2 * k1a, y2 + du / 2 * k1b)
            k3a, k3b = f(u0 + du / 2, y1 + du / 2 * k2a, y2 + du / 2 * k2b)
            k4a, k4b = f(u0 + du, y1 + du * k3a, y2 + du * k3b)
            h[:, j_to] = y1 + du / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
            hu[:, j_to] = y2 + du / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)
            bad = h[:, j_to] <= 0.0
            if bad.any():
                i = int(np.argmax(bad))
                raise EllipticityError(
                    f"focal point inside the strip: h <= 0 at "
                    f"(s={s[i]:g}, u={self.u_nodes[j_to]:g})",
                    where=(float(s[i]), float(self.u_nodes[j_to])),
                )

        for j in range(self._i0, nu - 1):
            step(j, j + 1)
        for j in range(self._i0, 0, -1):
            step(j, j - 1)
        return h, hu

    def _columns(self, s, u, want="h"):
        """Evaluate h or h_u at broadcast (s, u) points via Hermite cells."""
        u = self._split_u(u)[..., 0]
        s = np.asarray(s, dtype=float)
        s_b, u_b = np.broadcast_arrays(s, u)
        flat_s = s_b.ravel()
        flat_u = u_b.ravel()
        if flat_u.size and (flat_u.min() < self.u_nodes[0] - 1e-12
                            or flat_u.max() > self.u_nodes[-1] + 1e-12):
            raise InputError("transverse coordinate outside the strip")

        uniq, inv = np.unique(flat_s, return_inverse=True)
        h_cols, hu_cols = self._sweep_cached(uniq)

        j = np.clip(np.searchsorted(self.u_nodes, flat_u) - 1, 0, self.u_nodes.size - 2)
        du = self.u_nodes[j + 1] - self.u_nodes[j]
        t = (flat_u - self.u_nodes[j]) / du
        rows = inv
        if want == "h":
            y0, y1 = h_cols[rows, j], h_cols[rows, j + 1]
            d0, d1 = hu_cols[rows, j], hu_cols[rows, j + 1]
        else:  # h_u, using h_uu = -K h as the Hermite slope
            Kfun = self.surface.gauss_curvature
            y0, y1 = hu_cols[rows, j], hu_cols[rows, j + 1]
            d0 = -Kfun(flat_s, self.u_nodes[j]) * h_cols[rows, j]
            d1 = -Kfun(flat_s, self.u_nodes[j + 1]) * h_cols[rows, j + 1]
        t2, t3 = t * t, t * t * t
        val = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * du * d0
               + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * du * d1)
        return val.reshape(s_b.shape)

    def h(self, s, u):
        return self._columns(s, u, "h")

    def h_u(self, s, u):
        return self._columns(s, u, "hu")[..., None]

    # -- order-4 finite differences in s ------------------------------------
    _D1 = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))
    _D2 = ((-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0),
           (1, 16.0 / 12.0), (2, -1.0 / 12.0))
    _D3 = ((-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0),
           (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0))

    def _fd(self, fn, stencil, power, s, u):
        s = np.asarray(s, dtype=float)
        acc = 0.0
        for off, c in stencil:
            acc = acc + c * fn(s + off * self.fd_step, u)
        return acc / self.fd_step**power

    def h_s(self, s, u):
        return self._fd(self.h, self._D1, 1, s, u)

    def h_ss(self, s, u):
        return self._fd(self.h, self._D2, 2, s, u)

    def h_sss(self, s, u):
        return self._fd(self.h, self._D3, 3, s, u)

    def hu_sq(self, s, u):
        return self._columns(s, u, "hu") ** 2

    def hu_sq_s(self, s, u):
        hu = self._columns(s, u, "hu")
        hus = self._fd(lambda a, b: self._columns(a, b, "hu"), self._D1, 1, s, u)
        return 2.0 * hu * hus

    def cross_su(self, s, u):
        hu = self._columns(s, u, "hu")
        hus = self._fd(lambda a, b: self._columns(a, b, "hu"), self._D1, 1, s, u)
        return hus * hu

    def lap_u(self, s, u):
        s_arr = np.asarray(s, dtype=float)
        uu = self._split_u(u)[..., 0]
        return -self.surface.gauss_curvature(s_arr, uu) * self.h(s, u)

    def lap_u_s(self, s, u):
        return self._fd(self.lap_u, self._D1, 1, s, u)


def metric_from_frames(profile, rotations, a):
    """Euclidean tube metric from curvature data and rotation samples."""
    return EuclideanTubeMetric(profile, rotations, a)


def metric_from_profile(profile, a):
    """Planar (d=2) shortcut: the rotation block is identically 1."""
    if profile.dimension != 2:
        raise InputError("metric_from_profile is the d=2 shortcut; pass rotations")
    return EuclideanTubeMetric(profile, None, a)


def metric_from_jacobi(surface, s_grid=None, u_grid=None, fd_step=1e-2):
    """Strip metric on a surface of Gauss curvature K.

    ``u_grid`` (when given) must contain 0 and fixes the internal
    integration nodes; ``s_grid`` is accepted for interface parity and
    only widens the declared range, since evaluation integrates at the
    exact requested s values.
    """
    if u_grid is not None:
        u_grid = np.asarray(u_grid, dtype=float)
        if not np.any(np.abs(u_grid) < 1e-14):
            raise InputError("u_grid must include the centreline u = 0")
        if np.any(np.abs(u_grid) > surface.a + 1e-12):
            raise InputError("u_grid leaves the strip half-width")
        u_step = float(np.min(np.diff(np.sort(u_grid))))
    else:
        u_step = None
    metric = SurfaceStripMetric(surface, u_step=u_step, fd_step=fd_step)
    if s_grid is not None:
        s_grid = np.asarray(s_grid, dtype=float)
        lo = min(metric.s_range[0], float(s_grid.min()))
        hi = max(metric.s_range[1], float(s_grid.max()))
        metric.s_range = (lo, hi)
    return metric


@dataclass(frozen=True)
class EllipticityBounds:
    c_minus: float
    c_plus: float
    analytic_minus: float = None
    analytic_plus: float = None

    def __iter__(self):
        return iter((self.c_minus, self.c_plus))


def ellipticity_bounds(metric, sample_budget=4096):
    """Estimate (inf h, sup h) over the truncated domain.

    A deterministic unscrambled Halton sample of the interior is combined
    with a boundary lattice (|u| = a and the s-range endpoints), where the
    extremes of an affine-in-u coefficient actually live.  For euclidean
    tubes the analytic bounds 1 -+ a sup|kappa_1| are attached and the
    sampled bounds are asserted to lie inside them.
    """
    from scipy.stats import qmc

    m = metric.dimension - 1
    lo, hi = metric.s_range
    a = metric.a

    halton = qmc.Halton(d=1 + m, scramble=False)
    pts = halton.random(sample_budget)
    s_in = lo + pts[:, 0] * (hi - lo)
    u_in = (2.0 * pts[:, 1:] - 1.0) * a
    keep = np.linalg.norm(u_in, axis=1) <= a
    s_in, u_in = s_in[keep], u_in[keep]

    n_edge = max(64, sample_budget // 16)
    s_edge = np.linspace(lo, hi, n_edge)
    if m == 1:
        u_edge = np.concatenate([np.full(n_edge, -a), np.full(n_edge, a)])
        s_edge = np.tile(s_edge, 2)
    else:
        ang = np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False)
        circle = a * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        u_edge = np.repeat(circle, n_edge, axis=0)
        s_edge = np.tile(s_edge, 32)

    s_all = np.concatenate([s_in, s_edge])
    u_all = np.concatenate([u_in.reshape(-1, m), u_edge.reshape(-1, m)])
    vals = metric.h(s_all, u_all)
    c_minus, c_plus = float(vals.min()), float(vals.max())

    if isinstance(metric, EuclideanTubeMetric):
        alo, ahi = metric.analytic_bounds()
        if c_minus < alo - 1e-10 or c_plus > ahi + 1e-10:
            raise EllipticityError(
                f"sampled bounds ({c_minus:g}, {c_plus:g}) escape the analytic "
                f"bounds ({alo:g}, {ahi:g})",
                where=(c_minus, c_plus),
            )
        return EllipticityBounds(c_minus, c_plus, alo, ahi)
    return EllipticityBounds(c_minus, c_plus)


def export_metric_csv(metric, path, s_values, u_values):
    """Debug snapshot of (s, u, h, h_s, h_ss) on a tensor grid."""
    import csv

    s_values = np.asarray(s_values, dtype=float)
    u_values = np.asarray(u_values, dtype=float)
    if u_values.ndim == 1:
        u_values = u_values[:, None]
    m = u_values.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s"] + [f"u{mu}" for mu in range(2, m + 2)] + ["h", "h_1", "h_11"])
        for s in s_values:
            for u in u_values:
                sb = np.asarray(s)
                writer.writerow(
                    [repr(float(s))]
                    + [repr(float(x)) for x in u]
                    + [
                        repr(float(metric.h(sb, u))),
                        repr(float(metric.h_s(sb, u))),
                        repr(float(metric.h_ss(sb, u))),
                    ]
                )
