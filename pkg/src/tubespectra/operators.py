"""Coefficients, effective potential and operator assembly on truncated grids.

The transformed Hamiltonian on the straight reference tube is

    H = -d_i G^ij d_j + V,   G = diag(h^-2, 1, ..., 1),

    V = -(5/4) h_,1^2/h^4 + (1/2) h_,11/h^3
        - (1/4) d^{mu nu} h_,mu h_,nu / h^2 + (1/2) d^{mu nu} h_,mu nu / h,

with artificial Dirichlet walls at s = +-L closing the truncated domain.
The discretization is the second-order conservative finite-volume stencil:
every face gets the arithmetic mean of the two nodal coefficient values,
so the assembled matrix is exactly symmetric and equals the discrete
quadratic form  sum_faces c_f (v_i - v_j)^2 / dx^2 + sum_nodes V v^2, which
makes Dirichlet domain monotonicity in L exact at fixed spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EllipticityError, InputError, ResolutionError

__all__ = [
    "TruncatedGrid",
    "DiscreteOperator",
    "EffectivePotential",
    "CoefficientField",
    "assemble_hamiltonian",
    "assemble_free_hamiltonian",
    "assemble_weighted_form_hamiltonian",
    "check_coefficient_assumptions",
    "export_triplets",
]


@dataclass(frozen=True)
class TruncatedGrid:
    """Tensor grid on [-L, L] x bounding-box(omega) with Dirichlet walls.

    ``t_axes`` hold the transverse node coordinates including the boundary
    ring; ``t_interior`` flags nodes strictly inside omega.  The outermost
    layer of every axis must be inactive so each active node has a face in
    every direction.
    """

    s_nodes: np.ndarray
    t_axes: tuple
    t_interior: np.ndarray

    def __post_init__(self):
        s = self.s_nodes
        if s.ndim != 1 or s.size < 3:
            raise InputError("need at least 3 longitudinal nodes")
        if self.t_interior.shape != tuple(ax.size for ax in self.t_axes):
            raise InputError("t_interior shape must match transverse axes")
        for k in range(self.t_interior.ndim):
            edge = [slice(None)] * self.t_interior.ndim
            for j in (0, -1):
                edge[k] = j
                if np.any(self.t_interior[tuple(edge)]):
                    raise InputError("transverse interior mask touches the array edge")

    # -- constructors -------------------------------------------------------
    @staticmethod
    def interval(length, s_spacing, half_width, t_spacing=None):
        """d=2 grid on [-L, L] x [-a, a]."""
        if t_spacing is None:
            t_spacing = s_spacing
        s_nodes = _axis_nodes(length, s_spacing)
        u_nodes = _axis_nodes(half_width, t_spacing)
        interior = np.zeros(u_nodes.size, dtype=bool)
        interior[1:-1] = True
        return TruncatedGrid(s_nodes, (u_nodes,), interior)

    @staticmethod
    def box(length, s_spacing, half_widths, t_spacing=None):
        """d>=3 grid with a rectangular cross-section."""
        if t_spacing is None:
            t_spacing = s_spacing
        s_nodes = _axis_nodes(length, s_spacing)
        axes = tuple(_axis_nodes(a, t_spacing) for a in half_widths)
        interior = np.ones(tuple(ax.size for ax in axes), dtype=bool)
        for k in range(len(axes)):
            sl = [slice(None)] * len(axes)
            for j in (0, -1):
                sl[k] = j
                interior[tuple(sl)] = False
        return TruncatedGrid(s_nodes, axes, interior)

    @staticmethod
    def disc(length, s_spacing, radius, t_spacing=None):
        """d=3 grid with a disc cross-section masked on its bounding box."""
        if t_spacing is None:
            t_spacing = s_spacing
        s_nodes = _axis_nodes(length, s_spacing)
        ax = _axis_nodes(radius, t_spacing)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        interior = np.hypot(X, Y) < radius - 1e-12
        interior[0, :] = interior[-1, :] = False
        interior[:, 0] = interior[:, -1] = False
        return TruncatedGrid(s_nodes, (ax, ax), interior)

    # -- geometry -----------------------------------------------------------
    @property
    def s_spacing(self):
        return float(self.s_nodes[1] - self.s_nodes[0])

    @property
    def t_spacings(self):
        return tuple(float(ax[1] - ax[0]) for ax in self.t_axes)

    @property
    def spacings(self):
        return (self.s_spacing,) + self.t_spacings

    @property
    def length(self):
        return float(self.s_nodes[-1])

    @property
    def full_shape(self):
        return (self.s_nodes.size,) + self.t_interior.shape

    @property
    def transverse_dim(self):
        return len(self.t_axes)

    def active(self):
        """Boolean array over the full tensor marking unknowns."""
        act = np.zeros(self.full_shape, dtype=bool)
        act[1:-1] = self.t_interior
        return act

    @property
    def n_unknowns(self):
        return int((self.s_nodes.size - 2) * self.t_interior.sum())

    def row_index(self):
        act = self.active()
        idx = -np.ones(self.full_shape, dtype=np.int64)
        idx[act] = np.arange(act.sum())
        return idx, act

    def node_coordinates(self):
        """(S, U) arrays over the full tensor; U has a trailing axis of
        length d-1."""
        shape = self.full_shape
        S = self.s_nodes.reshape((-1,) + (1,) * self.transverse_dim)
        S = np.broadcast_to(S, shape)
        comps = []
        for k, ax in enumerate(self.t_axes):
            form = [1] * self.transverse_dim
            form[k] = -1
            comps.append(np.broadcast_to(ax.reshape(form), self.t_interior.shape))
        U = np.stack(np.broadcast_arrays(*comps), axis=-1) if comps else None
        U = np.broadcast_to(U, shape + (self.transverse_dim,))
        return S, U

    def interior_coordinates(self):
        S, U = self.node_coordinates()
        act = self.active()
        return S[act], U[act]

    def wall_mass_fraction(self, vec, layers=4):
        """Fraction of |vec|^2 within ``layers`` nodes of the s-walls."""
        x = np.asarray(vec).reshape(self.s_nodes.size - 2, -1)
        total = float(np.sum(np.abs(x) ** 2))
        if total == 0.0:
            return 0.0
        near = float(np.sum(np.abs(x[:layers]) ** 2) + np.sum(np.abs(x[-layers:]) ** 2))
        return near / total


def _axis_nodes(half_length, spacing):
    n = int(round(2.0 * half_length / spacing))
    if abs(n * spacing - 2.0 * half_length) > 1e-9 * max(1.0, half_length):
        raise InputError(
            f"spacing {spacing!r} does not tile the interval of half-length {half_length!r}"
        )
    return -half_length + spacing * np.arange(n + 1)


@dataclass
class DiscreteOperator:
    """Sparse real matrix on the interior nodes of a truncated grid."""

    matrix: sp.spmatrix
    grid: TruncatedGrid
    tag: str
    symmetric: bool = True

    @property
    def shape(self):
        return self.matrix.shape

    def max_asymmetry(self):
        d = self.matrix - self.matrix.T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))

    def to_dense(self):
        return self.matrix.toarray()


class CoefficientField:
    """The matrix G = diag(h^-2, 1, ..., 1) and its s-derivative.

    ``metric=None`` yields the identity field of the free Hamiltonian.
    """

    def __init__(self, metric=None):
        self.metric = metric

    def g_ss(self, s, u):
        if self.metric is None:
            return np.ones(np.broadcast_shapes(np.shape(s), np.shape(np.asarray(u)[..., 0])))
        return self.metric.h(s, u) ** -2.0

    def g_ss_s(self, s, u):
        """d/ds of G^11 = -2 h_,1 / h^3."""
        if self.metric is None:
            return np.zeros(np.broadcast_shapes(np.shape(s), np.shape(np.asarray(u)[..., 0])))
        m = self.metric
        return -2.0 * m.h_s(s, u) / m.h(s, u) ** 3

    def deviation_from_identity(self, s, u):
        """Entrywise max |G - 1| = |h^-2 - 1|."""
        return np.abs(self.g_ss(s, u) - 1.0)

    def axis_coefficient(self, axis, s, u):
        """Nodal coefficient of -d_axis c d_axis in the Hamiltonian."""
        if axis == 0:
            return self.g_ss(s, u)
        return np.ones(np.broadcast_shapes(np.shape(s), np.shape(np.asarray(u)[..., 0])))

    def matrix_bounds(self):
        """(C-, C+) with C- 1 <= G <= C+ 1."""
        if self.metric is None:
            return 1.0, 1.0
        c_minus, c_plus = self.metric.c_minus, self.metric.c_plus
        return min(c_plus**-2.0, 1.0), max(c_minus**-2.0, 1.0)


class EffectivePotential:
    """The scalar potential of the unitarily transformed Laplacian.

    The four contributions are retained separately for diagnostics; for a
    straight tube every one of them vanishes identically.
    """

    def __init__(self, metric, h_floor=1e-8):
        self.metric = metric
        self.h_floor = float(h_floor)

    def _h_checked(self, s, u):
        h = self.metric.h(s, u)
        if np.any(h <= self.h_floor):
            flat = np.argmin(h)
            s_b = np.broadcast_to(np.asarray(s, dtype=float), h.shape)
            raise EllipticityError(
                f"h <= {self.h_floor:g} at s={s_b.ravel()[flat]:g}: potential singular",
                where=float(s_b.ravel()[flat]),
            )
        return h

    def components(self, s, u):
        m = self.metric
        h = self._h_checked(s, u)
        return {
            "longitudinal_gradient": -1.25 * m.h_s(s, u) ** 2 / h**4,
            "longitudinal_curvature": 0.5 * m.h_ss(s, u) / h**3,
            "transverse_gradient": -0.25 * m.hu_sq(s, u) / h**2,
            "transverse_laplacian": 0.5 * m.lap_u(s, u) / h,
        }

    def __call__(self, s, u):
        c = self.components(s, u)
        return (
            c["longitudinal_gradient"]
            + c["longitudinal_curvature"]
            + c["transverse_gradient"]
            + c["transverse_laplacian"]
        )

    def derivative_s(self, s, u):
        """Closed-form d V / ds."""
        m = self.metric
        h = self._h_checked(s, u)
        h1 = m.h_s(s, u)
        h11 = m.h_ss(s, u)
        return (
            5.0 * h1**3 / h**5
            - 4.0 * h1 * h11 / h**4
            + m.h_sss(s, u) / (2.0 * h**3)
            + 0.5
            * (
                h1 * m.hu_sq(s, u) / h**3
                - (h1 * m.lap_u(s, u) + m.cross_su(s, u)) / h**2
                + m.lap_u_s(s, u) / h
            )
        )


# ---------------------------------------------------------------------------
# assembly

def _axis_pair_slices(shape, axis):
    lo = [slice(None)] * len(shape)
    hi = [slice(None)] * len(shape)
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def _assemble_divergence_form(grid, coefficient_arrays, sign=1.0):
    """Matrix of sign * sum_k (-d_k c_k d_k) with face-averaged coefficients.

    ``coefficient_arrays[k]`` holds the nodal values of c_k on the full
    tensor grid.  Returns (matrix, diag_only) with the matrix exactly
    symmetric by construction.
    """
    idx, act = grid.row_index()
    n = grid.n_unknowns
    shape = grid.full_shape
    spac = grid.spacings
    diag_full = np.zeros(shape)
    rows, cols, vals = [], [], []
    for axis, c_nodes in enumerate(coefficient_arrays):
        lo, hi = _axis_pair_slices(shape, axis)
        cf = 0.5 * (c_nodes[lo] + c_nodes[hi]) / spac[axis] ** 2
        # diagonal picks up every face adjacent to an active node
        tmp = np.zeros(shape)
        tmp[lo] += cf
        tmp[hi] += cf
        diag_full += tmp
        both = act[lo] & act[hi]
        rows.append(idx[lo][both])
        cols.append(idx[hi][both])
        vals.append(-cf[both])
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    m = m + m.T + sp.diags(diag_full[act])
    return sign * m.tocsr()


def _require_resolution(grid):
    if int(grid.t_interior.sum()) < 8:
        raise ResolutionError(
            f"grid too coarse: {int(grid.t_interior.sum())} interior transverse "
            "nodes (need at least 8)"
        )


def assemble_hamiltonian(coeffs, potential, grid, tag="H", enforce_resolution=True):
    """Assemble -d_i G^ij d_j + V on the truncated grid."""
    if enforce_resolution:
        _require_resolution(grid)
    S, U = grid.node_coordinates()
    arrays = [np.ascontiguousarray(coeffs.axis_coefficient(k, S, U))
              for k in range(1 + grid.transverse_dim)]
    m = _assemble_divergence_form(grid, arrays)
    if potential is not None:
        s_i, u_i = grid.interior_coordinates()
        m = m + sp.diags(np.asarray(potential(s_i, u_i), dtype=float))
    return DiscreteOperator(matrix=m.tocsr(), grid=grid, tag=tag)


def assemble_free_hamiltonian(grid, enforce_resolution=True):
    """The Dirichlet Laplacian on the straight tube: G = 1, V = 0."""
    return assemble_hamiltonian(
        CoefficientField(None), None, grid, tag="H0", enforce_resolution=enforce_resolution
    )


def assemble_weighted_form_hamiltonian(metric, grid, enforce_resolution=True):
    """Discretize the weighted Dirichlet form with lumped mass diag(h).

    Stiffness carries h g^ij at the faces (1/h along s, h transversely)
    and the diagonal mass h is folded in symmetrically, which realises the
    rescaling psi -> h^(1/2) psi at the discrete level.  Its eigenvalues
    must agree with the flat-measure operator's up to discretization
    error.
    """
    if enforce_resolution:
        _require_resolution(grid)
    S, U = grid.node_coordinates()
    h_nodes = np.ascontiguousarray(metric.h(S, U))
    arrays = [1.0 / h_nodes] + [h_nodes] * grid.transverse_dim
    k = _assemble_divergence_form(grid, arrays)
    act = grid.active()
    d_half = sp.diags(h_nodes[act] ** -0.5)
    m = (d_half @ k @ d_half).tocsr()
    # symmetrize away the last-bit roundoff of the triple product
    m = 0.5 * (m + m.T)
    return DiscreteOperator(matrix=m.tocsr(), grid=grid, tag="weighted-form")


def export_triplets(op, path):
    """Coordinate text dump: row col value, one entry per line."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {op.tag} {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


# ---------------------------------------------------------------------------
# coefficient-level hypothesis checks

def check_coefficient_assumptions(coeffs, potential, ladder=None, s_range=None,
                                  u_probe=None, config=None):
    """Verify the operator-level decay hypotheses on G and V numerically.

    Items checked, each over a ladder of tail radii R (sup over |s| > R,
    uniformly over a transverse probe set):

    * G-bounds:              0 < C- <= G <= C+ < inf
    * G-approach-identity:   sup|G - 1| -> 0
    * G-s-derivative-decay:  |G^11_,1| (and |G - 1| itself) fit
                             C <s>^-(1+theta) with theta in (0, 1]
    * G-divergence-bounded:  sup|G^1i_,i| finite
    * V-bounded / V-approach-zero / V-s-derivative-decay: likewise for V.

    Including the undifferentiated quantity in each decay fit is a
    deliberate strengthening: it makes the fitted theta reflect the
    slowest-decaying member and keeps the verdict conservative.
    """
    from .assumptions import (
        AssumptionReport,
        CheckerConfig,
        bounded_entry,
        decay_entry,
        default_ladder,
        limit_entry,
        make_tail_sampler,
    )

    cfg = config or CheckerConfig()
    metric = coeffs.metric
    if s_range is None:
        if metric is None:
            raise InputError("need s_range for a free coefficient field")
        s_range = metric.s_range
    if ladder is None:
        ladder = default_ladder(s_range)
    if len(ladder) < 4:
        raise InputError("need at least 4 ladder radii for the decay regression")

    if u_probe is None:
        a = metric.a if metric is not None else 1.0
        m = metric.dimension - 1 if metric is not None else 1
        u_probe = _default_u_probe(a, m)

    def sup_u(fn):
        def g(s):
            s = np.asarray(s, dtype=float)
            vals = fn(s[:, None], np.broadcast_to(u_probe, (s.size,) + u_probe.shape))
            return np.max(np.abs(vals), axis=-1)

        return g

    sampler = make_tail_sampler(s_range, cfg)

    c_lo, c_hi = coeffs.matrix_bounds()
    entries = [
        bounded_entry(
            "G-bounds",
            "eigenvalue bounds of G",
            value=(c_lo, c_hi),
            ok=0.0 < c_lo <= c_hi < np.inf,
            notes=f"C-={c_lo!r} C+={c_hi!r}",
        )
    ]
    g_dev = sup_u(coeffs.deviation_from_identity)
    g_der = sup_u(coeffs.g_ss_s)
    entries.append(limit_entry("G-approach-identity", "sup|G-1|", g_dev, ladder, sampler, cfg))
    agg, subs = decay_entry(
        "G-s-derivative-decay", {"G11_s": g_der, "G-1": g_dev}, ladder, sampler, cfg
    )
    entries.append(agg)
    entries.extend(subs)
    div_sup = float(np.max(g_der(sampler.master_abscissae())))
    entries.append(
        bounded_entry(
            "G-divergence-bounded",
            "sup|G^1i_,i|",
            value=div_sup,
            ok=np.isfinite(div_sup),
            notes=f"sup={div_sup!r}",
        )
    )

    v_abs = sup_u(lambda s, u: potential(s, u))
    v_der = sup_u(lambda s, u: potential.derivative_s(s, u))
    v_sup = float(np.max(v_abs(sampler.master_abscissae())))
    entries.append(
        bounded_entry(
            "V-bounded", "sup|V|", value=v_sup, ok=np.isfinite(v_sup), notes=f"sup={v_sup!r}"
        )
    )
    entries.append(limit_entry("V-approach-zero", "sup|V|", v_abs, ladder, sampler, cfg))
    agg, subs = decay_entry(
        "V-s-derivative-decay", {"V_s": v_der, "V": v_abs}, ladder, sampler, cfg
    )
    entries.append(agg)
    entries.extend(subs)
    return AssumptionReport(entries=tuple(entries), config=cfg)


def _default_u_probe(a, m):
    if m == 1:
        return np.linspace(-a, a, 9)
    grids = np.meshgrid(*([np.linspace(-a, a, 5)] * m), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return pts[np.linalg.norm(pts, axis=-1) <= a]
