"""Numerical verification of the geometric decay hypotheses.

The spectral statements for a curved tube require the curvatures (or, on
a surface strip, the metric coefficient) to settle to their straight-tube
values at infinity: some quantities must merely vanish, others must decay
at a power rate |s|^-(1+theta) for some theta in (0, 1].  Finite data can
never prove a limit, so the checks here use honest finite-range
semantics:

* limit-type hypotheses pass when the tail suprema decrease along a
  ladder of radii and the last one is below ``zero_tol`` relative to the
  global supremum; decreasing-but-not-small yields ``inconclusive``;
* rate-type hypotheses fit log sup_{|s|>R} |f| against -(1+theta) log R
  and pass when the fitted theta clears ``theta_min`` with a small
  residual; the reported theta is capped at 1.

Every rate fit also includes the undifferentiated quantity itself (kappa
alongside its derivatives, |h-1| alongside the h-derivatives).  That is a
deliberate strengthening of the minimal hypotheses: the certificate theta
then reflects the slowest-decaying member of the family, which keeps a
``pass`` conservative and makes the fitted exponent meaningful for
power-tail profiles.

Tail suprema are computed over one nested master sample set (suffix
maxima over |s|), so they are exactly non-increasing in R by
construction.  All checks are deterministic: identical inputs and
configuration produce byte-identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "CheckerConfig",
    "HypothesisEntry",
    "AssumptionReport",
    "default_ladder",
    "make_tail_sampler",
    "limit_entry",
    "decay_entry",
    "bounded_entry",
    "check_curvature_decay",
    "check_metric_hypotheses",
    "check_basic",
]


@dataclass(frozen=True)
class CheckerConfig:
    """Artifact parameters of the checker; reported in every output."""

    zero_tol: float = 1e-4        # limit test: last tail sup, relative to global sup
    theta_min: float = 0.05       # rate test: smallest acceptable fitted theta
    theta_cap: float = 1.0        # reported theta is clipped to (0, theta_cap]
    residual_max: float = 0.2     # rate test: largest acceptable RMS log-residual
    tail_samples: int = 2048      # log-spaced samples per tail side
    linear_samples: int = 2049    # full-range linear samples (global sup)
    min_ladder_points: int = 4
    min_ladder_span: float = 8.0  # max(R)/min(R) below this => inconclusive
    underflow_floor: float = 1e-280
    # Tail values this far below the quantity's own peak are treated as
    # numerically vanished: finite-difference quantities plateau near the
    # integration roundoff floor instead of underflowing.  Verdict-safe,
    # since a genuine power tail dropping six decades across the ladder
    # already exceeds the exponent cap.
    noise_floor_rel: float = 1e-6


@dataclass(frozen=True)
class HypothesisEntry:
    """One checked hypothesis: ladder data, optional fit, verdict."""

    identifier: str
    quantity: str
    kind: str                     # 'limit' | 'decay' | 'bounded'
    verdict: str                  # 'pass' | 'fail' | 'inconclusive'
    ladder: tuple = ()            # ((R, sup), ...)
    fitted_c: float = None
    fitted_theta: float = None
    residual: float = None
    notes: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    entries: tuple
    config: CheckerConfig

    @property
    def overall(self):
        """Conjunction of verdicts; inconclusive propagates over pass."""
        verdicts = {e.verdict for e in self.entries}
        if "fail" in verdicts:
            return "fail"
        if "inconclusive" in verdicts:
            return "inconclusive"
        return "pass"

    def entry(self, identifier):
        for e in self.entries:
            if e.identifier == identifier:
                return e
        raise KeyError(identifier)

    def render(self):
        lines = [f"overall = {self.overall}", f"config = {self.config!r}"]
        for e in self.entries:
            lines.append(
                f"[{e.identifier}] kind={e.kind} verdict={e.verdict} quantity={e.quantity}"
            )
            if e.fitted_theta is not None:
                lines.append(
                    f"  fit: C={e.fitted_c!r} theta={e.fitted_theta!r} "
                    f"residual={e.residual!r}"
                )
            for r, sup in e.ladder:
                lines.append(f"  R={r!r} sup={sup!r}")
            if e.notes:
                lines.append(f"  notes: {e.notes}")
        return "\n".join(lines) + "\n"


def default_ladder(s_range, levels=6):
    """Geometric radii s_abs/2^levels .. s_abs/2 inside the usable range.

    Six levels span a factor 32: wide enough for a stable regression while
    keeping the smallest radius out of the profile's near field.
    """
    lo, hi = float(s_range[0]), float(s_range[1])
    m = min(-lo, hi)
    if m <= 0:
        raise InputError("decay checks need an s_range straddling 0")
    return tuple(m / 2.0**j for j in range(levels, 0, -1))


class TailSampler:
    """Nested sample set over s_range with suffix-max tail suprema."""

    def __init__(self, s_range, cfg):
        lo, hi = float(s_range[0]), float(s_range[1])
        if not lo < hi:
            raise InputError("empty s_range")
        pieces = [np.linspace(lo, hi, cfg.linear_samples)]
        m = min(-lo, hi) if lo < 0 < hi else None
        if m is not None and m > 0:
            start = m * 1e-3
            pieces.append(np.geomspace(start, hi, cfg.tail_samples))
            pieces.append(-np.geomspace(start, -lo, cfg.tail_samples))
        s = np.unique(np.concatenate(pieces))
        order = np.argsort(np.abs(s), kind="stable")
        self.s_sorted = s[order]          # sorted by |s|
        self.abs_sorted = np.abs(self.s_sorted)

    def master_abscissae(self):
        return self.s_sorted

    def tail_sups(self, fn, ladder):
        """(sups over |s|>R for each R, global sup); exactly non-increasing."""
        vals = np.abs(np.asarray(fn(self.s_sorted), dtype=float))
        if vals.shape != self.s_sorted.shape:
            raise InputError("quantity function must be vectorized over s")
        suffix = np.maximum.accumulate(vals[::-1])[::-1]
        sups = []
        for r in ladder:
            i = np.searchsorted(self.abs_sorted, r, side="right")
            if i >= self.s_sorted.size:
                raise InputError(f"ladder radius {r:g} beyond the sampled range")
            sups.append(float(suffix[i]))
        return np.array(sups), float(vals.max(initial=0.0))


def make_tail_sampler(s_range, cfg=None):
    return TailSampler(s_range, cfg or CheckerConfig())


def _ladder_tuple(ladder, sups):
    return tuple((float(r), float(s)) for r, s in zip(ladder, sups))


def _ladder_shape_ok(ladder, cfg):
    ladder = tuple(float(r) for r in ladder)
    if len(ladder) < cfg.min_ladder_points:
        return False
    if min(ladder) <= 0 or max(ladder) / min(ladder) < cfg.min_ladder_span:
        return False
    return True


def bounded_entry(identifier, quantity, value, ok, notes=""):
    return HypothesisEntry(
        identifier=identifier,
        quantity=quantity,
        kind="bounded",
        verdict="pass" if ok else "fail",
        notes=notes,
    )


def limit_entry(identifier, quantity, fn, ladder, sampler, cfg):
    """Hypothesis 'f -> 0 as |s| -> inf', finite-range semantics."""
    sups, global_sup = sampler.tail_sups(fn, ladder)
    if global_sup == 0.0:
        return HypothesisEntry(
            identifier, quantity, "limit", "pass",
            ladder=_ladder_tuple(ladder, sups), notes="identically zero",
        )
    rel_last = sups[-1] / global_sup
    non_increasing = bool(np.all(np.diff(sups) <= 0.0))
    if non_increasing and rel_last < cfg.zero_tol:
        # includes tails that vanish outright, the strongest possible decay
        verdict, notes = "pass", ""
    elif non_increasing and sups[-1] < sups[0]:
        verdict = "inconclusive"
        notes = f"decreasing but last relative sup {float(rel_last)!r} >= zero_tol"
    else:
        verdict, notes = "fail", "tail suprema do not decrease below zero_tol"
    return HypothesisEntry(
        identifier, quantity, "limit", verdict,
        ladder=_ladder_tuple(ladder, sups), notes=notes,
    )


def _fit_one(identifier, name, sups, ladder, cfg, global_sup):
    """Per-quantity power fit; returns an entry (verdict for this quantity)."""
    ladder = np.asarray(ladder, dtype=float)
    sups = np.asarray(sups, dtype=float)
    floor = max(cfg.underflow_floor, cfg.noise_floor_rel * float(global_sup))
    positive = sups > floor
    if not positive.any():
        return HypothesisEntry(
            identifier, name, "decay", "pass",
            ladder=_ladder_tuple(ladder, sups),
            fitted_theta=cfg.theta_cap,
            notes="identically zero (or below floating floor)",
        )
    if positive.sum() < cfg.min_ladder_points:
        return HypothesisEntry(
            identifier, name, "decay", "pass",
            ladder=_ladder_tuple(ladder, sups),
            fitted_theta=cfg.theta_cap,
            notes="vanishes beyond the first ladder radii; faster than any power",
        )
    x = np.log(ladder[positive])
    y = np.log(sups[positive])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((slope * x + intercept - y) ** 2)))
    theta = -slope - 1.0
    ok = theta >= cfg.theta_min and resid < cfg.residual_max
    return HypothesisEntry(
        identifier, name, "decay", "pass" if ok else "fail",
        ladder=_ladder_tuple(ladder, sups),
        fitted_c=float(np.exp(intercept)),
        fitted_theta=float(min(theta, cfg.theta_cap)),
        residual=resid,
        notes="" if ok else f"uncapped theta {float(theta)!r}",
    )


def decay_entry(identifier, quantities, ladder, sampler, cfg):
    """Hypothesis 'every f in the family is O(|s|^-(1+theta))'.

    Emits one aggregate entry whose fitted theta is the minimum over the
    family; per-quantity details are folded into the notes.  A ladder that
    is too short yields ``inconclusive``, never ``pass``.
    """
    if not _ladder_shape_ok(ladder, cfg):
        agg = HypothesisEntry(
            identifier, "+".join(quantities), "decay", "inconclusive",
            notes="ladder too short: need >= "
            f"{cfg.min_ladder_points} radii spanning a factor {cfg.min_ladder_span:g}",
        )
        return agg, ()
    subs = []
    for name, fn in quantities.items():
        sups, global_sup = sampler.tail_sups(fn, ladder)
        subs.append(
            _fit_one(f"{identifier}[{name}]", name, sups, ladder, cfg, global_sup)
        )

    measured = [e for e in subs if e.fitted_theta is not None and e.fitted_c is not None]
    if measured:
        worst = min(measured, key=lambda e: e.fitted_theta)
        theta, c_fit, resid = worst.fitted_theta, worst.fitted_c, worst.residual
        ladder_data = worst.ladder
    else:
        # every member vanished identically
        theta, c_fit, resid = cfg.theta_cap, None, None
        ladder_data = subs[0].ladder if subs else ()
    verdict = "pass" if all(e.verdict == "pass" for e in subs) else "fail"
    detail = "; ".join(
        f"{e.quantity}: theta={e.fitted_theta!r}"
        + (f" ({e.notes})" if e.notes else "")
        for e in subs
    )
    agg = HypothesisEntry(
        identifier, "+".join(quantities), "decay", verdict,
        ladder=ladder_data,
        fitted_c=c_fit,
        fitted_theta=theta,
        residual=resid,
        notes=detail,
    )
    return agg, tuple(subs)


# ---------------------------------------------------------------------------
# curvature-level checks


def _max_abs_rows(arr):
    """max_alpha |arr[..., alpha]| for vector data, |arr| for scalars."""
    arr = np.asarray(arr, dtype=float)
    return np.max(np.abs(arr), axis=-1) if arr.ndim > 1 else np.abs(arr)


def check_curvature_decay(profile, ladder=None, config=None):
    """Decay hypotheses expressed directly on the curvature generator.

    Limits: the first-column entries and their second derivatives vanish.
    Bounded: the transverse sub-block and the derivative of its second
    column stay bounded.  Rate: first/third derivatives of the first
    column, the second column, its second derivative, and the two mixed
    products fit |s|^-(1+theta), together with the first column itself.
    """
    cfg = config or CheckerConfig()
    if ladder is None:
        ladder = default_ladder(profile.s_range)
    sampler = make_tail_sampler(profile.s_range, cfg)
    d = profile.dimension

    def col1(order):
        return lambda s: _max_abs_rows(profile.first_column(s, order))

    def sub_max(order):
        return lambda s: np.max(np.abs(profile.sub_block(s, order)), axis=(-2, -1))

    def col2(order):
        return lambda s: _max_abs_rows(profile.sub_block(s, order)[..., :, 0])

    def product(order_left, order_right):
        def fn(s):
            left = profile.sub_block(s, order_left)
            right = profile.sub_block(s, order_right)[..., :, 0]
            return _max_abs_rows(np.einsum("...ij,...j->...i", left, right))

        return fn

    entries = [
        limit_entry("curvature-vanishes[k1]", "max|K^1|", col1(0), ladder, sampler, cfg),
        limit_entry(
            "curvature-vanishes[k1'']", "max|d2 K^1|", col1(2), ladder, sampler, cfg
        ),
    ]

    sup_sub = float(np.max(sub_max(0)(sampler.master_abscissae()), initial=0.0))
    entries.append(
        bounded_entry(
            "curvature-bounded[K_sub]", "sup|K_sub|",
            value=sup_sub, ok=np.isfinite(sup_sub), notes=f"sup={sup_sub!r}",
        )
    )
    if d >= 3:
        sup_c2 = float(np.max(col2(1)(sampler.master_abscissae()), initial=0.0))
        entries.append(
            bounded_entry(
                "curvature-bounded[K'^2]", "sup|d K^2|",
                value=sup_c2, ok=np.isfinite(sup_c2), notes=f"sup={sup_c2!r}",
            )
        )

    quantities = {
        "k1": col1(0),
        "k1'": col1(1),
        "k1'''": col1(3),
    }
    if d >= 3:
        quantities.update(
            {
                "k2_col": col2(0),
                "k2_col''": col2(2),
                "K'K^2": product(1, 0),
                "KK'^2": product(0, 1),
            }
        )
    agg, subs = decay_entry("curvature-decay-rate", quantities, ladder, sampler, cfg)
    entries.append(agg)
    entries.extend(subs)
    return AssumptionReport(entries=tuple(entries), config=cfg)


# ---------------------------------------------------------------------------
# metric-level checks


def check_metric_hypotheses(metric, ladder=None, u_probe=None, config=None):
    """Decay hypotheses on h directly, for strips where no generator exists."""
    cfg = config or CheckerConfig()
    if ladder is None:
        ladder = default_ladder(metric.s_range)
    sampler = make_tail_sampler(metric.s_range, cfg)
    if u_probe is None:
        u_probe = _metric_u_probe(metric)

    def sup_u(fn):
        def g(s):
            s = np.asarray(s, dtype=float)
            vals = fn(s[:, None], np.broadcast_to(u_probe, (s.size,) + u_probe.shape))
            return np.max(np.abs(vals), axis=-1)

        return g

    m = metric
    entries = [
        limit_entry(
            "metric-approach-flat[h-1]", "sup_u|h-1|",
            sup_u(lambda s, u: m.h(s, u) - 1.0), ladder, sampler, cfg,
        ),
        limit_entry(
            "metric-approach-flat[h_ss]", "sup_u|h_,11|",
            sup_u(m.h_ss), ladder, sampler, cfg,
        ),
        limit_entry(
            "metric-approach-flat[grad_u^2]", "sup_u|h_,mu h_,mu|",
            sup_u(m.hu_sq), ladder, sampler, cfg,
        ),
        limit_entry(
            "metric-approach-flat[lap_u]", "sup_u|h_,mumu|",
            sup_u(m.lap_u), ladder, sampler, cfg,
        ),
    ]
    quantities = {
        "h-1": sup_u(lambda s, u: m.h(s, u) - 1.0),
        "h_s": sup_u(m.h_s),
        "h_sss": sup_u(m.h_sss),
        "grad_u^2_s": sup_u(m.hu_sq_s),
        "lap_u_s": sup_u(m.lap_u_s),
    }
    agg, subs = decay_entry("metric-decay-rate", quantities, ladder, sampler, cfg)
    entries.append(agg)
    entries.extend(subs)
    return AssumptionReport(entries=tuple(entries), config=cfg)


def _metric_u_probe(metric):
    a = metric.a
    m = metric.dimension - 1
    if m == 1:
        return np.linspace(-a, a, 9)
    grids = np.meshgrid(*([np.linspace(-a, a, 5)] * m), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    return pts[np.linalg.norm(pts, axis=-1) <= a]


# ---------------------------------------------------------------------------
# basic well-posedness


def check_basic(metric=None, profile=None, half_width=None, overlap=None,
                waive_overlap=False, config=None):
    """Tube well-posedness: curvature bound, ellipticity, self-overlap.

    Works without a metric (profile plus half-width) so the curvature
    bound can be reported even for configurations where metric
    construction itself would refuse.
    """
    cfg = config or CheckerConfig()
    entries = []
    euclidean = getattr(metric, "source", None) == "euclidean-tube"
    if euclidean or profile is not None:
        if euclidean:
            a, sup = metric.a, metric.kappa1_sup
        else:
            if half_width is None:
                raise InputError("need half_width together with a bare profile")
            a, sup = float(half_width), profile.kappa1_sup()
        product = a * sup
        entries.append(
            bounded_entry(
                "basic-curvature-bound", "a * sup|kappa_1|",
                value=product, ok=product < 1.0,
                notes=f"product={product!r} margin={1.0 - product!r}",
            )
        )
    if metric is not None:
        bounds = metric.bounds
        entries.append(
            bounded_entry(
                "basic-ellipticity", "c- <= h <= c+",
                value=(bounds.c_minus, bounds.c_plus),
                ok=bounds.c_minus > 0.0,
                notes=f"c-={bounds.c_minus!r} c+={bounds.c_plus!r}",
            )
        )
    if waive_overlap:
        entries.append(
            HypothesisEntry(
                "basic-self-overlap", "tube embedding injective", "bounded", "pass",
                notes="waived (abstract manifold: only the base curve is embedded)",
            )
        )
    elif overlap is None:
        entries.append(
            HypothesisEntry(
                "basic-self-overlap", "tube embedding injective", "bounded",
                "inconclusive", notes="not checked",
            )
        )
    else:
        ok = bool(overlap.overlap_free)
        entries.append(
            HypothesisEntry(
                "basic-self-overlap", "tube embedding injective", "bounded",
                "pass" if ok else "fail",
                notes=(
                    "sampling certificate (evidence, not proof)"
                    if ok
                    else f"{overlap.pairs.shape[0]} offending pairs, e.g. arc "
                    f"separation {float(overlap.arc_separations[0])!r}"
                ),
            )
        )
    return AssumptionReport(entries=tuple(entries), config=cfg)
