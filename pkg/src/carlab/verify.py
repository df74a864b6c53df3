"""Signed-margin verification of the inequality chain and quadratic-form tests.

Every verifier reports the minimum signed margin over a grid together with
its location; a check passes iff min_margin >= -tolerance.  Envelope mode
substitutes the worst admissible potential values, certifying an inequality
for the whole decay class at once; instance mode checks one sampled
potential.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificationError,
    ConstructionError,
    GridMismatchError,
)
from .potentials import PotentialSample
from .resolvent import BoxDiscretization, DiscreteOperator, apply_shifted
from .weights import (
    PsiSpec,
    RadialGrid,
    WeightTables,
    build_w,
    eval_g,
    eval_m,
    eval_psi,
    eval_psi_prime,
    phi_at,
    psi_inequality_margin,
)

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class MarginReport:
    name: str
    min_margin: float
    argmin: tuple | float
    grid_size: int
    tolerance: float
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tolerance

    def to_dict(self) -> dict:
        argmin = self.argmin if isinstance(self.argmin, float) else list(self.argmin)
        return {
            "name": self.name,
            "min_margin": self.min_margin,
            "argmin": argmin,
            "grid_size": self.grid_size,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _report(name, margins, locations, tolerance, **detail) -> MarginReport:
    i = int(np.argmin(margins))
    loc = locations[i]
    loc = float(loc) if np.isscalar(loc) or getattr(loc, "ndim", 1) == 0 else tuple(map(float, loc))
    return MarginReport(
        name=name,
        min_margin=float(margins[i]),
        argmin=loc,
        grid_size=int(len(margins)),
        tolerance=tolerance,
        detail=dict(detail),
    )


# ----------------------------------------------------------------------------
# profile inequality
# ----------------------------------------------------------------------------

def verify_psi_inequality(
    spec: PsiSpec,
    nodes,
    potential: PotentialSample | None = None,
    tolerance: float = DEFAULT_TOL,
) -> MarginReport:
    """Margin of psi - V - (dV - psi') w/w' + E/2 >= 0 over the nodes.

    potential=None uses the worst-case envelopes; a radial-mode sample must
    share the nodes.
    """
    if isinstance(nodes, RadialGrid):
        nodes = nodes.nodes
    r = np.asarray(nodes, dtype=float)
    if potential is None:
        margins = psi_inequality_margin(spec, r)
        kind = "envelope"
    else:
        if potential.mode != "radial":
            raise GridMismatchError("instance mode needs a radial potential sample")
        if potential.r.shape != r.shape or not np.array_equal(potential.r, r):
            raise GridMismatchError("potential sampled on a different grid")
        margins = psi_inequality_margin(
            spec, r, (potential.values, potential.radial_derivative)
        )
        kind = f"instance:{potential.name}"
    return _report(f"psi_inequality[{kind}]", margins, r, tolerance)


# ----------------------------------------------------------------------------
# effective potential
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectivePotentialTable:
    vphi: np.ndarray
    h: float
    cross_residual: float


def effective_potential(V: PotentialSample, wt: WeightTables) -> EffectivePotentialTable:
    """V_phi = V - (phi')^2 + h phi'' - h^2/(4 r^2) on the table grid.

    phi'' is substituted from the flow equation, phi'' = ((phi')^2 - psi)/h,
    so the table route and the identity route V - psi - h^2/(4 r^2) agree up
    to float association; the residual between them is reported.
    """
    if V.mode != "radial":
        raise GridMismatchError("effective_potential needs a radial potential sample")
    r = wt.grid.nodes
    if V.r.shape != r.shape or not np.array_equal(V.r, r):
        raise GridMismatchError("grid mismatch between potential and weight tables")
    h = wt.h
    phi2 = (wt.u**2 - wt.psi) / h
    pole = h * h / (4.0 * r**2)
    vphi = V.values - wt.u**2 + h * phi2 - pole
    ident = V.values - wt.psi - pole
    return EffectivePotentialTable(
        vphi=vphi, h=h, cross_residual=float(np.abs(vphi - ident).max())
    )


# ----------------------------------------------------------------------------
# E/4 lower bound on d/dr (w (E - V_phi))
# ----------------------------------------------------------------------------

def e4_margin(
    spec: PsiSpec,
    h: float,
    nodes: np.ndarray,
    potential: PotentialSample | None = None,
) -> np.ndarray:
    """Pointwise margin of the expansion identity

        d/dr(w(E - V_phi)) = (E - V + psi) w' + (-dV + psi') w + T(r)

    against (E/4) w', where T = 0 on the plateau (w' - 2w/r = 0 exactly
    there) and T = h^2 g(r) w' beyond R0.  Envelope mode substitutes
    V -> (1+r)^-delta0 and dV -> +(1+r)^-(1+delta0).
    """
    r = np.asarray(nodes, dtype=float)
    E = spec.E
    w, wp, _ = build_w(spec, r)
    if potential is None:
        rho = 1.0 + r
        V = rho ** (-spec.delta0)
        dV = rho ** (-1.0 - spec.delta0)
    else:
        V = potential.values
        dV = potential.radial_derivative
    T = np.where(r > spec.R0, h * h * eval_g(spec, np.maximum(r, spec.R0)) * wp, 0.0)
    return (
        (E - V + eval_psi(spec, r)) * wp
        + (-dV + eval_psi_prime(spec, r)) * w
        + T
        - (E / 4.0) * wp
    )


def verify_E4_inequality(
    wt: WeightTables,
    nodes=None,
    potential: PotentialSample | None = None,
    hs=None,
    tolerance: float = DEFAULT_TOL,
) -> MarginReport:
    """Minimum E/4 margin over the grid and over a set of h in (0, h1].

    hs defaults to 8 dyadic values h1 * 2^-k, k = 7..0, so h = h1 is hit
    exactly.  Any h above the admissible threshold h1 raises.
    """
    spec = wt.spec
    h1 = wt.h1
    if nodes is None:
        nodes = wt.grid.nodes
    elif isinstance(nodes, RadialGrid):
        nodes = nodes.nodes
    if hs is None:
        hs = h1 * 0.5 ** np.arange(7, -1, -1)
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    if np.any(hs > h1 * (1.0 + 1e-12)):
        raise ConstructionError(f"h exceeds h1: max h = {hs.max()}, h1 = {h1}")
    best = None
    per_h = {}
    for h in hs:
        m = e4_margin(spec, h, nodes, potential)
        i = int(np.argmin(m))
        per_h[float(h)] = float(m[i])
        if best is None or m[i] < best[0]:
            best = (float(m[i]), float(nodes[i]), float(h))
    kind = "envelope" if potential is None else f"instance:{potential.name}"
    return MarginReport(
        name=f"e4_inequality[{kind}]",
        min_margin=best[0],
        argmin=best[1],
        grid_size=int(len(nodes)),
        tolerance=tolerance,
        detail={"h_at_min": best[2], "per_h_min": per_h, "h1": h1},
    )


def verify_barrier_facts(wt: WeightTables, tolerance: float = DEFAULT_TOL) -> list:
    """Pointwise barrier facts on the full table grid:

    w' > 0; 2w/r - w' >= 0; w^2/w' + w^2 <= (1+delta) w/w';
    w/w' <= max(2/delta, R0/2) m^2.
    """
    spec = wt.spec
    r = wt.grid.nodes
    w, wp = wt.w, wt.wprime
    reports = [
        _report("barrier:wprime_positive", wp, r, 0.0),
        _report("barrier:2w_over_r_minus_wprime", 2.0 * w / r - wp, r, tolerance),
        _report(
            "barrier:one_plus_delta_cap",
            (1.0 + spec.delta) * w / wp - (w**2 / wp + w**2),
            r,
            tolerance,
        ),
        _report(
            "barrier:w_over_wprime_vs_m2",
            max(2.0 / spec.delta, spec.R0 / 2.0) * wt.m**2 - w / wp,
            r,
            tolerance,
        ),
    ]
    return reports


# ----------------------------------------------------------------------------
# origin shift and gluing
# ----------------------------------------------------------------------------

def shift_radius_bound(delta0: float) -> float:
    """Largest admissible shift 2^(1/(1+delta0)) - 1."""
    return 2.0 ** (1.0 / (1.0 + delta0)) - 1.0


def verify_shift_envelope(
    x0,
    delta0: float,
    disc: BoxDiscretization,
    tolerance: float = DEFAULT_TOL,
) -> MarginReport:
    """Check ((1+|x|)/(1+|x-x0|))^p <= 2 for p in {delta0, 1+delta0} on the
    grid; this is what keeps the shifted potential inside the decay class."""
    x0 = np.asarray(x0, dtype=float)
    r0 = float(np.hypot(*x0))
    bound = shift_radius_bound(delta0)
    # one-ulp slack so points constructed on the admissible circle pass
    if r0 > bound * (1.0 + 4.0 * np.finfo(float).eps):
        raise ConstructionError(
            f"x0 too large: |x0| = {r0:.6g} exceeds 2^(1/(1+delta0)) - 1 = {bound:.6g}"
        )
    X, Y = disc.mesh()
    rx = np.hypot(X, Y).ravel()
    rs = np.hypot(X - x0[0], Y - x0[1]).ravel()
    ratio = (1.0 + rx) / (1.0 + rs)
    margins = np.minimum(2.0 - ratio ** (1.0 + delta0), 2.0 - ratio**delta0)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return _report("shift_envelope", margins, pts, tolerance, x0=list(map(float, x0)))


@dataclass(frozen=True)
class GluingConstants:
    K: float
    R: float
    k_weight_floor: float   # sup m^-2 / (w' + w'(|.-x0|))
    k_weight_cap: float     # sup (m^2 + m(|.-x0|)^2) / m^2
    edge_floor: float
    edge_cap: float


def gluing_constants(wt: WeightTables, x0, disc: BoxDiscretization) -> GluingConstants:
    """Constants of the two-center gluing step.

    K bounds m^-2 <= K (w' + w'(|.-x0|)) and m^2 + m(|.-x0|)^2 <= K m^2
    pointwise (first powers of w' in the floor ratio: these are the forms
    the added estimates consume, and the only ones with finite suprema on
    unbounded domains; both ratios tend to 1/(2 delta) and 2).  R is the
    radius beyond which both phases are flat: R = R1 + |x0| by the support
    of phi'.  The grid maximum is certified against the decreasing edge
    envelope; if the edge value exceeds the interior maximum the grid is too
    small.
    """
    x0 = np.asarray(x0, dtype=float)
    r0 = float(np.hypot(*x0))
    if r0 <= 0.0:
        raise ConstructionError("gluing needs a nonzero shift x0")
    spec = wt.spec
    X, Y = disc.mesh()
    rx = np.hypot(X, Y).ravel()
    rs = np.hypot(X - x0[0], Y - x0[1]).ravel()
    _, wp_x, _ = build_w(spec, rx)
    _, wp_s, _ = build_w(spec, rs)
    m2 = eval_m(spec.delta, rx) ** 2
    m2_s = eval_m(spec.delta, rs) ** 2
    floor = (1.0 / m2) / (wp_x + wp_s)
    cap = (m2 + m2_s) / m2
    k_floor = float(floor.max())
    k_cap = float(cap.max())
    # edge envelope: beyond the farthest node both ratios are decreasing in
    # |x|; bound w'(|x - x0|) >= w'(|x| + |x0|) by monotonicity of w'
    r_edge = float(rx.max())
    _, wp_e, _ = build_w(spec, r_edge)
    _, wp_es, _ = build_w(spec, r_edge + r0)
    edge_floor = float((1.0 / eval_m(spec.delta, r_edge) ** 2) / (wp_e + wp_es))
    edge_cap = float(1.0 + (eval_m(spec.delta, r_edge + r0) / eval_m(spec.delta, r_edge)) ** 2)
    if edge_floor > k_floor or edge_cap > k_cap:
        raise CertificationError(
            "tail not certified: edge envelope exceeds interior max "
            f"(floor {edge_floor:.4g} vs {k_floor:.4g}, cap {edge_cap:.4g} vs {k_cap:.4g})"
        )
    return GluingConstants(
        K=max(k_floor, k_cap),
        R=spec.R1 + r0,
        k_weight_floor=k_floor,
        k_weight_cap=k_cap,
        edge_floor=edge_floor,
        edge_cap=edge_cap,
    )


# ----------------------------------------------------------------------------
# quadratic-form tests
# ----------------------------------------------------------------------------

BOUNDARY_MARGIN_CELLS = 3


@dataclass(frozen=True)
class QuadFormResult:
    lhs: float
    rhs1: float
    rhs2: float
    implied_c: float


def _check_support(v2d: np.ndarray, name: str):
    k = BOUNDARY_MARGIN_CELLS
    edge = np.concatenate([
        v2d[:k, :].ravel(), v2d[-k:, :].ravel(), v2d[:, :k].ravel(), v2d[:, -k:].ravel()
    ])
    if np.any(edge != 0.0):
        raise ConstructionError(f"support touches boundary in {name}")


def _check_box_for_weights(disc: BoxDiscretization, wt: WeightTables):
    # the box must reach past the flat region of phi for the indicator split
    need = 2.0 * (wt.spec.R1 + 1.0)
    if disc.L < need * (1.0 - 1e-12):
        raise ConstructionError(
            f"box half-width {disc.L:.4g} below 2 (R1 + 1) = {need:.4g}"
        )


def carleman_quadratic_form_test(
    v: np.ndarray,
    wt: WeightTables,
    op: DiscreteOperator,
    eps: float = 0.0,
) -> QuadFormResult:
    """Evaluate both sides of the exponential-weight estimate on one sample.

    lhs  = sum w'(|x|) e^(2 phi/h) |v|^2 da
    rhs1 = sum m(|x|)^2 e^(2 phi/h) |(P - i eps) v|^2 da
    rhs2 = sum e^(2 phi/h) |v|^2 da
    implied_c = lhs / (rhs1/h^2 + eps rhs2/h); 0 when v = 0.
    """
    if eps < 0.0:
        raise ConstructionError(f"eps must be nonnegative, got {eps}")
    disc = op.disc
    _check_box_for_weights(disc, wt)
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != disc.size:
        raise GridMismatchError("test function does not match the grid")
    _check_support(v.reshape(disc.n, disc.n), "quadratic form test")
    r = disc.radii()
    h = op.h
    da = disc.cell_area()
    expw = np.exp(2.0 * phi_at(wt, r) / h)
    _, wp, _ = build_w(wt.spec, r)
    m2 = eval_m(wt.spec.delta, r) ** 2
    pv = apply_shifted(op, eps, v)
    lhs = float(np.sum(wp * expw * np.abs(v) ** 2) * da)
    rhs1 = float(np.sum(m2 * expw * np.abs(pv) ** 2) * da)
    rhs2 = float(np.sum(expw * np.abs(v) ** 2) * da)
    denom = rhs1 / h**2 + eps * rhs2 / h
    implied_c = lhs / denom if denom > 0.0 else 0.0
    return QuadFormResult(lhs=lhs, rhs1=rhs1, rhs2=rhs2, implied_c=implied_c)


@dataclass(frozen=True)
class CombinedResult:
    lhs_interior: float
    lhs_exterior: float
    rhs1: float
    rhs2: float
    implied_c: float


def combined_estimate_test(
    v: np.ndarray,
    wt: WeightTables,
    op: DiscreteOperator,
    x0,
    eps: float,
) -> CombinedResult:
    """Evaluate the glued two-center estimate

        e^(-C0/h) |m^-1 1_{<=R} v|^2 + |m^-1 1_{>=R} v|^2
            <= C (1/h^2 |m (P - i eps) v|^2 + eps/h |v|^2)

    with C0 = 2 max phi and R = R1 + |x0|, reporting the smallest C that
    makes it hold for this v.  The proof renormalizes to eps <= h, which is
    enforced as a precondition.
    """
    h = op.h
    if eps > h:
        raise ConstructionError(f"combined estimate needs eps <= h, got eps = {eps}, h = {h}")
    if eps < 0.0:
        raise ConstructionError(f"eps must be nonnegative, got {eps}")
    x0 = np.asarray(x0, dtype=float)
    disc = op.disc
    _check_box_for_weights(disc, wt)
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != disc.size:
        raise GridMismatchError("test function does not match the grid")
    _check_support(v.reshape(disc.n, disc.n), "combined estimate test")
    R = wt.spec.R1 + float(np.hypot(*x0))
    r = disc.radii()
    da = disc.cell_area()
    m2 = eval_m(wt.spec.delta, r) ** 2
    inv_m2 = 1.0 / m2
    av2 = np.abs(v) ** 2
    pv2 = np.abs(apply_shifted(op, eps, v)) ** 2
    lhs_i = math.exp(-wt.C0 / h) * float(np.sum(inv_m2 * av2 * (r <= R)) * da)
    lhs_e = float(np.sum(inv_m2 * av2 * (r >= R)) * da)
    rhs1 = float(np.sum(m2 * pv2) * da)
    rhs2 = float(np.sum(av2) * da)
    denom = rhs1 / h**2 + eps * rhs2 / h
    implied_c = (lhs_i + lhs_e) / denom if denom > 0.0 else 0.0
    return CombinedResult(
        lhs_interior=lhs_i, lhs_exterior=lhs_e, rhs1=rhs1, rhs2=rhs2, implied_c=implied_c
    )


# ----------------------------------------------------------------------------
# discrete test functions
# ----------------------------------------------------------------------------

def bump(disc: BoxDiscretization, center, radius: float, amplitude: float = 1.0) -> np.ndarray:
    """Compactly supported mollifier exp(1 - 1/(1 - t^2)) on t = |x - c|/radius.

    Vanishes identically outside the disk, so the boundary-margin check is
    exact, not a numerical cutoff.
    """
    cx, cy = float(center[0]), float(center[1])
    k = BOUNDARY_MARGIN_CELLS + 1
    inner = disc.L - k * disc.a
    if np.hypot(cx, cy) + radius > inner:
        raise ConstructionError(
            f"bump support [{radius:.3g} around ({cx:.3g},{cy:.3g})] leaves the "
            f"safe region |x| <= {inner:.3g}"
        )
    X, Y = disc.mesh()
    t2 = ((X - cx) ** 2 + (Y - cy) ** 2) / radius**2
    out = np.zeros_like(X)
    mask = t2 < 1.0
    out[mask] = amplitude * np.exp(1.0 - 1.0 / (1.0 - t2[mask]))
    return out.ravel()


def bump_ensemble(disc: BoxDiscretization, count: int, rng, r_outer: float) -> list:
    """Seeded ensemble of random bumps inside |x| <= r_outer."""
    out = []
    k = BOUNDARY_MARGIN_CELLS + 1
    inner = min(r_outer, disc.L - k * disc.a)
    for _ in range(count):
        radius = rng.uniform(0.15, 0.45) * inner
        rc = rng.uniform(0.0, inner - radius)
        th = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 2.0)
        out.append(bump(disc, (rc * np.cos(th), rc * np.sin(th)), radius, amp))
    return out
