"""Frobenius lifts, comparison gauges, invariant paths, and the associator.

The computational scheme, in the pinned conventions of `connection`:

* A lift phi on a chart (valid off some marked discs) admits a comparison
  gauge M, a noncommutative series over rigid functions with M(anchor) = 1
  solving

      dM = (phi^* Omega) M - M (p Omega),        Omega = sum_i nu_i e_i,

  weight by weight: each weight is a residue-free rigid 1-form built from
  lower weights, integrated by `rigid_primitive` and normalized at the
  anchor tangential point.

* The invariant path G(y) = gamma_{y, anchor}(1) then solves the contraction
  equation  T(phi(y) <- y) * G(y) = M(y) * sigma_p(G(y)), where sigma_p
  scales each letter by p and T is the in-disc transport between y and
  phi(y).  Weight w of G appears through the unit 1 - p^w, so the triangular
  solve is exact.

* The associator composes the two standard chart paths at a good waypoint;
  for p = 2 (whose projective line has no good F_p-point) a single lift
  valid at both finite marked points reaches the far tangential base point
  directly.  Both routes are exposed; they agree and are cross-checked.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .connection import (
    INF,
    Chart,
    DivisorConfig,
    FibreFunctorSpec,
    good_disc_solution,
    local_fundamental_solution,
    marked_chart,
    mzv_config,
    reduction,
    scaled_chart,
)
from .errors import (
    GaugeResidualTooLarge,
    LiftConditionViolated,
    OutOfRegion,
    PrecisionExhausted,
    ResidualTooLarge,
    WeightExceedsTruncation,
)
from .freealg import EMPTY, NcSeries, all_words, is_group_like, nc_inverse, sigma_p, word_str
from .padic import PAdic, Zp, dp_ideal_valuation, ilog_p
from .rigid import (
    RigidDomain,
    RigidFunction,
    rigid_log_unit,
    rigid_primitive,
)

# ---------------------------------------------------------------------------
# exact polynomial / rational-function helpers (Fraction coefficients)
# ---------------------------------------------------------------------------


def poly_trim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_add(a, b):
    n = max(len(a), len(b))
    return poly_trim(
        [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]
    )


def poly_scale(a, c):
    return poly_trim([c * x for x in a])


def poly_sub(a, b):
    return poly_add(a, poly_scale(b, -1))


def poly_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return poly_trim(out)


def poly_pow(a, k):
    out = [Fraction(1)]
    for _ in range(k):
        out = poly_mul(out, a)
    return out


def poly_eval(a, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def poly_deriv(a):
    return poly_trim([a[n] * n for n in range(1, len(a))])


def poly_shift(a, b: Fraction):
    """Coefficients of P(v + b) given those of P(u), by Horner in (v + b)."""
    out = []
    for c in reversed(a):
        out = poly_add(poly_mul(out, [b, Fraction(1)]), [Fraction(c)])
    return out


@dataclass(frozen=True)
class RationalFn:
    """num/den with Fraction-coefficient polynomials."""

    num: tuple
    den: tuple

    @staticmethod
    def make(num, den=(Fraction(1),)):
        return RationalFn(tuple(poly_trim(list(num))), tuple(poly_trim(list(den))))

    def mul(self, other: "RationalFn") -> "RationalFn":
        return RationalFn.make(poly_mul(list(self.num), list(other.num)),
                               poly_mul(list(self.den), list(other.den)))

    def add(self, other: "RationalFn") -> "RationalFn":
        n = poly_add(
            poly_mul(list(self.num), list(other.den)),
            poly_mul(list(other.num), list(self.den)),
        )
        return RationalFn.make(n, poly_mul(list(self.den), list(other.den)))

    def scale(self, c) -> "RationalFn":
        return RationalFn.make(poly_scale(list(self.num), Fraction(c)), list(self.den))

    def derivative(self) -> "RationalFn":
        n = poly_sub(
            poly_mul(poly_deriv(list(self.num)), list(self.den)),
            poly_mul(list(self.num), poly_deriv(list(self.den))),
        )
        return RationalFn.make(n, poly_mul(list(self.den), list(self.den)))

    def dlog(self) -> "RationalFn":
        n = poly_sub(
            poly_mul(poly_deriv(list(self.num)), list(self.den)),
            poly_mul(list(self.num), poly_deriv(list(self.den))),
        )
        return RationalFn.make(n, poly_mul(list(self.num), list(self.den)))

    def equals(self, other: "RationalFn") -> bool:
        return not poly_sub(
            poly_mul(list(self.num), list(other.den)),
            poly_mul(list(other.num), list(self.den)),
        )

    def eval(self, x: Fraction) -> Fraction:
        return poly_eval(list(self.num), x) / poly_eval(list(self.den), x)


# ---------------------------------------------------------------------------
# Frobenius lifts
# ---------------------------------------------------------------------------


class FrobeniusLift:
    """A Frobenius lift presented in a chart coordinate u.

    kind "monomial": phi*(u) = c u^p, the standard lift fixing the anchor
    disc (c = xi^(p+1) makes the anchor eta-correction trivial for the
    declared tangent sign xi).  kind "dual": u^p / (u^p + (1-u)^p) in a
    coordinate sending two finite marked points to 0 and 1; it satisfies
    the lift condition at both.
    """

    def __init__(self, config: DivisorConfig, chart: Chart, kind: str, c: Fraction = Fraction(1)):
        self.config = config
        self.chart = chart
        self.kind = kind
        self.c = Fraction(c)
        p = config.p
        if kind == "monomial":
            self.num = [Fraction(0)] * p + [self.c]
            self.den = [Fraction(1)]
            self.valid_points = self._monomial_valid()
        elif kind == "dual":
            d = poly_add(
                [Fraction(0)] * p + [Fraction(1)], poly_pow([Fraction(1), Fraction(-1)], p)
            )
            self.num = [Fraction(0)] * p + [Fraction(1)]
            self.den = d
            self.valid_points = self._dual_valid()
        else:
            raise ValueError(f"unknown lift kind {kind}")
        self.validate()

    def _monomial_valid(self):
        out = [self.chart.anchor]
        if self.config.points[0] is INF:
            out.append(0)
        return out

    def _dual_valid(self):
        locs = self.chart.locations()
        return [j for j, b in locs.items() if b in (0, 1)]

    # -- exact data ------------------------------------------------------------

    def rational(self) -> RationalFn:
        return RationalFn.make(self.num, self.den)

    def apply_u(self, u: Fraction) -> Fraction:
        return poly_eval(self.num, u) / poly_eval(self.den, u)

    def apply_u_padic(self, u: PAdic, ctx: Zp) -> PAdic:
        num = _poly_eval_padic(self.num, u, ctx)
        den = _poly_eval_padic(self.den, u, ctx)
        return num / den

    def cofactor_at(self, j: int) -> Fraction:
        """Unit f with phi*(v) = f * v^p + O(v^{p+1}) at marked point j (chart coords)."""
        b = self.chart.locations()[j]
        p = self.config.p
        q = poly_sub(self.num, poly_scale(self.den, b))
        s = poly_shift(q, b)
        if any(s[t] != 0 for t in range(min(p, len(s)))):
            raise LiftConditionViolated(f"phi - a_{j} does not vanish to order {p}")
        if len(s) <= p or s[p] == 0:
            raise LiftConditionViolated(f"phi - a_{j} vanishes beyond order {p}")
        den_at_b = poly_eval(self.den, b)
        f = s[p] / den_at_b
        if f.numerator % p == 0 or f.denominator % p == 0:
            raise LiftConditionViolated(f"cofactor at point {j} is not a p-unit: {f}")
        return f

    def validate(self) -> None:
        """Order-p vanishing with unit cofactor at each claimed point, and
        reduction phi = u^p mod p."""
        p = self.config.p
        for j in self.valid_points:
            if self.config.points[j] is INF:
                self._validate_at_infinity()
            else:
                self.cofactor_at(j)
        # reduction check: num - u^p * den = 0 mod p
        diff = poly_sub(self.num, poly_mul([Fraction(0)] * p + [Fraction(1)], self.den))
        for c in diff:
            if c == 0:
                continue
            if c.denominator % p == 0 or c.numerator % p != 0:
                raise LiftConditionViolated("lift does not reduce to u -> u^p")

    def _validate_at_infinity(self) -> None:
        """1/phi(1/w) must vanish to order exactly p at w = 0 with unit cofactor."""
        p = self.config.p
        num_rev = list(reversed(self.num))
        den_rev = list(reversed(self.den))
        # phi(1/w) = (num_rev / den_rev) * w^(deg den - deg num); invert:
        shift = len(self.num) - len(self.den)
        if shift != p:
            raise LiftConditionViolated("wrong pole order at infinity")
        lead = num_rev[0] if num_rev else Fraction(0)
        if lead == 0 or lead.numerator % p == 0 or lead.denominator % p == 0:
            raise LiftConditionViolated("cofactor at infinity is not a p-unit")

    def __repr__(self):
        return f"FrobeniusLift({self.kind}, anchor={self.chart.anchor}, c={self.c})"


def standard_lift(config: DivisorConfig, anchor: int, xi_sign: int) -> FrobeniusLift:
    """phi*(u) = c u^p at the spec chart of a finite marked point.

    c = xi_sign^(p+1) makes lambda = 1 for the tangent vector of sign
    xi_sign; for the two-chart associator this is t -> t^p at the A end and
    t -> 1 - (1-t)^p at the B end.
    """
    c = Fraction(xi_sign) ** (config.p + 1)
    return FrobeniusLift(config, marked_chart(config, anchor), "monomial", c)


def dual_lift(config: DivisorConfig, i: int, j: int) -> FrobeniusLift:
    """The lift u^p/(u^p + (1-u)^p) in the coordinate sending a_i, a_j to 0, 1.

    Valid at both finite marked points; used when no good waypoint exists
    (p = 2) and as an independent cross-check route.
    """
    return FrobeniusLift(config, scaled_chart(config, i, j), "dual")


def _poly_eval_padic(coeffs, u: PAdic, ctx: Zp) -> PAdic:
    acc = ctx.zero()
    for c in reversed(coeffs):
        acc = acc * u + ctx.frac(c)
    return acc


def tangential_frobenius_scale(config: DivisorConfig, lift: FrobeniusLift, marked: int, xi):
    """(phi_T(xi), lambda) for a tangent scalar xi on the spec chart at a_marked.

    phi_T(xi) = xi^p * f with f the lift's unit cofactor read in the spec
    chart; lambda = xi / phi_T(xi) measures the eta-correction
    exp(log(lambda) * Res), which is the identity exactly when lambda = 1.
    """
    xi = Fraction(xi)
    if xi == 0:
        raise ValueError("tangent scalar must be nonzero")
    p = config.p
    f_chart = lift.cofactor_at(marked)
    scale = lift.chart.scale
    f_spec = f_chart * scale ** (1 - p)
    phi_t = xi**p * f_spec
    lam = xi / phi_t
    return phi_t, lam


# ---------------------------------------------------------------------------
# gauge kernels on a rigid domain
# ---------------------------------------------------------------------------


class GaugeKernel:
    """A 1-form sum coeff_k du/(u - b_k) + regular * du on a RigidDomain."""

    __slots__ = ("simple", "regular")

    def __init__(self, simple, regular: RigidFunction | None):
        self.simple = simple  # list[(int coeff, key)]
        self.regular = regular

    def apply(self, g: RigidFunction) -> RigidFunction:
        out = None
        for coeff, key in self.simple:
            t = g.div_linear(key).mul_int(coeff)
            out = t if out is None else out + t
        if self.regular is not None and not self.regular.is_zero():
            t = self.regular * g
            out = t if out is None else out + t
        if out is None:
            out = RigidFunction.zero(g.dom)
        return out


def _pole_reciprocal_monomial(dom: RigidDomain, key, c: Fraction, b: Fraction, depth: int):
    """(c u^p - b)^{-1} as a pure pole tail at the marked point over b.

    Writes c(v+b)^p - b = c v^p (1 + w(v)) with w supported in negative
    powers and p-divisible coefficients, then expands (1 + w)^{-1}.
    """
    ctx = dom.ctx
    p = ctx.p
    from math import comb

    g0 = c * b**p - b
    omega = [ctx.zero()] * p  # coefficient of v^{-(p-t)} at index p-t-1
    coeffs = {0: g0 / c}
    for t in range(1, p):
        coeffs[t] = Fraction(comb(p, t)) * b ** (p - t)
    for t, val in coeffs.items():
        q = ctx.frac(val)
        if not q.is_exact_zero:
            assert q.valuation() >= 1, "monomial lift structure violated"
        omega[p - t - 1] = q
    w = RigidFunction.from_tail(dom, key, omega)
    inv = RigidFunction.constant(dom, ctx.one())
    power = RigidFunction.constant(dom, ctx.one())
    for _ in range(depth):
        power = power * (-w)
        if power.is_zero():
            break
        inv = inv + power
    const = inv.ps[0] if inv.ps else ctx.zero()
    # multiply by v^{-p}: shift tail orders and send the constant to order p
    lst = inv.tails.get(key, [])
    eps = inv.eps
    new = [ctx.zero()] * min(max(p, len(lst) + p), dom.P)
    for m, coef in enumerate(lst, start=1):
        if m + p <= dom.P:
            new[m + p - 1] = coef
        elif not coef.is_exact_zero:
            drop = coef.valuation_lower_bound()
            eps = drop if eps is None else min(eps, drop)
    new[p - 1] = new[p - 1] + const
    out = RigidFunction(dom, [], {key: new}, eps)
    return out.mul_padic(ctx.frac(Fraction(1) / c))


def plain_kernels(dom: RigidDomain, config: DivisorConfig, chart: Chart) -> dict:
    """nu_i as GaugeKernels in chart coordinates (keys = marked indices)."""
    out = {}
    for i in range(1, config.s + 1):
        simple = []
        for cfrac, j in config.kernel_poles[i]:
            simple.append((int(cfrac), j))
        out[i] = GaugeKernel(simple, None)
    return out


def pullback_kernels(dom: RigidDomain, config: DivisorConfig, lift: FrobeniusLift) -> dict:
    """phi*(nu_i) as GaugeKernels; poles over excluded discs become tails."""
    ctx = dom.ctx
    p = config.p
    locs = lift.chart.locations()
    out = {}
    if lift.kind == "dual":
        dpoly = lift.den
        d_ps = [ctx.frac(c) for c in dpoly]
        dprime = [ctx.frac(c) for c in poly_deriv(dpoly)]
        dinv = _ps_inverse_unit(dom, d_ps)
        dlog_d = RigidFunction.from_ps(dom, dprime, None) * dinv
    for i in range(1, config.s + 1):
        simple = []
        regular = None
        for cfrac, j in config.kernel_poles[i]:
            sign = int(cfrac)
            b = locs[j]
            if lift.kind == "monomial":
                if j == lift.chart.anchor:
                    simple.append((sign * p, j))
                else:
                    recip = _pole_reciprocal_monomial(dom, j, lift.c, b, dom.eps_target + 2)
                    mono = [ctx.zero()] * (p - 1) + [ctx.one()]
                    term = (RigidFunction.from_ps(dom, mono) * recip).mul_padic(
                        ctx.frac(Fraction(sign * p) * lift.c)
                    )
                    regular = term if regular is None else regular + term
            else:  # dual
                if j not in lift.valid_points:
                    raise OutOfRegion("dual lift pulled back at an invalid point")
                simple.append((sign * p, j))
                term = dlog_d.mul_int(-sign)
                regular = term if regular is None else regular + term
        out[i] = GaugeKernel(simple, regular)
    return out


def _ps_inverse_unit(dom: RigidDomain, ps: list) -> RigidFunction:
    """1/f for a power series with unit constant term and v >= 1 tail."""
    ctx = dom.ctx
    a0 = ps[0]
    a0i = a0.inv()
    out = [ctx.zero()] * (dom.T + 1)
    out[0] = a0i
    for n in range(1, dom.T + 1):
        acc = None
        for k in range(1, min(n, len(ps) - 1) + 1):
            t = ps[k] * out[n - k]
            acc = t if acc is None else acc + t
        out[n] = ctx.zero() if acc is None else -(a0i * acc)
    return RigidFunction.from_ps(dom, out, None)


# ---------------------------------------------------------------------------
# correction forms
# ---------------------------------------------------------------------------


def correction_unit_rational(config: DivisorConfig, lift: FrobeniusLift, i: int) -> RationalFn:
    """The exact rational unit q_i with dlog q_i = phi*(nu_i) - p nu_i.

    q_i = prod over poles (sign, j) of [(phi(u) - b_j)/(u - b_j)^p]^sign.
    """
    p = config.p
    locs = lift.chart.locations()
    q = RationalFn.make([Fraction(1)])
    for cfrac, j in config.kernel_poles[i]:
        sign = int(cfrac)
        b = locs[j]
        top = RationalFn.make(
            poly_sub(lift.num, poly_scale(lift.den, b)), lift.den
        )
        bottom = RationalFn.make(poly_pow([-b, Fraction(1)], p))
        factor = top.mul(RationalFn.make(bottom.den, bottom.num))
        if sign == 1:
            q = q.mul(factor)
        else:
            q = q.mul(RationalFn.make(factor.den, factor.num))
    return q


def correction_identity_ok(config: DivisorConfig, lift: FrobeniusLift, i: int) -> bool:
    """Exact rational check dlog(q_i) = phi*(nu_i) - p*nu_i."""
    p = config.p
    locs = lift.chart.locations()
    q = correction_unit_rational(config, lift, i)
    lhs = q.dlog()
    phi = lift.rational()
    phi_prime = phi.derivative()
    rhs = RationalFn.make([Fraction(0)])
    for cfrac, j in config.kernel_poles[i]:
        sign = int(cfrac)
        b = locs[j]
        # phi*(du/(u-b)) = phi'(u) du / (phi(u) - b)
        denom = RationalFn.make(
            poly_sub(list(phi.num), poly_scale(list(phi.den), b)), list(phi.den)
        )
        pulled = phi_prime.mul(RationalFn.make(denom.den, denom.num))
        plain = RationalFn.make([Fraction(1)], [-b, Fraction(1)])
        rhs = rhs.add(pulled.scale(sign)).add(plain.scale(-sign * p))
    return lhs.equals(rhs)


def correction_form(dom: RigidDomain, config: DivisorConfig, lift: FrobeniusLift, i: int):
    """(q_i, h_i): h_i = log q_i with dh_i = phi*(nu_i) - p nu_i, h_i(anchor) = 0.

    Returns (None, 0) when the lift scales nu_i exactly by p.
    """
    ctx = dom.ctx
    p = config.p
    locs = lift.chart.locations()
    q: RigidFunction | None = None

    def mulq(f: RigidFunction):
        nonlocal q
        q = f if q is None else q * f

    exact = True
    for cfrac, j in config.kernel_poles[i]:
        sign = int(cfrac)
        b = locs[j]
        if lift.kind == "monomial" and j == lift.chart.anchor:
            # (c u^p / u^p)^sign = c^sign, a torsion constant: log = 0
            mulq(RigidFunction.constant(dom, ctx.frac(lift.c**sign)))
            continue
        exact = False
        if lift.kind == "monomial":
            recip = _pole_reciprocal_monomial(dom, j, lift.c, b, dom.eps_target + 2)
            from math import comb

            mono = [
                ctx.frac(Fraction(comb(p, t)) * (-b) ** (p - t)) for t in range(0, p + 1)
            ]  # (u - b)^p
            if sign == -1:
                mulq(RigidFunction.from_ps(dom, mono) * recip)
            else:
                # (c u^p - b) * (u - b)^{-p}
                cu = [ctx.zero()] * p + [ctx.frac(lift.c)]
                cu[0] = ctx.frac(-b)
                pole_p = [ctx.zero()] * p
                pole_p[p - 1] = ctx.one()
                mulq(RigidFunction.from_ps(dom, cu) * RigidFunction.from_tail(dom, j, pole_p))
        else:  # dual
            dps = [ctx.frac(c) for c in lift.den]
            if b == 0:
                base = _ps_inverse_unit(dom, dps)  # phi/u^p = 1/D
            else:  # b == 1
                base = _ps_inverse_unit(dom, dps).mul_int((-1) ** (p + 1))
            if sign == 1:
                mulq(base)
            else:
                if b == 0:
                    mulq(RigidFunction.from_ps(dom, dps))
                else:
                    mulq(RigidFunction.from_ps(dom, dps).mul_int((-1) ** (p + 1)))
    if exact:
        return None, RigidFunction.zero(dom)
    h = rigid_log_unit(q, dom.eps_target)
    h = h - RigidFunction.constant(dom, h.value_at_anchor())
    return q, h


# ---------------------------------------------------------------------------
# the gauge
# ---------------------------------------------------------------------------


@dataclass
class FrobeniusGauge:
    config: DivisorConfig
    lift: FrobeniusLift
    dom: RigidDomain
    anchor: FibreFunctorSpec
    N: int
    M: dict = field(default_factory=dict)

    def entry(self, w) -> RigidFunction:
        return self.M[w]


def solve_gauge(
    ctx: Zp,
    config: DivisorConfig,
    lift: FrobeniusLift,
    anchor: FibreFunctorSpec,
    N: int,
    dom: RigidDomain,
    audit: bool = True,
) -> FrobeniusGauge:
    """Weight-by-weight solve of dM = (phi*Omega) M - M (p Omega), M(0) = 1."""
    if anchor.kind != "tangential" or anchor.marked != lift.chart.anchor:
        raise ValueError("gauge must be anchored at the lift chart's tangential point")
    _, lam = tangential_frobenius_scale(config, lift, anchor.marked, anchor.xi)
    if lam != 1:
        raise LiftConditionViolated(
            f"gauge anchor requires a standard tangent scalar (lambda = {lam}, not 1)"
        )
    plain = plain_kernels(dom, config, lift.chart)
    pulled = pullback_kernels(dom, config, lift)
    gauge = FrobeniusGauge(config, lift, dom, anchor, N)
    gauge.M[EMPTY] = RigidFunction.constant(dom, ctx.one())
    for weight in range(1, N + 1):
        for w in itertools.product(range(1, config.s + 1), repeat=weight):
            f = pulled[w[0]].apply(gauge.M[w[1:]])
            f = f + plain[w[-1]].apply(gauge.M[w[:-1]]).mul_int(-config.p)
            m_w = rigid_primitive(f, res_floor=dom.eps_target, anchored=True)
            gauge.M[w] = m_w
            if audit:
                resid = m_w.derivative() - f
                # value at anchor was adjusted by a constant; derivative unaffected
                if not resid.is_small(dom.eps_target):
                    raise GaugeResidualTooLarge(f"gauge residual at word {word_str(w)}")
    return gauge


def gauge_domain(ctx: Zp, config: DivisorConfig, lift: FrobeniusLift, params) -> RigidDomain:
    locs = lift.chart.locations()
    centers = {j: ctx.frac(b) for j, b in locs.items()}
    interior = [j for j in locs if j in lift.valid_points]
    excluded = [j for j in locs if j not in lift.valid_points]
    T = params.T_mid if lift.kind == "dual" else params.T_chart
    return RigidDomain(
        ctx,
        f"{lift.kind}@{lift.chart.anchor}",
        centers,
        interior,
        excluded,
        T,
        params.P,
        params.eps_target,
    )


def gauge_lattice_margins(gauge: FrobeniusGauge, z: PAdic) -> dict:
    """v(M_w(z)) - (dp(|w|) - |w|) per word; nonnegative by the lattice bound."""
    out = {}
    p = gauge.config.p
    for w, f in gauge.M.items():
        if not w:
            continue
        val = f.value_at(z)
        bound = dp_ideal_valuation(len(w), p) - len(w)
        if val.is_zero_to_precision():
            out[w] = (val.N if val.is_big_oh else None, bound, "zero")
        else:
            out[w] = (val.valuation(), bound, "ok" if val.valuation() >= bound else "VIOLATION")
    return out


# ---------------------------------------------------------------------------
# invariant paths
# ---------------------------------------------------------------------------


def _target_in_region(gauge: FrobeniusGauge, target: FibreFunctorSpec):
    config = gauge.config
    red = target.disc(config)
    if red is INF:
        raise OutOfRegion("the infinite disc lies outside every gauge region")
    hit = config.marked_index_of_reduction(red)
    if hit is not None and hit not in gauge.lift.valid_points:
        raise OutOfRegion(f"target disc {hit} is excluded from the gauge region")
    return hit


def invariant_path_in_chart(
    ctx: Zp,
    gauge: FrobeniusGauge,
    target: FibreFunctorSpec,
    branch=0,
    tiny_T: int | None = None,
    audit: bool = True,
) -> NcSeries:
    """gamma_{target, anchor}(1) from the contraction functional equation."""
    config = gauge.config
    N = gauge.N
    p = config.p
    target.validate(config)
    hit = _target_in_region(gauge, target)
    chart = gauge.lift.chart
    # gauge values at the target
    if target.kind == "tangential":
        _, lam = tangential_frobenius_scale(config, gauge.lift, target.marked, target.xi)
        if lam != 1:
            raise LiftConditionViolated("tangential target needs lambda = 1")
        u = ctx.frac(chart.locations()[target.marked])
        mvals = {w: f.value_at(u) for w, f in gauge.M.items()}
        tser = NcSeries.one(N, ctx.one())
    else:
        u = (ctx.frac(target.point) - ctx.frac(chart.center)) / ctx.frac(chart.scale)
        mvals = {w: f.value_at(u) for w, f in gauge.M.items()}
        tser = _tiny_to_frobenius(ctx, gauge, target, hit, branch, tiny_T)
    one = ctx.one()
    g: dict = {EMPTY: one}
    for weight in range(1, N + 1):
        unit = ctx.int_(1 - p**weight)
        for w in itertools.product(range(1, config.s + 1), repeat=weight):
            rhs = ctx.zero()
            for cut in range(1, weight + 1):
                uw, vw = w[:cut], w[cut:]
                coef = mvals.get(uw, ctx.zero()).mul_int(p ** len(vw)) - tser.coeff(
                    uw, ctx.zero()
                )
                rhs = rhs + coef * g[vw]
            g[w] = rhs / unit
    out = NcSeries(N, g)
    if audit:
        resid = tser * out - NcSeries(N, mvals) * sigma_p(out, p)
        for w, x in resid.c.items():
            if not x.is_zero_to_precision():
                raise ResidualTooLarge(f"functional equation fails at {word_str(w)}: {x}")
    return out


def _tiny_to_frobenius(
    ctx: Zp,
    gauge: FrobeniusGauge,
    target: FibreFunctorSpec,
    hit: int | None,
    branch,
    tiny_T: int | None,
) -> NcSeries:
    """Transport series T(phi(z) <- z) inside the target's residue disc."""
    config = gauge.config
    N = gauge.N
    T = tiny_T if tiny_T is not None else max(2 * ctx.prec, 16)
    chart = gauge.lift.chart
    u = (ctx.frac(target.point) - ctx.frac(chart.center)) / ctx.frac(chart.scale)
    phi_u = gauge.lift.apply_u_padic(u, ctx)
    if (phi_u - u).is_zero_to_precision():
        return NcSeries.one(N, ctx.one())
    scale = ctx.frac(chart.scale)
    z = ctx.frac(target.point)
    phi_z = phi_u * scale + ctx.frac(chart.center)
    if hit is None:
        sol = good_disc_solution(config, ctx, z, T, N)
        return sol.map_coefficients(lambda g: g.eval_at(phi_z - z, branch))
    # marked-disc target: log-extended transport between z and phi(z)
    mchart = marked_chart(config, hit)
    sol = local_fundamental_solution(config, ctx, mchart, T, N)
    a = ctx.frac(mchart.center)
    g_to = sol.map_coefficients(lambda g: g.eval_at(phi_z - a, branch))
    g_frm = sol.map_coefficients(lambda g: g.eval_at(z - a, branch))
    return g_to * nc_inverse(g_frm)


# ---------------------------------------------------------------------------
# associator and MZVs
# ---------------------------------------------------------------------------


@dataclass
class EngineParams:
    """Truncation and precision knobs derived from (p, N, prec)."""

    p: int
    N: int
    prec: int
    stretch: int = 1

    def __post_init__(self):
        p, N, prec = self.p, self.N, self.prec
        guess = (p - 1) * (prec + 40) + 64
        self.working_prec = prec + N * (ilog_p(guess, p) + 2) + 4
        w = self.working_prec
        self.eps_target = w
        self.P = (p - 1) * (w + 4) + 2 * p + 8 + (p - 1) * 4 * (self.stretch - 1)
        self.T_chart = 2 * p + 16
        self.T_mid = (p * (w + 4) + 2 * p + 8) * self.stretch
        self.T_local = max(p * N, prec + 3 * N, 24) * self.stretch

    def ctx(self) -> Zp:
        return Zp(self.p, self.working_prec)


@dataclass
class Associator:
    """The invariant path from tangential-0 to tangential-1 with audits."""

    p: int
    N: int
    prec: int
    branch: object
    waypoint: int | None
    method: str
    phi: NcSeries
    audits: dict

    def coeff(self, w) -> PAdic:
        return self.phi.coeff(w, PAdic.exact_zero(self.p))

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "N": self.N,
            "prec": self.prec,
            "a": str(self.branch),
            "waypoint": self.waypoint,
            "method": self.method,
            "coefficients": self.phi.to_json_dict(),
            "audits": self.audits,
        }


def chart_gauge(ctx: Zp, config: DivisorConfig, end: int, params: EngineParams):
    """Standard gauge at one of the two tangential ends (1 = A end, 2 = B end)."""
    xi_sign = 1 if end == 1 else -1
    lift = standard_lift(config, end, xi_sign)
    dom = gauge_domain(ctx, config, lift, params)
    anchor = FibreFunctorSpec.tangential(end, xi_sign)
    return solve_gauge(ctx, config, lift, anchor, config.N, dom)


def associator(
    p: int,
    N: int,
    prec: int,
    waypoint: int | None = None,
    branch=0,
    method: str | None = None,
    stretch: int = 1,
    params: EngineParams | None = None,
) -> Associator:
    """The p-adic Drinfel'd associator on the {inf, 0, 1} configuration.

    method "waypoint" composes the two chart paths at a Teichmuller point
    (needs a good residue, so p >= 3); "direct" runs the dual-point lift from
    the 0-end straight to the 1-end and works for every p.
    """
    if method is None:
        method = "waypoint" if p >= 3 else "direct"
    params = params or EngineParams(p, N, prec, stretch)
    ctx = params.ctx()
    config = mzv_config(p, N)
    branch_p = branch if isinstance(branch, PAdic) else ctx.frac(Fraction(branch))
    if method == "waypoint":
        c = 2 if waypoint is None else waypoint
        if c % p in (0, 1):
            raise OutOfRegion(f"waypoint residue {c} reduces into a marked disc")
        y = ctx.teichmuller(c)
        g0 = chart_gauge(ctx, config, 1, params)
        g1 = chart_gauge(ctx, config, 2, params)
        # Teichmuller points are not rational; evaluate gauges at y directly
        path0 = _path_at_unit_point(ctx, g0, y, branch_p, params)
        path1 = _path_at_unit_point(ctx, g1, y, branch_p, params)
        phi = nc_inverse(path1) * path0
    elif method == "direct":
        lift = dual_lift(config, 1, 2)
        dom = gauge_domain(ctx, config, lift, params)
        anchor = FibreFunctorSpec.tangential(1, 1)
        gauge = solve_gauge(ctx, config, lift, anchor, N, dom)
        target = FibreFunctorSpec.tangential(2, -1)
        phi = invariant_path_in_chart(ctx, gauge, target, branch=branch_p)
    else:
        raise ValueError(f"unknown method {method}")
    audits = _associator_audits(ctx, config, phi, prec)
    return Associator(p, N, prec, branch, waypoint if method == "waypoint" else None,
                      method, phi, audits)


def _path_at_unit_point(
    ctx: Zp, gauge: FrobeniusGauge, y: PAdic, branch_p, params: EngineParams
) -> NcSeries:
    """Invariant path to a unit point given as a PAdic (e.g. a Teichmuller lift)."""
    config = gauge.config
    N = gauge.N
    p = config.p
    chart = gauge.lift.chart
    u = (y - ctx.frac(chart.center)) / ctx.frac(chart.scale)
    mvals = {w: f.value_at(u) for w, f in gauge.M.items()}
    phi_u = gauge.lift.apply_u_padic(u, ctx)
    if (phi_u - u).is_zero_to_precision():
        tser = NcSeries.one(N, ctx.one())
    else:
        phi_y = phi_u * ctx.frac(chart.scale) + ctx.frac(chart.center)
        sol = good_disc_solution(config, ctx, y, params.T_local, N)
        tser = sol.map_coefficients(lambda g: g.eval_at(phi_y - y, branch_p))
    one = ctx.one()
    g: dict = {EMPTY: one}
    for weight in range(1, N + 1):
        unit = ctx.int_(1 - p**weight)
        for w in itertools.product(range(1, config.s + 1), repeat=weight):
            rhs = ctx.zero()
            for cut in range(1, weight + 1):
                uw, vw = w[:cut], w[cut:]
                coef = mvals.get(uw, ctx.zero()).mul_int(p ** len(vw)) - tser.coeff(
                    uw, ctx.zero()
                )
                rhs = rhs + coef * g[vw]
            g[w] = rhs / unit
    out = NcSeries(N, g)
    resid = tser * out - NcSeries(N, mvals) * sigma_p(out, p)
    for w, x in resid.c.items():
        if not x.is_zero_to_precision():
            raise ResidualTooLarge(f"functional equation fails at {word_str(w)}: {x}")
    return out


def _associator_audits(ctx: Zp, config: DivisorConfig, phi: NcSeries, prec: int) -> dict:
    single = {}
    for i in range(1, config.s + 1):
        c = phi.coeff((i,), ctx.zero())
        single[word_str((i,))] = c.to_json_dict()
        if not c.is_zero_to_precision():
            raise ResidualTooLarge(f"single-letter coefficient {word_str((i,))} = {c}")
    gl = is_group_like(phi, config.s, ctx.zero())
    if not gl.ok:
        raise ResidualTooLarge(f"associator is not group-like: {gl}")
    report = integrality_report(phi, config.p)
    return {
        "single_letters": single,
        "group_like_pairs": gl.pairs_checked,
        "group_like_margin": gl.shared_precision,
        "integrality_margins": {word_str(w): row for w, row in report["rows"].items()},
        "integrality_ok": report["ok"],
        "min_abs_precision": min(
            (x.N for x in phi.c.values() if x.N is not None), default=None
        ),
    }


def pmzv(assoc: Associator, indices) -> PAdic:
    """(-1)^m times the coefficient of A^(k_m - 1) B ... A^(k_1 - 1) B."""
    ks = list(indices)
    if not ks or any(k < 1 for k in ks):
        raise ValueError("indices must be positive integers")
    weight = sum(ks)
    if weight > assoc.N:
        raise WeightExceedsTruncation(f"weight {weight} exceeds truncation {assoc.N}")
    word = ()
    for k in reversed(ks):
        word += (1,) * (k - 1) + (2,)
    c = assoc.coeff(word)
    return c.mul_int((-1) ** len(ks)) if hasattr(c, "mul_int") else c


def mzv_report(assoc: Associator, indices) -> dict:
    ks = list(indices)
    val = pmzv(assoc, ks)
    weight = sum(ks)
    bound = dp_ideal_valuation(weight, assoc.p)
    if val.is_zero_to_precision():
        margin = None if val.is_exact_zero else val.N - bound
        vtxt = "zero" if val.is_exact_zero else f">={val.N}"
    else:
        margin = val.valuation() - bound
        vtxt = str(val.valuation())
    return {
        "indices": ks,
        "weight": weight,
        "value": val.to_json_dict(),
        "valuation": vtxt,
        "dp_bound": bound,
        "margin": margin if margin is not None else "inf",
        "convergent": ks[-1] >= 2 if len(ks) else True,
    }


def integrality_report(series: NcSeries, p: int) -> dict:
    """Per-word margins v(coefficient) - dp(|w|); indeterminate is never a pass."""
    rows = {}
    ok = True
    for w in sorted(series.c, key=lambda t: (len(t), t)):
        x = series.c[w]
        bound = dp_ideal_valuation(len(w), p)
        if x.is_exact_zero:
            rows[w] = {"weight": len(w), "bound": bound, "margin": "inf", "status": "compliant"}
        elif x.is_zero_to_precision():
            if x.N >= bound:
                rows[w] = {
                    "weight": len(w),
                    "bound": bound,
                    "margin": f">={x.N - bound}",
                    "status": "compliant",
                }
            else:
                rows[w] = {
                    "weight": len(w),
                    "bound": bound,
                    "margin": None,
                    "status": "indeterminate",
                }
                ok = False
        else:
            margin = x.valuation() - bound
            rows[w] = {
                "weight": len(w),
                "bound": bound,
                "margin": margin,
                "status": "compliant" if margin >= 0 else "violation",
            }
            if margin < 0:
                ok = False
    return {"ok": ok, "rows": rows}
