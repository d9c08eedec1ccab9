"""Divisor configurations on P^1, local solutions, and in-disc transport.

The marked points a_0..a_s (a_0 may be infinity) carry the logarithmic forms
omega_i with residue -1 at a_i and 0 at the other finite marked points.  The
path engine integrates the pinned kernel family

    nu_1 = -omega_1,    nu_i = omega_i  (i >= 2),

the one site where the orientation convention is fixed: with it the chart at
a_1 produces iterated integrals whose coefficients are the classical
polylogarithm series (positive coefficients at the a_1 end), and every other
module inherits the convention from here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import CollidingReductions, DifferentDiscs, OutOfDomain
from .freealg import NcSeries
from .padic import PAdic, Zp
from .rigid import LocalKernel, LogSeries

INF = "inf"

Point = object  # Fraction or INF


def parse_point(s) -> Point:
    if s in (INF, "oo", "infinity"):
        return INF
    return Fraction(s)


def point_str(a: Point) -> str:
    return INF if a is INF else str(a)


def reduction(a: Point, p: int):
    """Residue of a point of P^1(Z_p): an element of F_p, or INF."""
    if a is INF:
        return INF
    num, den = a.numerator, a.denominator
    if den % p == 0:
        if num % p == 0:
            raise ValueError("point not in P^1(Z_p)")
        return INF
    return num * pow(den, -1, p) % p


class DivisorConfig:
    """Marked points with their forms, kernels, and residue table."""

    def __init__(self, points: list, p: int, N: int):
        if len(points) < 2:
            raise ValueError("need at least two marked points (a_0 and a_1)")
        if N < 1:
            raise ValueError("weight truncation N must be >= 1")
        self.p = p
        self.N = N
        self.points = list(points)
        self.s = len(points) - 1
        reds = [reduction(a, p) for a in points]
        if len(set(reds)) != len(reds):
            raise CollidingReductions(f"reductions collide: {reds}")
        self.reductions = reds
        # forms: omega_i = -dx/(x - a_i) (+ dx/(x - a_0) when a_0 is finite)
        self.form_poles = {}
        for i in range(1, self.s + 1):
            poles = [(Fraction(-1), i)]
            if points[0] is not INF:
                poles.append((Fraction(1), 0))
            self.form_poles[i] = poles
        # pinned kernel orientation (see module docstring): nu_1 = -omega_1
        self.kernel_poles = {}
        for i in range(1, self.s + 1):
            sign = -1 if i == 1 else 1
            self.kernel_poles[i] = [(Fraction(sign) * c, j) for c, j in self.form_poles[i]]

    def residue_table(self) -> dict:
        """Exact residues res_{a_j}(omega_i) including the a_0 column."""
        table = {}
        for i in range(1, self.s + 1):
            row = {}
            finite_sum = Fraction(0)
            for c, j in self.form_poles[i]:
                row[j] = row.get(j, Fraction(0)) + c
                finite_sum += c
            for j in range(self.s + 1):
                row.setdefault(j, Fraction(0))
            if self.points[0] is INF:
                row[0] = -finite_sum
            table[i] = row
        return table

    def validate_residues(self) -> None:
        table = self.residue_table()
        for i in range(1, self.s + 1):
            for j in range(1, self.s + 1):
                want = Fraction(-1) if i == j else Fraction(0)
                assert table[i][j] == want, f"res_{j}(omega_{i}) = {table[i][j]}"
            assert sum(table[i].values()) == 0, "residues do not sum to zero"

    def marked_index_of_reduction(self, red):
        for j, r in enumerate(self.reductions):
            if r == red:
                return j
        return None

    def __repr__(self):
        pts = ",".join(point_str(a) for a in self.points)
        return f"DivisorConfig(p={self.p}, points=[{pts}], N={self.N})"

    def to_json_dict(self) -> dict:
        return {"p": self.p, "points": [point_str(a) for a in self.points], "N": self.N}

    @staticmethod
    def from_json_dict(d: dict) -> "DivisorConfig":
        return make_config([parse_point(s) for s in d["points"]], int(d["p"]), int(d["N"]))


def make_config(points: list, p: int, N: int) -> DivisorConfig:
    cfg = DivisorConfig(points, p, N)
    cfg.validate_residues()
    return cfg


def mzv_config(p: int, N: int) -> DivisorConfig:
    """The default configuration {inf, 0, 1}: letter A at 0, letter B at 1."""
    return make_config([INF, Fraction(0), Fraction(1)], p, N)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Affine coordinate u = (x - center)/scale with unit scale."""

    config: DivisorConfig
    anchor: int  # marked point index whose disc contains u = 0
    center: Fraction
    scale: Fraction

    def u_of(self, x: Fraction) -> Fraction:
        return (x - self.center) / self.scale

    def x_of(self, u: Fraction) -> Fraction:
        return u * self.scale + self.center

    def locations(self) -> dict:
        """Chart coordinates of the finite marked points."""
        out = {}
        for j, a in enumerate(self.config.points):
            if a is not INF:
                out[j] = self.u_of(a)
        return out

    def kernels(self, ctx: Zp, T: int) -> dict:
        """LocalKernel expansion of each nu_i around u = 0."""
        locs = self.locations()
        out = {}
        for i in range(1, self.config.s + 1):
            dlog = 0
            ps = [ctx.zero() for _ in range(T + 1)]
            any_ps = False
            for c, j in self.config.kernel_poles[i]:
                # c * dx/(x - a_j) = c * du/(u - b_j)
                b = locs[j]
                if b == 0:
                    dlog += int(c)
                else:
                    # 1/(u-b) = -(1/b) sum (u/b)^m
                    any_ps = True
                    binv = ctx.frac(Fraction(1) / b)
                    coef = ctx.frac(-c / b)
                    for m in range(T + 1):
                        ps[m] = ps[m] + coef
                        coef = coef * binv
            out[i] = LocalKernel(dlog, ps if any_ps else [])
        return out


def marked_chart(config: DivisorConfig, i: int) -> Chart:
    """The spec chart at a finite marked point: u = x - a_i."""
    a = config.points[i]
    if a is INF:
        raise OutOfDomain("no affine chart at infinity")
    return Chart(config, i, a, Fraction(1))


def scaled_chart(config: DivisorConfig, i: int, j: int) -> Chart:
    """Coordinate sending a_i to 0 and a_j to 1."""
    ai, aj = config.points[i], config.points[j]
    if ai is INF or aj is INF:
        raise OutOfDomain("scaled chart needs two finite marked points")
    return Chart(config, i, ai, aj - ai)


# ---------------------------------------------------------------------------
# fibre functor specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FibreFunctorSpec:
    """A good point, a bad point, or a tangential base point.

    For tangential specs, xi is the tangent scalar read on the spec chart
    coordinate u = x - a_marked.
    """

    kind: str  # "good" | "bad" | "tangential"
    point: object = None  # Fraction for good/bad
    marked: int | None = None  # marked index for tangential
    xi: Fraction | None = None

    @staticmethod
    def good(z) -> "FibreFunctorSpec":
        return FibreFunctorSpec("good", point=Fraction(z))

    @staticmethod
    def bad(z) -> "FibreFunctorSpec":
        return FibreFunctorSpec("bad", point=Fraction(z))

    @staticmethod
    def tangential(marked: int, xi) -> "FibreFunctorSpec":
        return FibreFunctorSpec("tangential", marked=marked, xi=Fraction(xi))

    def validate(self, config: DivisorConfig) -> None:
        if self.kind == "tangential":
            if self.xi == 0:
                raise ValueError("tangent scalar must be nonzero")
            if not (0 <= self.marked <= config.s):
                raise ValueError("tangential spec needs a marked point index")
            return
        red = reduction(self.point, config.p)
        hit = config.marked_index_of_reduction(red)
        if self.kind == "good" and hit is not None:
            raise OutOfDomain(f"point reduces into the marked disc of index {hit}")
        if self.kind == "bad":
            if hit is None:
                raise OutOfDomain("bad-point spec outside every marked disc")
            if self.point == config.points[hit]:
                raise OutOfDomain("bad point must differ from the marked point")

    def disc(self, config: DivisorConfig):
        """Residue of the underlying point (INF or an element of F_p)."""
        if self.kind == "tangential":
            return config.reductions[self.marked]
        return reduction(self.point, config.p)


# ---------------------------------------------------------------------------
# local fundamental solutions and transport
# ---------------------------------------------------------------------------


def local_fundamental_solution(
    config: DivisorConfig, ctx: Zp, chart: Chart, T: int, N: int | None = None
) -> NcSeries:
    """Solution G of dG = (sum_i nu_i e_i) G at the chart anchor.

    Empty-word coefficient 1; all integration constants vanish, with the
    log divergence carried by the l-monomials.
    """
    N = config.N if N is None else N
    kernels = chart.kernels(ctx, T)
    label = f"chart{chart.anchor}"
    out = NcSeries.one(N, LogSeries.one(ctx, label, T))
    frontier = {(): out.c[()]}
    for _weight in range(1, N + 1):
        new = {}
        for w, g in frontier.items():
            for i in range(1, config.s + 1):
                new[(i,) + w] = g.integrate(kernels[i])
        out.c.update(new)
        frontier = new
    return out


def good_disc_solution(config: DivisorConfig, ctx: Zp, center: PAdic, T: int, N: int) -> NcSeries:
    """Solution normalized at a good point, in the variable u = x - center."""
    kernels = {}
    for i in range(1, config.s + 1):
        ps = [ctx.zero() for _ in range(T + 1)]
        for c, j in config.kernel_poles[i]:
            aj = ctx.frac(config.points[j])
            b = aj - center
            if b.is_zero_to_precision() or b.valuation() != 0:
                raise OutOfDomain("centre is not at unit distance from a marked point")
            binv = b.inv()
            coef = (-binv) * ctx.frac(c)
            for m in range(T + 1):
                ps[m] = ps[m] + coef
                coef = coef * binv
        kernels[i] = LocalKernel(0, ps)
    out = NcSeries.one(N, LogSeries.one(ctx, "good", T))
    frontier = {(): out.c[()]}
    for _weight in range(1, N + 1):
        new = {}
        for w, g in frontier.items():
            for i in range(1, config.s + 1):
                new[(i,) + w] = g.integrate(kernels[i])
        out.c.update(new)
        frontier = new
    return out


def eval_local_at_spec(
    config: DivisorConfig, ctx: Zp, chart: Chart, G: NcSeries, spec: FibreFunctorSpec, branch=0
) -> NcSeries:
    """Evaluate a chart-local NcSeries<LogSeries> at a spec in the same disc."""
    if spec.kind == "tangential":
        if spec.marked != chart.anchor:
            raise DifferentDiscs("tangential spec attached to a different point")
        return G.map_coefficients(lambda g: g.eval_tangential(spec.xi, branch))
    u = ctx.frac(chart.u_of(spec.point))
    return G.map_coefficients(lambda g: g.eval_at(u, branch))


def tiny_transport(
    config: DivisorConfig,
    ctx: Zp,
    frm: FibreFunctorSpec,
    to: FibreFunctorSpec,
    T: int,
    N: int | None = None,
    branch=0,
) -> NcSeries:
    """gamma_{to,frm}(1) for two specs in one residue disc.

    Good disc: Taylor transport of the local solution centred at `frm`.
    Marked disc: both ends evaluated on the log-extended chart solution,
    composing G(to) * G(frm)^{-1}.
    """
    from .freealg import nc_inverse

    N = config.N if N is None else N
    frm.validate(config)
    to.validate(config)
    d1, d2 = frm.disc(config), to.disc(config)
    if d1 != d2:
        raise DifferentDiscs(f"discs {d1} and {d2} differ")
    hit = config.marked_index_of_reduction(d1)
    if hit is None:
        z0 = ctx.frac(frm.point)
        z1 = ctx.frac(to.point)
        G = good_disc_solution(config, ctx, z0, T, N)
        return G.map_coefficients(lambda g: g.eval_at(z1 - z0, branch))
    if frm.kind == "good" or to.kind == "good":
        raise DifferentDiscs("good spec in a marked disc")
    chart = marked_chart(config, hit)
    G = local_fundamental_solution(config, ctx, chart, T, N)
    g_to = eval_local_at_spec(config, ctx, chart, G, to, branch)
    g_frm = eval_local_at_spec(config, ctx, chart, G, frm, branch)
    return g_to * nc_inverse(g_frm)


def residue_operator(letter: int):
    """Left multiplication by e_letter (the residue action at a_letter)."""

    def apply(series: NcSeries) -> NcSeries:
        out = NcSeries(series.N)
        for w, x in series.c.items():
            if len(w) + 1 <= series.N:
                out.c[(letter,) + w] = x
        return out

    return apply
