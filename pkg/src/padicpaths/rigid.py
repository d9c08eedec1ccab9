"""Local log-extended series and three-end rigid function representations.

Two representations back the analytic side of the engine:

* LogSeries: a truncated expansion sum c_{n,k} t^n l^k/k! around one marked
  (or plain) disc centre, where l plays the role of log t and is stored in
  divided powers so that integral situations keep integral coefficients.

* RigidFunction: a function on the closed unit disc of a chart coordinate
  minus the excluded marked discs, stored as a power-series part plus one
  principal ("pole tail") part per finite marked point.  Pole tails converge
  at unit distance from their centre because coefficient valuations grow
  linearly; every constructor certifies a truncation-error floor eps.

Certification discipline: eps is a lower bound for the sup-norm valuation of
everything dropped.  Truncation depths are chosen with enough headroom that
tail slopes (at least 1/(p-1) per pole order, weight/ilog_p for LogSeries)
keep dropped content below working precision; the stability acceptance check
(double the truncation, compare digits) validates this empirically.
"""

from __future__ import annotations

from .errors import (
    NonzeroResidue,
    NotAUnitNearOne,
    OutOfDomain,
    PrecisionExhausted,
)
from .padic import PAdic, Zp, ilog_p, padic_dot

# ---------------------------------------------------------------------------
# LogSeries
# ---------------------------------------------------------------------------


class LocalKernel:
    """A 1-form a*du/u + (sum_m ps[m] u^m) du expanded in a local coordinate."""

    __slots__ = ("dlog", "ps")

    def __init__(self, dlog: int, ps: list):
        self.dlog = dlog  # integer multiple of du/u (0 when regular)
        self.ps = ps  # list[PAdic]

    def __repr__(self):
        return f"LocalKernel(dlog={self.dlog}, ps_len={len(self.ps)})"


class LogSeries:
    """Truncated element of the log-extended local ring at a disc centre.

    Coefficients are stored sparsely as (n, k) -> PAdic for the monomial
    t^n * l^k / k!.  The integer `weight` certifies the tail bound
    v(c_{n,k}) >= -weight * floor(log_p n) for every n >= 1, which each
    constructor checks on the stored range and evaluation uses for the
    omitted range.
    """

    __slots__ = ("ctx", "label", "T", "c", "weight")

    def __init__(self, ctx: Zp, label: str, T: int, coeffs: dict, weight: int = 0):
        self.ctx = ctx
        self.label = label
        self.T = T
        self.c = {nk: v for nk, v in coeffs.items() if not v.is_exact_zero}
        self.weight = weight
        if __debug__:
            for (n, _k), v in self.c.items():
                if n >= 1 and not v.is_exact_zero:
                    assert v.valuation_lower_bound() >= -weight * ilog_p(n, ctx.p), (
                        f"tail certificate violated at n={n}: {v}"
                    )

    # -- constructors -----------------------------------------------------

    @staticmethod
    def one(ctx: Zp, label: str, T: int) -> "LogSeries":
        return LogSeries(ctx, label, T, {(0, 0): ctx.one()})

    @staticmethod
    def zero(ctx: Zp, label: str, T: int) -> "LogSeries":
        return LogSeries(ctx, label, T, {})

    @property
    def ell_degree(self) -> int:
        return max((k for (_n, k) in self.c), default=0)

    def coeff(self, n: int, k: int) -> PAdic:
        return self.c.get((n, k), self.ctx.zero())

    # -- ring operations -----------------------------------------------------

    def __add__(self, other: "LogSeries") -> "LogSeries":
        out = dict(self.c)
        for nk, v in other.c.items():
            out[nk] = out[nk] + v if nk in out else v
        return LogSeries(
            self.ctx, self.label, min(self.T, other.T), out, max(self.weight, other.weight)
        )

    def __neg__(self) -> "LogSeries":
        return LogSeries(self.ctx, self.label, self.T, {nk: -v for nk, v in self.c.items()},
                         self.weight)

    def __sub__(self, other: "LogSeries") -> "LogSeries":
        return self + (-other)

    def __mul__(self, other: "LogSeries") -> "LogSeries":
        from math import comb

        T = min(self.T, other.T)
        out: dict = {}
        for (n1, k1), v1 in self.c.items():
            for (n2, k2), v2 in other.c.items():
                n = n1 + n2
                if n > T:
                    continue
                k = k1 + k2
                term = (v1 * v2).mul_int(comb(k, k1))
                key = (n, k)
                out[key] = out[key] + term if key in out else term
        return LogSeries(self.ctx, self.label, T, out, self.weight + other.weight)

    def mul_padic(self, a: PAdic) -> "LogSeries":
        w = self.weight
        if a.is_exact_zero:
            return LogSeries.zero(self.ctx, self.label, self.T)
        if a.valuation_lower_bound() < 0:
            w += 1  # negative-valuation scalars spend one weight of slack
        return LogSeries(self.ctx, self.label, self.T, {nk: v * a for nk, v in self.c.items()}, w)

    # -- integration ----------------------------------------------------------

    def integrate(self, kernel: LocalKernel) -> "LogSeries":
        """Primitive of self * kernel with all integration constants zero.

        Against du/u a constant term produces the l-monomial (divided powers
        keep the coefficient unchanged); t^n terms use the exact recursion
        int t^n l^k/k! dt/t = sum_j (-1)^(k-j)/n^(k-j+1) t^n l^j/j!.
        """
        out: dict = {}

        def bump(n, k, val):
            if val.is_exact_zero or n > self.T:
                return
            key = (n, k)
            out[key] = out[key] + val if key in out else val

        a = kernel.dlog
        for (n, k), v in self.c.items():
            if a:
                av = v.mul_int(a)
                if n == 0:
                    bump(0, k + 1, av)
                else:
                    scale = av
                    for j in range(k, -1, -1):
                        scale = scale.div_int(n)
                        bump(n, j, scale if (k - j) % 2 == 0 else -scale)
            for m, km in enumerate(kernel.ps):
                if km.is_exact_zero:
                    continue
                q = n + m + 1
                if q > self.T:
                    break
                base = v * km
                scale = base
                for j in range(k, -1, -1):
                    scale = scale.div_int(q)
                    bump(q, j, scale if (k - j) % 2 == 0 else -scale)
        return LogSeries(self.ctx, self.label, self.T, out, self.weight + 1)

    # -- evaluation ------------------------------------------------------------

    def _tail_valuation(self, vz: int) -> int:
        """Lower bound for v(c_{n,k} z^n) over the omitted range n > T."""
        p = self.ctx.p
        best = None
        j = ilog_p(self.T + 1, p)
        for step in range(64):
            n = max(self.T + 1, p ** (j + step))
            val = n * vz - self.weight * (j + step)
            if best is None or val < best:
                best = val
            elif val > best + 8 * max(1, vz):
                break
        return best

    def eval_at(self, z: PAdic, branch=0) -> PAdic:
        """Value at t = z inside the disc (v(z) >= 1), l = log(z) on `branch`."""
        if z.is_exact_zero:
            return self.eval_tangential(1, branch)
        if z.valuation_lower_bound() < 1:
            raise OutOfDomain("logseries evaluation needs v(z) >= 1")
        ctx = self.ctx
        logz = ctx.log(z, branch) if z.is_regular else ctx.o(z.N)
        vz = z.valuation() if z.is_regular else z.N
        kmax = self.ell_degree
        lam = [ctx.one()]
        for k in range(1, kmax + 1):
            lam.append((lam[-1] * logz).div_int(k))
        zpow = {0: ctx.one()}
        zz = ctx.one()
        for n in range(1, self.T + 1):
            zz = zz * z
            zpow[n] = zz
        acc = PAdic.big_oh(ctx.p, self._tail_valuation(vz))
        for (n, k), v in self.c.items():
            acc = acc + v * zpow[n] * lam[k]
        return acc

    def eval_tangential(self, xi, branch=0) -> PAdic:
        """Tangential evaluation t -> 0, l -> log(xi); xi = +-1 gives exact 0."""
        ctx = self.ctx
        from fractions import Fraction

        if isinstance(xi, PAdic):
            logxi = ctx.log(xi, branch)
        else:
            xi = Fraction(xi)
            logxi = ctx.zero() if xi in (1, -1) else ctx.log(ctx.frac(xi), branch)
        acc = ctx.zero()
        lamk = ctx.one()
        for k in range(0, self.ell_degree + 1):
            if k:
                lamk = (lamk * logxi).div_int(k)
                if lamk.is_exact_zero:
                    break
            v = self.c.get((0, k))
            if v is not None:
                acc = acc + v * lamk
        return acc

    def __repr__(self):
        return f"LogSeries({self.label}, T={self.T}, terms={len(self.c)}, w={self.weight})"

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "T": self.T,
            "L": self.ell_degree,
            "weight": self.weight,
            "coefficients": [
                {"n": n, "k": k, "value": v.to_json_dict()}
                for (n, k), v in sorted(self.c.items())
            ],
        }


def check_log_horizontal(series_by_word, kernels, tol: int) -> None:
    """Audit d<G,w> = sum_j nu_j <G,w'> (w = e_j w') coefficient-exactly.

    Both sides are compared as coefficients of t^n l^k/k! dt; the du/u kernel
    contributes the shifted monomial identities used by integrate().
    """
    for w, g in series_by_word.items():
        if not w:
            continue
        T = g.T
        lhs: dict = {}

        def bump(d, n, k, val):
            if val.is_exact_zero:
                return
            d[(n, k)] = d[(n, k)] + val if (n, k) in d else val

        # derivative of g against dt, as coefficients of t^n l^k/k! (times dt)
        for (n, k), v in g.c.items():
            if n >= 1:
                bump(lhs, n - 1, k, v.mul_int(n))
            if k >= 1:
                if n == 0:
                    continue  # pure-l derivative lives at t^{-1}, handled on rhs
                bump(lhs, n - 1, k - 1, v)
        rhs: dict = {}
        j, wrest = w[0], w[1:]
        ker = kernels[j]
        gg = series_by_word[wrest]
        for (n, k), v in gg.c.items():
            if ker.dlog:
                if n == 0 and k >= 0:
                    pass  # t^{-1}-level terms cancel against the lhs omission
                else:
                    bump(rhs, n - 1, k, v.mul_int(ker.dlog))
            for m, km in enumerate(ker.ps):
                if n + m <= T - 1:
                    bump(rhs, n + m, k, v * km)
        keys = set(lhs) | set(rhs)
        for key in keys:
            if key[0] >= T - 1:
                continue  # beyond shared truncation
            diff = lhs.get(key, g.ctx.zero()) - rhs.get(key, g.ctx.zero())
            if diff.is_exact_zero or diff.is_big_oh or diff.valuation() >= tol:
                continue
            raise AssertionError(f"horizontality fails at word {w}, monomial {key}: {diff}")


# ---------------------------------------------------------------------------
# RigidFunction
# ---------------------------------------------------------------------------


class RigidDomain:
    """Closed unit disc of a chart coordinate minus the excluded marked discs.

    centers maps a marked-point key to its chart coordinate (a unit, except
    the anchor at 0).  Keys in `excluded` index removed discs (pole tails
    allowed there); keys in `interior` index marked points inside the region
    (poles there must cancel).
    """

    __slots__ = ("ctx", "label", "centers", "interior", "excluded", "T", "P", "eps_target")

    def __init__(self, ctx, label, centers, interior, excluded, T, P, eps_target):
        self.ctx = ctx
        self.label = label
        self.centers = centers
        self.interior = frozenset(interior)
        self.excluded = frozenset(excluded)
        self.T = T
        self.P = P
        self.eps_target = eps_target

    def __repr__(self):
        return (
            f"RigidDomain({self.label}, interior={sorted(self.interior)}, "
            f"excluded={sorted(self.excluded)}, T={self.T}, P={self.P})"
        )


def _min_eps(*vals):
    xs = [v for v in vals if v is not None]
    return min(xs) if xs else None


class RigidFunction:
    """Power-series part plus per-centre pole tails on a RigidDomain."""

    __slots__ = ("dom", "ps", "tails", "eps")

    def __init__(self, dom: RigidDomain, ps: list, tails: dict, eps: int | None):
        self.dom = dom
        self.ps = list(ps)
        while self.ps and self.ps[-1].is_exact_zero:
            self.ps.pop()
        self.tails = {}
        for key, lst in tails.items():
            lst = list(lst)
            while lst and lst[-1].is_exact_zero:
                lst.pop()
            if lst:
                self.tails[key] = lst
        self.eps = eps

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(dom: RigidDomain) -> "RigidFunction":
        return RigidFunction(dom, [], {}, None)

    @staticmethod
    def constant(dom: RigidDomain, c: PAdic) -> "RigidFunction":
        return RigidFunction(dom, [c], {}, None)

    @staticmethod
    def from_ps(dom: RigidDomain, coeffs: list, eps: int | None = None) -> "RigidFunction":
        return RigidFunction(dom, coeffs, {}, eps)

    @staticmethod
    def from_tail(dom: RigidDomain, key, coeffs: list, eps: int | None = None) -> "RigidFunction":
        return RigidFunction(dom, [], {key: coeffs}, eps)

    # -- bookkeeping -----------------------------------------------------------

    def vmin(self) -> int:
        """Minimal valuation lower bound over stored coefficients (0 if none)."""
        m = 0
        for c in self.ps:
            if not c.is_exact_zero:
                m = min(m, c.valuation_lower_bound())
        for lst in self.tails.values():
            for c in lst:
                if not c.is_exact_zero:
                    m = min(m, c.valuation_lower_bound())
        return m

    def is_zero(self) -> bool:
        return not self.ps and not self.tails

    def _zero(self) -> PAdic:
        return self.dom.ctx.zero()

    # -- additive structure -----------------------------------------------------

    def __add__(self, other: "RigidFunction") -> "RigidFunction":
        n = max(len(self.ps), len(other.ps))
        z = self._zero()
        ps = [
            (self.ps[i] if i < len(self.ps) else z) + (other.ps[i] if i < len(other.ps) else z)
            for i in range(n)
        ]
        tails = {}
        for key in set(self.tails) | set(other.tails):
            a = self.tails.get(key, [])
            b = other.tails.get(key, [])
            m = max(len(a), len(b))
            tails[key] = [
                (a[i] if i < len(a) else z) + (b[i] if i < len(b) else z) for i in range(m)
            ]
        return RigidFunction(self.dom, ps, tails, _min_eps(self.eps, other.eps))

    def __neg__(self) -> "RigidFunction":
        return RigidFunction(
            self.dom,
            [-c for c in self.ps],
            {k: [-c for c in lst] for k, lst in self.tails.items()},
            self.eps,
        )

    def __sub__(self, other: "RigidFunction") -> "RigidFunction":
        return self + (-other)

    def mul_padic(self, a: PAdic) -> "RigidFunction":
        if a.is_exact_zero:
            return RigidFunction.zero(self.dom)
        eps = self.eps if self.eps is None else self.eps + min(0, a.valuation_lower_bound())
        return RigidFunction(
            self.dom,
            [c * a for c in self.ps],
            {k: [c * a for c in lst] for k, lst in self.tails.items()},
            eps,
        )

    def mul_int(self, n: int) -> "RigidFunction":
        if n == 0:
            return RigidFunction.zero(self.dom)
        return RigidFunction(
            self.dom,
            [c.mul_int(n) for c in self.ps],
            {k: [c.mul_int(n) for c in lst] for k, lst in self.tails.items()},
            self.eps,
        )

    # -- multiplication -----------------------------------------------------------

    def __mul__(self, other: "RigidFunction") -> "RigidFunction":
        dom = self.dom
        eps = _min_eps(
            None if self.eps is None else self.eps + min(0, other.vmin()),
            None if other.eps is None else other.eps + min(0, self.vmin()),
            None if (self.eps is None or other.eps is None) else self.eps + other.eps,
        )
        out = RigidFunction.zero(dom)
        out.eps = eps
        # ps x ps
        if self.ps and other.ps:
            n = min(len(self.ps) + len(other.ps) - 1, dom.T + 1)
            ps = []
            dropped = None
            for k in range(len(self.ps) + len(other.ps) - 1):
                lo = max(0, k - len(other.ps) + 1)
                hi = min(k, len(self.ps) - 1)
                c = padic_dot((self.ps[i], other.ps[k - i]) for i in range(lo, hi + 1))
                if c is None:
                    c = self._zero()
                if k <= dom.T:
                    ps.append(c)
                elif not c.is_exact_zero:
                    dropped = _min_eps(dropped, c.valuation_lower_bound())
            out = out + RigidFunction(dom, ps, {}, None)
            out.eps = _min_eps(out.eps, dropped)
        # tail x tail (same centre only)
        for key, a in self.tails.items():
            for key2, b in other.tails.items():
                if key != key2:
                    raise NotImplementedError("pole tails at distinct centres")
                coeffs = []
                dropped = None
                for m in range(2, len(a) + len(b) + 1):  # order m = i + j
                    lo = max(1, m - len(b))
                    hi = min(len(a), m - 1)
                    c = padic_dot((a[i - 1], b[m - i - 1]) for i in range(lo, hi + 1))
                    if c is None:
                        c = self._zero()
                    if m <= dom.P:
                        coeffs.append(c)
                    elif not c.is_exact_zero:
                        dropped = _min_eps(dropped, c.valuation_lower_bound())
                tail = [self._zero()] + coeffs  # order 1 coefficient is zero
                out = out + RigidFunction(dom, [], {key: tail}, None)
                out.eps = _min_eps(out.eps, dropped)
        # ps x tail and tail x ps
        for f_ps, g in ((self.ps, other), (other.ps, self)):
            for key, tail in g.tails.items():
                if f_ps:
                    out = out + _mul_ps_tail(self.dom, f_ps, key, tail)
        return out

    def shifted_tail(self, key, shift: int) -> "RigidFunction":
        """Multiply a pure tail at `key` by (u-b)^shift, shift <= order depth."""
        assert not self.ps and set(self.tails) == {key}
        lst = self.tails[key]
        ps_part = []
        new = []
        for m, c in enumerate(lst, start=1):
            o = m - shift
            if o >= 1:
                while len(new) < o:
                    new.append(self._zero())
                new[o - 1] = new[o - 1] + c
            elif o == 0:
                ps_part = [c] if not ps_part else [ps_part[0] + c]
            else:
                raise ValueError("shift would create positive powers of (u-b)")
        return RigidFunction(self.dom, ps_part, {key: new}, self.eps)

    # -- division by linear factors -------------------------------------------------

    def div_linear(self, key) -> "RigidFunction":
        """Exact multiplication by 1/(u - b), b = centers[key].

        Redistributes between parts: the power-series part contributes its
        value at b to a simple pole at key; tails at other centres contribute
        their partial-fraction residues.
        """
        dom = self.dom
        b = dom.centers[key]
        z = self._zero()
        ps_q, r = _ps_div_linear(self.dom.ctx, self.ps, b)
        tails: dict = {key: [r]}
        # existing tail at key shifts one order deeper
        if key in self.tails:
            lst = self.tails[key]
            deeper = [z] + list(lst)
            dropped = None
            if len(deeper) > dom.P:
                extra = deeper[dom.P:]
                deeper = deeper[: dom.P]
                for c in extra:
                    if not c.is_exact_zero:
                        dropped = _min_eps(dropped, c.valuation_lower_bound())
            t0 = tails[key]
            m = max(len(t0), len(deeper))
            tails[key] = [
                (t0[i] if i < len(t0) else z) + (deeper[i] if i < len(deeper) else z)
                for i in range(m)
            ]
            eps_extra = dropped
        else:
            eps_extra = None
        out = RigidFunction(dom, ps_q, tails, _min_eps(self.eps, eps_extra))
        for key2, lst in self.tails.items():
            if key2 == key:
                continue
            b2 = dom.centers[key2]
            d = b - b2  # unit by distinct reductions
            dinv = d.inv()
            # (u-b2)^{-m}/(u-b) = (b-b2)^{-m}/(u-b) - sum_{j<=m} (b-b2)^{j-m-1} (u-b2)^{-j}
            resid = z
            new2 = [z] * len(lst)
            dpow = dinv  # (b-b2)^{-1}
            # precompute powers (b-b2)^{-t}
            powers = [dinv]
            for _ in range(len(lst)):
                powers.append(powers[-1] * dinv)
            for m, c in enumerate(lst, start=1):
                if c.is_exact_zero:
                    continue
                resid = resid + c * powers[m - 1]
                for j in range(1, m + 1):
                    new2[j - 1] = new2[j - 1] - c * powers[m - j]
            out = out + RigidFunction(dom, [], {key: [resid], key2: new2}, None)
        return out

    # -- calculus -----------------------------------------------------------------

    def derivative(self) -> "RigidFunction":
        dom = self.dom
        ps = [self.ps[n].mul_int(n) for n in range(1, len(self.ps))]
        tails = {}
        dropped = None
        for key, lst in self.tails.items():
            new = [self._zero()]
            for m, c in enumerate(lst, start=1):
                if m + 1 <= dom.P:
                    while len(new) < m + 1:
                        new.append(self._zero())
                    new[m] = new[m] + c.mul_int(-m)
                elif not c.is_exact_zero:
                    dropped = _min_eps(dropped, c.valuation_lower_bound())
            tails[key] = new
        return RigidFunction(dom, ps, tails, _min_eps(self.eps, dropped))

    # -- evaluation ------------------------------------------------------------------

    def value_at(self, z: PAdic) -> PAdic:
        """Value at a point of the domain (unit distance from every pole centre)."""
        ctx = self.dom.ctx
        if not z.is_exact_zero and z.valuation_lower_bound() < 0:
            raise OutOfDomain("point outside the closed unit disc")
        acc = ctx.zero() if self.eps is None else ctx.o(self.eps)
        if self.ps:
            horner = self.ps[-1]
            for c in reversed(self.ps[:-1]):
                horner = horner * z + c
            acc = acc + horner
        for key, lst in self.tails.items():
            b = self.dom.centers[key]
            d = z - b
            if d.is_zero_to_precision() or d.valuation() != 0:
                raise OutOfDomain(f"evaluation at |z - b| < 1 for pole centre {key}")
            dinv = d.inv()
            power = ctx.one()
            for c in lst:
                power = power * dinv
                acc = acc + c * power
        return acc

    def value_at_anchor(self) -> PAdic:
        return self.value_at(self.dom.ctx.zero())

    def residue_at(self, key) -> PAdic:
        """Coefficient of (u-b)^{-1}: the residue of self*du at the centre."""
        lst = self.tails.get(key)
        return lst[0] if lst else self._zero()

    def is_small(self, floor: int) -> bool:
        """All stored coefficients vanish to precision or have valuation >= floor."""
        for c in self.ps:
            if not c.is_zero_to_precision() and c.valuation() < floor:
                return False
        for lst in self.tails.values():
            for c in lst:
                if not c.is_zero_to_precision() and c.valuation() < floor:
                    return False
        return True

    def __repr__(self):
        tails = {k: len(v) for k, v in self.tails.items()}
        return (
            f"RigidFunction({self.dom.label}, deg={len(self.ps) - 1}, "
            f"tails={tails}, eps={self.eps})"
        )

    def to_json_dict(self) -> dict:
        return {
            "label": self.dom.label,
            "eps": self.eps,
            "ps": [c.to_json_dict() for c in self.ps],
            "tails": {
                str(k): [c.to_json_dict() for c in lst] for k, lst in self.tails.items()
            },
        }


def _ps_div_linear(ctx: Zp, ps: list, b: PAdic):
    """Write sum a_n u^n = (u - b) q(u) + r by synthetic division."""
    if not ps:
        return [], ctx.zero()
    q = [ctx.zero()] * (len(ps) - 1)
    carry = ctx.zero()
    for n in range(len(ps) - 1, 0, -1):
        carry = ps[n] + carry * b
        q[n - 1] = carry
    r = ps[0] + carry * b
    return q, r


def _mul_ps_tail(dom: RigidDomain, ps: list, key, tail: list) -> RigidFunction:
    """Exact product (sum a_n u^n) * (sum_m tail[m-1] (u-b)^{-m})."""
    ctx = dom.ctx
    b = dom.centers[key]
    depth = len(tail)
    cur = list(ps)
    rs = []  # r_1 .. r_depth with ps = cur_m (u-b)^m + sum r_i (u-b)^{i-1}
    curs = [list(ps)]
    for _ in range(depth):
        cur, r = _ps_div_linear(ctx, cur, b)
        rs.append(r)
        curs.append(list(cur))
    out_ps = [ctx.zero()] * max(1, len(ps))
    out_tail = [ctx.zero()] * depth
    for m in range(1, depth + 1):
        beta = tail[m - 1]
        if beta.is_exact_zero:
            continue
        # ps*(u-b)^{-m} = curs[m] + sum_{i=1..m} rs[i-1] (u-b)^{i-1-m}
        for n, a in enumerate(curs[m]):
            out_ps[n] = out_ps[n] + a * beta if n < len(out_ps) else out_ps[n]
        for i in range(1, m + 1):
            order = m + 1 - i
            out_tail[order - 1] = out_tail[order - 1] + rs[i - 1] * beta
    return RigidFunction(dom, out_ps, {key: out_tail}, None)


def rigid_primitive(
    form: RigidFunction, res_floor: int, anchored: bool = True
) -> RigidFunction:
    """Primitive of form*du on the domain, normalized to vanish at the anchor.

    Requires every residue (simple-pole coefficient at an interior marked
    point, order-one tail coefficient at an excluded disc) to vanish to
    precision or below `res_floor`; such residual coefficients are dropped
    and charged to eps with one digit of credit (their primitives are logs
    of units, of valuation one more than the coefficient).
    """
    dom = form.dom
    ctx = dom.ctx
    eps = form.eps
    tails_in: dict = {}
    for key, lst in form.tails.items():
        lst = list(lst)
        if lst:
            c1 = lst[0]
            if not c1.is_exact_zero:
                if c1.is_regular and c1.valuation() < res_floor:
                    raise NonzeroResidue(key, c1)
                eps = _min_eps(eps, (c1.N if c1.is_big_oh else c1.valuation()) + 1)
            lst[0] = ctx.zero()
        if key in dom.interior and any(
            not c.is_zero_to_precision() and c.valuation() < res_floor for c in lst[1:]
        ):
            raise NonzeroResidue(key, "higher-order pole at an interior point")
        tails_in[key] = lst
    charge = ilog_p(max(dom.T, dom.P) + 2, ctx.p)
    if eps is not None:
        eps -= charge
    ps = [ctx.zero()]
    dropped = None
    for n, a in enumerate(form.ps):
        if n + 1 <= dom.T:
            while len(ps) <= n + 1:
                ps.append(ctx.zero())
            ps[n + 1] = a.div_int(n + 1)
        elif not a.is_exact_zero:
            dropped = _min_eps(dropped, a.valuation_lower_bound())
    tails = {}
    for key, lst in tails_in.items():
        new = [ctx.zero()] * max(0, len(lst) - 1)
        for m, c in enumerate(lst, start=1):
            if m < 2 or c.is_exact_zero:
                continue
            new[m - 2] = new[m - 2] - c.div_int(m - 1)
        tails[key] = new
    out = RigidFunction(dom, ps, tails, _min_eps(eps, dropped))
    if anchored:
        val = out.value_at_anchor()
        out = out - RigidFunction.constant(dom, val)
    return out


def rigid_log_unit(q: RigidFunction, floor: int) -> RigidFunction:
    """log of a function congruent to 1 away from the marked discs.

    Computed as -sum (1-q)^n / n; requires every coefficient of 1 - q to
    have positive valuation (the reduction-is-1 check).
    """
    dom = q.dom
    ctx = dom.ctx
    x = RigidFunction.constant(dom, ctx.one()) - q
    bad = x.vmin() < 1
    if not bad:
        c0 = x.ps[0] if x.ps else ctx.zero()
        _ = c0
    if bad:
        raise NotAUnitNearOne("1 - q has a coefficient of valuation < 1")
    n_max = 1
    while n_max - ilog_p(n_max, ctx.p) <= floor:
        n_max += 1
    acc = RigidFunction.zero(dom)
    power = RigidFunction.constant(dom, ctx.one())
    for n in range(1, n_max + 1):
        power = power * x
        acc = acc + power.mul_padic(ctx.frac(-1).div_int(n))
    tail = (n_max + 1) - ilog_p(n_max + 1, ctx.p)
    acc.eps = _min_eps(acc.eps, tail)
    return acc
