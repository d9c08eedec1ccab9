"""Truncated p-adic arithmetic with per-value absolute-precision tracking.

A value is one of three things:

* an exact zero (all digits known, all zero),
* a "big oh" O(p^N): nothing known except that the value lies in p^N Z_p,
* a regular value p^v * u known modulo p^N, with u a unit stored mod p^(N-v)
  and v < N.

Every operation propagates N so the result never claims more digits than the
inputs justify:

    N(x*y) = min(N(x) + v(y), N(y) + v(x))
    N(x+y) = min(N(x), N(y))

For a big-oh value the valuation lower bound v = N is used in these rules,
which keeps them correct (never optimistic).  Cancellation yields a big-oh
value, not an error; operations that *need* digits (division by, logarithm
of, unit extraction) raise PrecisionExhausted instead of silently truncating.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import DivisionByZero, OutOfDomain, PrecisionExhausted


def vp_int(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of integer 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def digit_sum(n: int, p: int) -> int:
    s = 0
    while n:
        n, r = divmod(n, p)
        s += r
    return s


def vp_factorial(n: int, p: int) -> int:
    """Legendre's formula v_p(n!) = (n - s_p(n)) / (p - 1)."""
    return (n - digit_sum(n, p)) // (p - 1)


def ilog_p(n: int, p: int) -> int:
    """floor(log_p(n)) for n >= 1."""
    k = 0
    while n >= p:
        n //= p
        k += 1
    return k


def dp_ideal_valuation(r: int, p: int) -> int:
    """Minimal valuation of the ideal of Z_p generated by p^j/j! for j >= r.

    Returns min_{j >= r} (j - v_p(j!)) by finite search.  For p >= 3 the
    lower bound j - v_p(j!) >= j*(p-2)/(p-1) bounds the search window; for
    p = 2 the quantity equals the binary digit sum s_2(j), whose minimum over
    j >= r >= 1 is 1 (attained at the next power of two).
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    if r == 0:
        return 0
    if p == 2:
        return 1
    best = r - vp_factorial(r, p)
    j = r + 1
    # stop once the lower bound j*(p-2)/(p-1) rules out improvements
    while j * (p - 2) < best * (p - 1):
        cand = j - vp_factorial(j, p)
        if cand < best:
            best = cand
        j += 1
    return best


class PAdic:
    """A p-adic number with exact digit and precision bookkeeping."""

    __slots__ = ("p", "u", "v", "N")

    def __init__(self, p: int, u: int, v: int, N: int | None):
        # invariants: exact zero <=> u == 0 and N is None
        #             big oh     <=> u == 0 and N is not None (then v == N)
        #             regular    <=> u unit mod p^(N-v), 0 < u < p^(N-v), v < N
        self.p = p
        self.u = u
        self.v = v
        self.N = N

    # -- constructors ---------------------------------------------------

    @staticmethod
    def exact_zero(p: int) -> "PAdic":
        return PAdic(p, 0, 0, None)

    @staticmethod
    def big_oh(p: int, N: int) -> "PAdic":
        return PAdic(p, 0, N, N)

    @staticmethod
    def from_int(p: int, n: int, N: int) -> "PAdic":
        """The value of n known modulo p^N (n = 0 gives O(p^N))."""
        return PAdic._normalize(p, n, N)

    @staticmethod
    def from_fraction(p: int, q: Fraction | int, N: int) -> "PAdic":
        q = Fraction(q)
        if q == 0:
            return PAdic.big_oh(p, N)
        num, den = q.numerator, q.denominator
        vden = vp_int(den, p) if den % p == 0 else 0
        den //= p**vden
        vnum = vp_int(num, p) if num % p == 0 else 0
        v = vnum - vden
        m = N - v
        if m <= 0:
            return PAdic.big_oh(p, N)
        u = (num // p**vnum) * pow(den, -1, p**m) % p**m
        return PAdic(p, u, v, N)

    @staticmethod
    def _normalize(p: int, value: int, N: int) -> "PAdic":
        """Regular value from an integer representative known mod p^N."""
        return PAdic._normalize_shifted(p, value, 0, N)

    @staticmethod
    def _normalize_shifted(p: int, value: int, base_v: int, N: int) -> "PAdic":
        """Value p^base_v * value, with `value` an integer known mod p^(N - base_v)."""
        m = N - base_v
        if m <= 0:
            return PAdic.big_oh(p, N)
        r = value % p**m
        if r == 0:
            return PAdic.big_oh(p, N)
        w = vp_int(r, p)
        v = base_v + w
        return PAdic(p, (r // p**w) % p ** (N - v), v, N)

    # -- predicates and views ---------------------------------------------

    @property
    def is_exact_zero(self) -> bool:
        return self.u == 0 and self.N is None

    @property
    def is_big_oh(self) -> bool:
        return self.u == 0 and self.N is not None

    @property
    def is_regular(self) -> bool:
        return self.u != 0

    def is_zero_to_precision(self) -> bool:
        """True when every known digit is zero."""
        return self.u == 0

    def valuation_lower_bound(self) -> int:
        """v for regular values, N for big-oh; raises on exact zero."""
        if self.is_exact_zero:
            raise PrecisionExhausted("exact zero has infinite valuation")
        return self.v

    def valuation(self) -> int:
        """Exact valuation; defined for regular values only."""
        if not self.is_regular:
            raise PrecisionExhausted("valuation undetermined (no known digits)")
        return self.v

    def rep_from(self, base_v: int) -> int:
        """Integer u * p^(v - base_v); requires base_v <= v (0 for zeros)."""
        if self.u == 0:
            return 0
        return self.u * self.p ** (self.v - base_v)

    def lift(self) -> int:
        """Representative reduced mod p^N (requires v >= 0 and finite N)."""
        if self.is_exact_zero:
            return 0
        if self.u != 0 and self.v < 0:
            raise PrecisionExhausted("no integer lift for negative valuation")
        return self.rep_from(0) % self.p**self.N

    def residue(self) -> int:
        """Reduction mod p (requires a digit of information at level 1)."""
        if self.is_exact_zero:
            return 0
        if self.N < 1 or (self.u != 0 and self.v < 0):
            raise PrecisionExhausted("no residue available")
        return self.rep_from(0) % self.p

    def unit_part(self) -> "PAdic":
        """The unit u with self = p^v * u, at the precision actually known."""
        if not self.is_regular:
            raise PrecisionExhausted("no unit part to extract")
        return PAdic(self.p, self.u, 0, self.N - self.v)

    def at_precision(self, N: int) -> "PAdic":
        """Truncate to absolute precision N (never invents digits)."""
        if self.is_exact_zero:
            return self
        if N > self.N:
            raise PrecisionExhausted(f"cannot raise precision {self.N} -> {N}")
        if self.u == 0:
            return PAdic.big_oh(self.p, N)
        return PAdic._normalize_shifted(self.p, self.u, self.v, N)

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other: "PAdic"):
        if self.p != other.p:
            raise ValueError("mixed primes")

    def __add__(self, other: "PAdic") -> "PAdic":
        self._check(other)
        if self.is_exact_zero:
            return other
        if other.is_exact_zero:
            return self
        N = min(self.N, other.N)
        base = min(self.v, other.v)
        return PAdic._normalize_shifted(
            self.p, self.rep_from(base) + other.rep_from(base), base, N
        )

    def __neg__(self) -> "PAdic":
        if self.u == 0:
            return self
        m = self.N - self.v
        return PAdic(self.p, (-self.u) % self.p**m, self.v, self.N)

    def __sub__(self, other: "PAdic") -> "PAdic":
        return self + (-other)

    def __mul__(self, other: "PAdic") -> "PAdic":
        self._check(other)
        if self.is_exact_zero or other.is_exact_zero:
            return PAdic.exact_zero(self.p)
        N = min(self.N + other.v, other.N + self.v)
        if self.u == 0 or other.u == 0:
            return PAdic.big_oh(self.p, N)
        v = self.v + other.v
        m = N - v
        return PAdic(self.p, (self.u * other.u) % self.p**m, v, N)

    def mul_int(self, n: int) -> "PAdic":
        """Multiply by an exact integer."""
        if n == 0:
            return PAdic.exact_zero(self.p)
        if self.is_exact_zero:
            return self
        w = vp_int(n, self.p) if n % self.p == 0 else 0
        if self.u == 0:
            return PAdic.big_oh(self.p, self.N + w)
        unit = n // self.p**w
        v = self.v + w
        N = self.N + w
        return PAdic(self.p, (self.u * unit) % self.p ** (N - v), v, N)

    def div_int(self, n: int) -> "PAdic":
        """Divide by an exact nonzero integer."""
        if n == 0:
            raise DivisionByZero("division by integer 0")
        if self.is_exact_zero:
            return self
        neg = n < 0
        n = abs(n)
        w = vp_int(n, self.p) if n % self.p == 0 else 0
        N = self.N - w
        if self.u == 0:
            if N <= 0:
                raise PrecisionExhausted("big-oh value lost all digits in division")
            return PAdic.big_oh(self.p, N)
        v = self.v - w
        m = N - v
        unit = (n // self.p**w) % self.p**m
        u = self.u % self.p**m * pow(unit, -1, self.p**m) % self.p**m
        out = PAdic(self.p, u, v, N)
        return -out if neg else out

    def __truediv__(self, other: "PAdic") -> "PAdic":
        self._check(other)
        if other.is_exact_zero:
            raise DivisionByZero("division by exact zero")
        if not other.is_regular:
            raise PrecisionExhausted("division by a value with no known digits")
        if self.is_exact_zero:
            return self
        if self.u == 0:
            return PAdic.big_oh(self.p, self.N - other.v)
        v = self.v - other.v
        m = min(self.N - self.v, other.N - other.v)
        if m <= 0:
            return PAdic.big_oh(self.p, v)
        pm = self.p**m
        u = self.u % pm * pow(other.u % pm, -1, pm) % pm
        return PAdic(self.p, u, v, v + m)

    def inv(self) -> "PAdic":
        if not self.is_regular:
            raise DivisionByZero("inverse of zero (to precision)")
        m = self.N - self.v
        pm = self.p**m
        return PAdic(self.p, pow(self.u, -1, pm), -self.v, m - self.v)

    def pow_int(self, k: int) -> "PAdic":
        """self**k for k >= 1 (use ctx.one() for the empty product)."""
        if k < 1:
            raise ValueError("pow_int needs k >= 1")
        result, base = None, self
        while True:
            if k & 1:
                result = base if result is None else result * base
            k >>= 1
            if not k:
                return result
            base = base * base

    # -- comparison / display --------------------------------------------

    def agrees_with(self, other: "PAdic") -> bool:
        """True when self - other vanishes to the shared precision."""
        return (self - other).is_zero_to_precision()

    def __eq__(self, other):  # structural: same digits, same precision
        if not isinstance(other, PAdic):
            return NotImplemented
        return (self.p, self.u, self.v, self.N) == (other.p, other.u, other.v, other.N)

    def __hash__(self):
        return hash((self.p, self.u, self.v, self.N))

    def __repr__(self):
        if self.is_exact_zero:
            return "0"
        if self.is_big_oh:
            return f"O({self.p}^{self.N})"
        return f"{self.p}^{self.v}*{self.u} + O({self.p}^{self.N})"

    def to_json_dict(self) -> dict:
        if self.is_exact_zero:
            return {"p": str(self.p), "zero": "exact"}
        return {"p": str(self.p), "u": str(self.u), "v": str(self.v), "N": str(self.N)}

    @staticmethod
    def from_json_dict(d: dict) -> "PAdic":
        p = int(d["p"])
        if d.get("zero") == "exact":
            return PAdic.exact_zero(p)
        u, v, N = int(d["u"]), int(d["v"]), int(d["N"])
        if u == 0:
            return PAdic.big_oh(p, N)
        return PAdic(p, u, v, N)


def padic_dot(pairs) -> "PAdic | None":
    """Sum of x*y over (x, y) pairs with exact precision propagation.

    Fast path for series convolutions: accumulates unit products once at a
    common valuation base and takes the precision minimum over the nonzero
    terms.  Returns None when every term involves an exact zero.
    """
    terms = []
    N = None
    base = None
    p = None
    for x, y in pairs:
        if x.is_exact_zero or y.is_exact_zero:
            continue
        p = x.p
        n_xy = min(x.N + y.v, y.N + x.v)
        if N is None or n_xy < N:
            N = n_xy
        if x.u == 0 or y.u == 0:
            continue
        v = x.v + y.v
        if base is None or v < base:
            base = v
        terms.append((x.u * y.u, v))
    if N is None:
        return None
    if base is None:
        return PAdic.big_oh(p, N)
    acc = 0
    for uu, v in terms:
        acc += uu * p ** (v - base)
    return PAdic._normalize_shifted(p, acc, base, N)


class Zp:
    """Arithmetic context: a fixed prime and a default working precision.

    Exact integer/rational inputs enter at the context precision; results
    degrade from there by the propagation rules.  Exact zero stays exact.
    """

    def __init__(self, p: int, prec: int):
        if p < 2:
            raise ValueError("p must be >= 2")
        if prec < 1:
            raise ValueError("prec must be >= 1")
        self.p = p
        self.prec = prec

    def __repr__(self):
        return f"Zp({self.p}, prec={self.prec})"

    def zero(self) -> PAdic:
        return PAdic.exact_zero(self.p)

    def o(self, N: int | None = None) -> PAdic:
        return PAdic.big_oh(self.p, self.prec if N is None else N)

    def one(self) -> PAdic:
        return PAdic.from_int(self.p, 1, self.prec)

    def int_(self, n: int, N: int | None = None) -> PAdic:
        if n == 0:
            return self.zero()
        return PAdic.from_int(self.p, n, self.prec if N is None else N)

    def frac(self, q: Fraction | int, N: int | None = None) -> PAdic:
        q = Fraction(q)
        if q == 0:
            return self.zero()
        return PAdic.from_fraction(self.p, q, self.prec if N is None else N)

    # -- Teichmuller lifts -------------------------------------------------

    def teichmuller(self, c: int, m: int | None = None) -> PAdic:
        """The (p-1)-st root of unity congruent to c mod p, mod p^m.

        Iterating x -> x^p gains one correct digit per step.
        """
        m = self.prec if m is None else m
        c = c % self.p
        if c == 0:
            raise ValueError("teichmuller lift needs a nonzero residue")
        pm = self.p**m
        x = c
        for _ in range(m):
            x = pow(x, self.p, pm)
        return PAdic.from_int(self.p, x, m)

    def teichmuller_of(self, x: PAdic) -> PAdic:
        """Teichmuller representative of the unit x's residue."""
        if not x.is_regular or x.v != 0:
            raise ValueError("teichmuller_of expects a unit")
        return self.teichmuller(x.u % self.p, x.N)

    # -- logarithm ----------------------------------------------------------

    def log(self, x: PAdic, branch: "PAdic | int | Fraction" = 0) -> PAdic:
        """Logarithm extended to Q_p^* by the branch choice log(p) = branch.

        Decomposes x = p^v * c * g with c Teichmuller and g = 1 mod p, and
        returns v*branch + log(g); log(c) = 0 since c is torsion.  For p = 2
        the series is applied to g^2 (= 1 mod 8) and halved, which costs one
        digit of reported precision.
        """
        if x.is_exact_zero:
            raise OutOfDomain("log of exact zero")
        if not x.is_regular:
            raise PrecisionExhausted("log needs at least one known digit")
        branch_p = branch if isinstance(branch, PAdic) else self.frac(Fraction(branch))
        if branch_p.is_regular and branch_p.valuation() < 1:
            raise ValueError("log(p) branch must lie in pZ_p")
        g0 = x.unit_part()
        w = self.teichmuller(g0.u % self.p, g0.N)
        g = g0 / w
        if self.p == 2:
            s = self._log_one_series(g * g).div_int(2)
        else:
            s = self._log_one_series(g)
        if x.v == 0:
            return s
        return s + branch_p.mul_int(x.v)

    def _log_one_series(self, g: PAdic) -> PAdic:
        """-sum (1-g)^n / n for g = 1 (mod p; mod 8 when p = 2)."""
        one = PAdic.from_int(self.p, 1, g.N)
        t = one - g
        if t.is_zero_to_precision():
            # all stored digits of g equal 1: nothing beyond O(p^N) is claimed
            return PAdic.big_oh(self.p, g.N)
        lam = t.valuation()
        if lam < 1 or (self.p == 2 and lam < 3):
            raise ValueError("log series requires g = 1 mod p (mod 8 for p = 2)")
        target = g.N
        # terms have valuation >= n*lam - v_p(n) >= n*lam - ilog_p(n),
        # an increasing bound; stop once it clears the target
        n_max = 1
        while n_max * lam - ilog_p(n_max, self.p) <= target:
            n_max += 1
        acc = PAdic.exact_zero(self.p)
        power = one
        for n in range(1, n_max + 1):
            power = power * t
            acc = acc + power.div_int(n)
        tail = (n_max + 1) * lam - ilog_p(n_max + 1, self.p)
        return -(acc + PAdic.big_oh(self.p, tail))
