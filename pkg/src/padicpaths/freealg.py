"""Weight-truncated noncommutative series over a finite letter alphabet.

Words are tuples of letter indices 1..s.  The display convention, pinned here
and cited everywhere else: the leftmost letter of a word is the outermost
integration step of the corresponding iterated integral.  Coefficients live
in any ring with +, unary -, *, and (where inversion is needed) .inv();
PAdic, LogSeries and RigidFunction all qualify.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

from .errors import NonUnitConstantTerm, WeightExceedsTruncation
from .padic import PAdic

Word = tuple  # tuple[int, ...]

EMPTY: Word = ()


def word_str(w: Word) -> str:
    """Display form over the alphabet A, B, C, ... (letter 1 = A)."""
    return "".join(chr(ord("A") + i - 1) for i in w) if w else "1"


def word_from_str(s: str) -> Word:
    if s in ("1", ""):
        return EMPTY
    return tuple(ord(c) - ord("A") + 1 for c in s)


def all_words(s: int, max_weight: int):
    """All words on s letters of weight 0..max_weight, by increasing weight."""
    for w in range(max_weight + 1):
        yield from product(range(1, s + 1), repeat=w)


class NcSeries:
    """Finitely supported map word -> coefficient, truncated at weight N."""

    __slots__ = ("N", "c")

    def __init__(self, N: int, coeffs: dict | None = None):
        self.N = N
        self.c = {}
        if coeffs:
            for w, x in coeffs.items():
                if len(w) <= N:
                    self.c[w] = x

    @staticmethod
    def one(N: int, one_coeff) -> "NcSeries":
        return NcSeries(N, {EMPTY: one_coeff})

    @staticmethod
    def zero(N: int) -> "NcSeries":
        return NcSeries(N)

    def coeff(self, w: Word, zero=None):
        """Coefficient of w; `zero` is returned for absent words."""
        if len(w) > self.N:
            raise WeightExceedsTruncation(f"|{word_str(w)}| > N = {self.N}")
        return self.c.get(w, zero)

    def words(self):
        return self.c.keys()

    def __add__(self, other: "NcSeries") -> "NcSeries":
        out = NcSeries(min(self.N, other.N))
        for w, x in self.c.items():
            if len(w) <= out.N:
                out.c[w] = x
        for w, y in other.c.items():
            if len(w) > out.N:
                continue
            out.c[w] = out.c[w] + y if w in out.c else y
        return out

    def __neg__(self) -> "NcSeries":
        return NcSeries(self.N, {w: -x for w, x in self.c.items()})

    def __sub__(self, other: "NcSeries") -> "NcSeries":
        return self + (-other)

    def __mul__(self, other: "NcSeries") -> "NcSeries":
        """Concatenation product, truncated at the shared weight bound."""
        out = NcSeries(min(self.N, other.N))
        for u, x in self.c.items():
            if len(u) > out.N:
                continue
            for v, y in other.c.items():
                if len(u) + len(v) > out.N:
                    continue
                w = u + v
                t = x * y
                out.c[w] = out.c[w] + t if w in out.c else t
        return out

    def map_coefficients(self, fn) -> "NcSeries":
        return NcSeries(self.N, {w: fn(x) for w, x in self.c.items()})

    def scale_word_fn(self, fn) -> "NcSeries":
        """Multiply the coefficient of each word w by the scalar fn(w)."""
        out = NcSeries(self.N)
        for w, x in self.c.items():
            out.c[w] = x * fn(w)
        return out

    def truncated(self, N: int) -> "NcSeries":
        return NcSeries(N, self.c)

    def __repr__(self):
        items = sorted(self.c.items(), key=lambda t: (len(t[0]), t[0]))
        body = " + ".join(f"({x})*{word_str(w)}" for w, x in items[:12])
        more = "" if len(items) <= 12 else f" + ... ({len(items)} terms)"
        return f"NcSeries[N={self.N}]({body}{more})"

    def to_json_dict(self) -> dict:
        out = {}
        for w in sorted(self.c, key=lambda t: (len(t), t)):
            x = self.c[w]
            out[word_str(w)] = x.to_json_dict() if hasattr(x, "to_json_dict") else repr(x)
        return out


def nc_mul(x: NcSeries, y: NcSeries) -> NcSeries:
    return x * y


def nc_inverse(g: NcSeries) -> NcSeries:
    """Inverse for the concatenation product.

    Requires an invertible constant term; with c0 the empty-word coefficient,
    g^-1 = (sum_k (1 - g/c0)^k) / c0, a finite sum by nilpotence.
    """
    c0 = g.c.get(EMPTY)
    if c0 is None:
        raise NonUnitConstantTerm("constant term absent")
    try:
        c0i = c0.inv()
    except Exception as exc:
        raise NonUnitConstantTerm(f"constant term not a unit: {exc}") from exc
    one = c0 * c0i
    # h = 1 - g * c0^{-1} has zero constant term
    h = NcSeries(g.N, {w: -(x * c0i) for w, x in g.c.items() if w != EMPTY})
    acc = NcSeries.one(g.N, one)
    power = NcSeries.one(g.N, one)
    for _ in range(g.N):
        power = power * h
        if not power.c:
            break
        acc = acc + power
    return acc.map_coefficients(lambda x: c0i * x)


def letter_scale(g: NcSeries, factors) -> NcSeries:
    """Scale the coefficient of each word by the product of per-letter factors.

    `factors` maps letter index -> exact integer.  With every factor equal to
    p this is the Frobenius semilinearization: weight-n terms gain valuation n.
    """
    out = NcSeries(g.N)
    for w, x in g.c.items():
        m = 1
        for letter in w:
            m *= factors[letter]
        out.c[w] = x.mul_int(m) if hasattr(x, "mul_int") else x * m
    return out


def sigma_p(g: NcSeries, p: int) -> NcSeries:
    """letter_scale with every factor p."""
    out = NcSeries(g.N)
    for w, x in g.c.items():
        out.c[w] = x.mul_int(p ** len(w)) if hasattr(x, "mul_int") else x * p ** len(w)
    return out


@lru_cache(maxsize=None)
def shuffle(u: Word, v: Word) -> dict:
    """All riffle interleavings of u and v with multiplicity."""
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out: dict = {}
    for w, m in shuffle(u[1:], v).items():
        key = (u[0],) + w
        out[key] = out.get(key, 0) + m
    for w, m in shuffle(u, v[1:]).items():
        key = (v[0],) + w
        out[key] = out.get(key, 0) + m
    return out


class GroupLikeReport:
    """Result of the shuffle-character test on an NcSeries over PAdic."""

    __slots__ = ("ok", "pairs_checked", "worst_pair", "worst_valuation", "shared_precision")

    def __init__(self, ok, pairs_checked, worst_pair, worst_valuation, shared_precision):
        self.ok = ok
        self.pairs_checked = pairs_checked
        self.worst_pair = worst_pair
        self.worst_valuation = worst_valuation
        self.shared_precision = shared_precision

    def __repr__(self):
        status = "group-like" if self.ok else f"VIOLATED at {self.worst_pair}"
        return (
            f"GroupLikeReport({status}, pairs={self.pairs_checked}, "
            f"worst_violation_valuation={self.worst_valuation})"
        )


def is_group_like(g: NcSeries, s: int, zero: PAdic | None = None) -> GroupLikeReport:
    """Check <g,u><g,v> = sum over u-shuffle-v of <g,w> for all small pairs.

    Pairs run over nonempty words with |u| + |v| <= g.N.  Violations are
    reported with the valuation at which the identity first fails.
    """
    words = [w for w in all_words(s, g.N) if w]
    if zero is None:
        some = next(iter(g.c.values()))
        zero = PAdic.exact_zero(some.p)
    ok = True
    pairs = 0
    worst_pair = None
    worst_val = None
    shared = None
    for u in words:
        for v in words:
            if len(u) + len(v) > g.N or u > v:
                continue
            pairs += 1
            lhs = g.coeff(u, zero) * g.coeff(v, zero)
            rhs = zero
            for w, m in shuffle(u, v).items():
                rhs = rhs + g.coeff(w, zero).mul_int(m)
            diff = lhs - rhs
            if diff.is_zero_to_precision():
                if diff.is_big_oh and (shared is None or diff.N < shared):
                    shared = diff.N
                continue
            ok = False
            val = diff.valuation()
            if worst_val is None or val < worst_val:
                worst_val = val
                worst_pair = (word_str(u), word_str(v))
    return GroupLikeReport(ok, pairs, worst_pair, worst_val, shared)


def exp_letter(N: int, letter: int, c: PAdic, one: PAdic) -> NcSeries:
    """exp(c * e_letter) truncated at weight N: sum c^k/k! e_letter^k."""
    out = NcSeries.one(N, one)
    term = one
    for k in range(1, N + 1):
        term = (term * c).div_int(k)
        out.c[(letter,) * k] = term
    return out
