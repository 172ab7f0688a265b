"""Formal pseudo-differential operators ``sum_k a_k D^k`` with truncated negative tail.

Coefficients are either :class:`~qelastica.jetalg.JetPoly` (symbolic mode) or
:class:`TSeries` (truncated power series in one variable ``t1``, series mode).
Both provide ``+``, ``*``, scalar multiplication and ``derivative()``.

Every operator carries ``low``: the lowest degree whose coefficient is known
exactly (``None`` for finite differential operators, which are exact in every
degree).  Composition propagates it, so the truncation loss of each operation is
explicit rather than guessed.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Callable, Iterable, Mapping

import numpy as np

from .jetalg import JetPoly, u0


class DepthUnderflow(ValueError):
    """A requested degree lies below the exactly known part of an operand."""


class NotMultiplication(ValueError):
    """A commutator expected to be of degree zero has other components."""


class TruncationTooShallow(ValueError):
    """Series truncation too short for the requested dressing order."""


def binom(n: int, r: int) -> Fraction:
    """Generalized binomial ``n (n-1) ... (n-r+1) / r!`` for any integer n."""
    num = 1
    for i in range(r):
        num *= n - i
    return Fraction(num, factorial(r))


def _is_zero(c) -> bool:
    if isinstance(c, (int, Fraction)):
        return c == 0
    return not c


class TSeries:
    """Truncated power series ``sum_{j<=order} c_j t^j`` with complex coefficients.

    ``order`` is the highest power known exactly; differentiation lowers it by
    one, products keep the minimum.
    """

    __slots__ = ("c", "order")

    def __init__(self, coeffs: Iterable[complex], order: int | None = None):
        c = np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                       dtype=complex)
        if order is None:
            order = len(c) - 1
        n = order + 1
        if len(c) < n:
            c = np.concatenate([c, np.zeros(n - len(c), dtype=complex)])
        self.c = c[:n].copy()
        self.order = order

    @classmethod
    def zero(cls, order: int) -> "TSeries":
        return cls(np.zeros(order + 1), order)

    def _align(self, other) -> tuple[np.ndarray, np.ndarray, int]:
        if isinstance(other, (int, float, complex, Fraction)):
            other = TSeries([complex(other)], self.order)
        order = min(self.order, other.order)
        return self.c[: order + 1], other.c[: order + 1], order

    def __add__(self, other) -> "TSeries":
        a, b, order = self._align(other)
        return TSeries(a + b, order)

    __radd__ = __add__

    def __neg__(self) -> "TSeries":
        return TSeries(-self.c, self.order)

    def __sub__(self, other) -> "TSeries":
        return self + (-other)

    def __rsub__(self, other) -> "TSeries":
        return (-self) + other

    def __mul__(self, other) -> "TSeries":
        if isinstance(other, (int, float, complex, Fraction)):
            return TSeries(self.c * complex(other), self.order)
        a, b, order = self._align(other)
        if order < 0:
            return TSeries(np.zeros(0), -1)
        return TSeries(np.convolve(a, b)[: order + 1], order)

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return bool(np.any(self.c != 0))

    def derivative(self) -> "TSeries":
        if self.order <= 0:
            return TSeries(np.zeros(0), -1)
        j = np.arange(1, self.order + 1)
        return TSeries(self.c[1:] * j, self.order - 1)

    def integral(self, constant: complex = 0.0, cap: int | None = None) -> "TSeries":
        """Antiderivative; the result is exact to ``order + 1`` (capped at ``cap``)."""
        j = np.arange(1, self.order + 2)
        c = np.concatenate([[constant], self.c / j])
        order = self.order + 1 if cap is None else min(cap, self.order + 1)
        return TSeries(c, order)

    def max_abs(self, upto: int | None = None) -> float:
        upto = self.order if upto is None else min(upto, self.order)
        return float(np.max(np.abs(self.c[: upto + 1]))) if upto >= 0 else 0.0

    def __call__(self, t: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(t, self.c))

    def __repr__(self) -> str:
        return f"TSeries({np.array2string(self.c, precision=4)}, order={self.order})"


def _derivatives(c, n: int) -> list:
    out = [c]
    for _ in range(n):
        c = c.derivative() if not isinstance(c, (int, Fraction)) else 0
        out.append(c)
    return out


class PsiDO:
    """Operator ``sum_k coeffs[k] D^k``; degrees below ``low`` are unknown.

    ``low=None`` marks an exactly known finite operator.
    """

    __slots__ = ("coeffs", "low")

    def __init__(self, coeffs: Mapping[int, object], low: int | None = None):
        self.coeffs = {
            k: c for k, c in coeffs.items() if not _is_zero(c) and (low is None or k >= low)
        }
        self.low = low

    # -- constructors -----------------------------------------------------
    @classmethod
    def d(cls, power: int = 1, coeff=None) -> "PsiDO":
        one = JetPoly.const(1) if coeff is None else coeff
        return cls({power: one}, None if power >= 0 else power)

    @classmethod
    def mult(cls, a) -> "PsiDO":
        return cls({0: a})

    @classmethod
    def lax_L(cls, u=u0) -> "PsiDO":
        """``L = D^2 + u``."""
        one = JetPoly.const(1) if isinstance(u, JetPoly) else u * 0 + 1
        return cls({2: one, 0: u})

    # -- structure --------------------------------------------------------
    @property
    def top(self) -> int:
        return max(self.coeffs, default=-(10**9))

    @property
    def depth(self) -> int | None:
        return None if self.low is None else -self.low

    def coeff(self, k: int):
        if self.low is not None and k < self.low:
            raise DepthUnderflow(f"degree {k} below known range (low={self.low})")
        return self.coeffs.get(k, 0)

    def __getitem__(self, k: int):
        return self.coeff(k)

    def truncate(self, low: int) -> "PsiDO":
        if self.low is not None and low < self.low:
            raise DepthUnderflow(f"cannot extend operator to degree {low} (low={self.low})")
        return PsiDO(self.coeffs, low)

    def map(self, fn: Callable) -> "PsiDO":
        return PsiDO({k: fn(c) for k, c in self.coeffs.items()}, self.low)

    # -- linear structure -------------------------------------------------
    @staticmethod
    def _low(a: int | None, b: int | None) -> int | None:
        if a is None:
            return b
        if b is None:
            return a
        return max(a, b)

    def __add__(self, other: "PsiDO") -> "PsiDO":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out[k] + c if k in out else c
        return PsiDO(out, self._low(self.low, other.low))

    def __neg__(self) -> "PsiDO":
        return self.map(lambda c: -c)

    def __sub__(self, other: "PsiDO") -> "PsiDO":
        return self + (-other)

    def scale(self, s) -> "PsiDO":
        return self.map(lambda c: c * s)

    def __matmul__(self, other: "PsiDO") -> "PsiDO":
        return compose(self, other)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other) -> bool:
        if not isinstance(other, PsiDO):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def to_text(self) -> str:
        """One ``coefficient · D^k`` row per degree, descending."""
        rows = []
        for k in sorted(self.coeffs, reverse=True):
            c = self.coeffs[k]
            text = c.to_text() if isinstance(c, JetPoly) else repr(c)
            rows.append(f"D^{k}: {text}")
        if self.low is not None:
            rows.append(f"(known down to D^{self.low})")
        return "\n".join(rows) if rows else "0"

    def __repr__(self) -> str:
        return f"PsiDO(\n{self.to_text()}\n)"


def compose(a: PsiDO, b: PsiDO, depth: int | None = None) -> PsiDO:
    """Product ``a ∘ b`` by the extended Leibniz rule.

    ``D^k ∘ f = sum_r binom(k, r) f^(r) D^(k-r)``.  The result is exact in
    degrees ``>= max(a.low + b.top, b.low + a.top)``; requesting ``depth`` deeper
    than that raises :class:`DepthUnderflow`.
    """
    if a.is_zero() or b.is_zero():
        return PsiDO({}, PsiDO._low(a.low, b.low))
    natural = None
    if a.low is not None:
        natural = a.low + b.top
    if b.low is not None:
        cand = b.low + a.top
        natural = cand if natural is None else max(natural, cand)
    if depth is not None:
        if natural is not None and -depth < natural:
            raise DepthUnderflow(f"depth {depth} exceeds exact range (low={natural})")
        low = -depth
    else:
        low = natural
    infinite = any(k < 0 for k in a.coeffs)
    if low is None and infinite:
        raise DepthUnderflow("composition has an infinite tail; pass a depth")

    out: dict[int, object] = {}
    max_r = 0
    for k in a.coeffs:
        for l in b.coeffs:
            r_hi = k if k >= 0 else k + l - low
            max_r = max(max_r, r_hi)
    deriv_cache = {l: _derivatives(c, max(max_r, 0)) for l, c in b.coeffs.items()}
    for k, ak in a.coeffs.items():
        for l in b.coeffs:
            r_hi = k if k >= 0 else k + l - low
            for r in range(0, r_hi + 1):
                deg = k + l - r
                if low is not None and deg < low:
                    break
                coef = binom(k, r)
                if coef == 0:
                    continue
                dr = deriv_cache[l][r]
                if _is_zero(dr):
                    continue
                term = ak * dr * coef
                out[deg] = out[deg] + term if deg in out else term
    return PsiDO(out, low)


def commutator(a: PsiDO, b: PsiDO, depth: int | None = None) -> PsiDO:
    return compose(a, b, depth) - compose(b, a, depth)


def plus_part(p: PsiDO) -> PsiDO:
    """Degrees >= 0 (an exact differential operator)."""
    return PsiDO({k: c for k, c in p.coeffs.items() if k >= 0})


def minus_part(p: PsiDO) -> PsiDO:
    """Degrees < 0."""
    return PsiDO({k: c for k, c in p.coeffs.items() if k < 0}, p.low)


def residue(p: PsiDO):
    """Coefficient of ``D^{-1}``."""
    return p.coeff(-1)


def _one_like(u):
    return JetPoly.const(1) if isinstance(u, JetPoly) else u * 0 + 1


def sqrt_L(u=u0, depth: int = 6) -> PsiDO:
    """``S = D + sum_{k>=1} s_k D^{-k}`` with ``S∘S = D^2 + u``, exact to ``D^{-depth}``.

    Coefficients are fixed one degree at a time: the ``D^{1-k}`` coefficient of
    ``S∘S`` is ``2 s_k`` plus terms in ``s_1 .. s_{k-1}``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    L = PsiDO.lax_L(u)
    one = _one_like(u)
    coeffs: dict[int, object] = {1: one}
    for k in range(1, depth + 1):
        trial = PsiDO(coeffs, -k)
        sq = compose(trial, trial, depth=k - 1)
        target = L.coeffs.get(1 - k, 0)
        have = sq.coeffs.get(1 - k, 0)
        coeffs[-k] = (target - have) * Fraction(1, 2) if not _is_zero(target - have) else 0
        if _is_zero(coeffs[-k]):
            del coeffs[-k]
    return PsiDO(coeffs, -depth)


def frac_power(u=u0, m: int = 1, depth: int = 6) -> PsiDO:
    """``L^{m/2}`` for odd ``m >= 1``, exact down to ``D^{-depth}``.

    Computed as ``(L^{1/2})^m``; each factor costs one degree of exactness, so the
    square root is taken ``m - 1`` degrees deeper.
    """
    if m < 1 or m % 2 == 0:
        raise ValueError("m must be an odd positive integer")
    s = sqrt_L(u, depth + m - 1)
    out = s
    for _ in range(m - 1):
        out = compose(out, s)
    return out.truncate(-depth)


def lax_bracket(n: int, u=u0, depth: int | None = None) -> JetPoly:
    """``[4^(n-1) (L^{(2n-1)/2})_+, L]`` as a multiplication operator.

    Raises :class:`NotMultiplication` if any degree other than 0 survives.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    m = 2 * n - 1
    p = plus_part(frac_power(u, m, depth=depth or 1)).scale(Fraction(4 ** (n - 1)))
    br = commutator(p, PsiDO.lax_L(u))
    stray = [k for k in br.coeffs if k != 0]
    if stray:
        raise NotMultiplication(f"commutator has components at degrees {sorted(stray)}")
    return br.coeffs.get(0, JetPoly())


def residue_hamiltonian(n: int, u=u0):
    """Residue density ``4^n/2 * res L^{(2n-1)/2}``, satisfying ``D h_n = X_n``.

    Successive densities are linked by the recursion operator:
    ``D h_n = Omega D h_{n-1}``.  For ``n = 0`` the power ``L^{-1/2}`` starts
    with ``D^-1``, so the density is the constant ``1/2``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return JetPoly.const(Fraction(1, 2))
    return residue(frac_power(u, 2 * n - 1, depth=1)) * Fraction(4**n, 2)


# -- dressing -------------------------------------------------------------


def inverse(w: PsiDO, depth: int) -> PsiDO:
    """Inverse of ``1 + sum_{i>=1} w_i D^{-i}`` down to ``D^{-depth}``.

    Neumann series in ``N = 1 - w``; each power of ``N`` starts one degree lower.
    """
    if w.top != 0:
        raise ValueError("inverse expects an operator of the form 1 + lower terms")
    one = w.coeffs[0]
    ident = PsiDO({0: one}, -depth)
    n = ident - w.truncate(-depth)
    out = ident
    power = ident
    for _ in range(depth):
        power = compose(power, n, depth=depth)
        out = out + power
    return out


def dressing(u_series: TSeries, order: int, constants: Mapping[int, complex] | None = None
             ) -> PsiDO:
    """Dressing operator ``W = 1 + sum_{i=1}^{order} w_i D^{-i}`` with ``W D^2 W^{-1} = L``.

    Solves ``L^{1/2} W = W D`` degree by degree.  The ``D^{-k}`` coefficient
    gives ``D w_k = -sum_{i+j+r=k, i>=1} binom(-i, r) a_i D^r w_j`` where ``a_i``
    are the ``D^{-i}`` coefficients of ``L^{1/2}``; each ``w_k`` is integrated
    in ``t1`` with the constant ``constants.get(k, 0)`` (zero by default, the
    canonical gauge).  Coefficients are exact up to t1-order ``u_series.order - order``.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if u_series.order < order:
        raise TruncationTooShallow(
            f"u known to t1-order {u_series.order}, need at least {order}"
        )
    constants = dict(constants or {})
    cap = u_series.order
    s = sqrt_L(u_series, order + 1)
    a = {i: s.coeffs.get(-i, TSeries.zero(cap)) for i in range(1, order + 2)}
    w: dict[int, TSeries] = {0: TSeries([1.0], cap)}
    for k in range(1, order + 1):
        rhs = TSeries.zero(cap)
        # D^{-k} coefficient of L_- W, using only w_0 .. w_{k-1}
        for i in range(1, k + 1):
            for j in range(0, k - i + 1):
                r = k - i - j
                term = w[j]
                for _ in range(r):
                    term = term.derivative()
                rhs = rhs + a[i] * term * binom(-i, r)
        w[k] = (-rhs).integral(constants.get(k, 0.0), cap=cap)
    return PsiDO({-k: wk for k, wk in w.items()}, -order)


def dressing_residual(u_series: TSeries, order: int, depth: int) -> tuple[float, int]:
    """Check ``W D^2 W^{-1} = D^2 + u`` for the dressing operator of ``u_series``.

    Returns ``(max |coefficient|, t1-order)``: the largest deviation over degrees
    ``>= -depth`` and the lowest t1-order to which those coefficients are known.
    """
    W = dressing(u_series, order)
    one = TSeries([1.0], u_series.order)
    d2 = PsiDO.d(2, one)
    lhs = compose(W, compose(d2, inverse(W, order), depth=order - 2), depth=order - 2)
    diff = lhs - PsiDO.lax_L(u_series)
    worst = 0.0
    known = u_series.order
    for k in range(-depth, 3):
        c = diff.coeff(k)
        if isinstance(c, TSeries):
            worst = max(worst, c.max_abs())
            known = min(known, c.order)
    return worst, known
