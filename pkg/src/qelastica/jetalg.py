"""Exact differential polynomials in the jet variables u0 = u, u1 = u_s, u2 = u_ss, ...

A :class:`JetPoly` is a finite sum of monomials with :class:`fractions.Fraction`
coefficients.  On top of the ring operations this module provides the total
derivative ``D``, the variational (Euler) derivative, exact inversion of ``D``,
the recursion operator of the KdV hierarchy and the hierarchy itself.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Union

Scalar = Union[int, Fraction]
Monomial = tuple  # exponents of (u0, u1, ..., um), no trailing zeros


class NotExact(ValueError):
    """The argument is not a total derivative, so it has no antiderivative."""


def _trim(mono: Iterable[int]) -> Monomial:
    mono = list(mono)
    while mono and mono[-1] == 0:
        mono.pop()
    return tuple(mono)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, e in enumerate(b):
        out[i] += e
    return tuple(out)


class JetPoly:
    """Immutable differential polynomial with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        clean: dict[Monomial, Fraction] = {}
        for mono, c in (terms or {}).items():
            c = Fraction(c)
            if c == 0:
                continue
            key = _trim(mono)
            clean[key] = clean.get(key, Fraction(0)) + c
            if clean[key] == 0:
                del clean[key]
        self._terms = clean
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def var(cls, m: int) -> "JetPoly":
        """The jet variable u_m."""
        if m < 0:
            raise ValueError("jet index must be non-negative")
        return cls({(0,) * m + (1,): 1})

    @classmethod
    def const(cls, c: Scalar) -> "JetPoly":
        return cls({(): c})

    # -- basic structure --------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    @property
    def max_jet_order(self) -> int:
        """Highest jet index with a nonzero coefficient (0 for constants)."""
        return max((len(m) - 1 for m in self._terms if m), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = JetPoly.const(other)
        if not isinstance(other, JetPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- arithmetic -------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "JetPoly":
        if isinstance(x, JetPoly):
            return x
        if isinstance(x, (int, Fraction)):
            return JetPoly.const(x)
        raise TypeError(f"cannot combine JetPoly with {type(x).__name__}")

    def __add__(self, other) -> "JetPoly":
        other = self._coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return JetPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "JetPoly":
        return JetPoly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "JetPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "JetPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "JetPoly":
        if isinstance(other, (int, Fraction)):
            return JetPoly({m: c * other for m, c in self._terms.items()})
        other = self._coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return JetPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar) -> "JetPoly":
        return self * (1 / Fraction(other))

    def __pow__(self, n: int) -> "JetPoly":
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        out = JetPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    # -- calculus ---------------------------------------------------------
    def partial(self, m: int) -> "JetPoly":
        """Partial derivative with respect to the jet variable u_m."""
        out: dict[Monomial, Fraction] = {}
        for mono, c in self._terms.items():
            if m < len(mono) and mono[m]:
                e = list(mono)
                e[m] -= 1
                out[tuple(e)] = out.get(tuple(e), Fraction(0)) + c * mono[m]
        return JetPoly(out)

    def integrate_var(self, m: int) -> "JetPoly":
        """Antiderivative in the polynomial variable u_m (not the total derivative)."""
        out = {}
        for mono, c in self._terms.items():
            e = list(mono) + [0] * max(0, m + 1 - len(mono))
            e[m] += 1
            out[tuple(e)] = c / e[m]
        return JetPoly(out)

    def derivative(self) -> "JetPoly":
        return total_derivative(self)

    def __call__(self, jets) -> complex:
        """Evaluate at numeric jet values ``jets[m] = u_m``."""
        total = 0
        for mono, c in self._terms.items():
            v = complex(c) if isinstance(jets[0], complex) else float(c)
            for i, e in enumerate(mono):
                if e:
                    v = v * jets[i] ** e
            total = total + v
        return total

    # -- text form --------------------------------------------------------
    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in canonical order: by total weight, then degree, then exponents."""

        def key(item):
            mono = item[0]
            weight = sum(i * e for i, e in enumerate(mono))
            degree = sum(mono)
            padded = tuple(mono) + (0,) * (16 - len(mono))
            return (-weight, -degree, tuple(-e for e in reversed(padded)))

        return sorted(self._terms.items(), key=key)

    def to_text(self) -> str:
        """Canonical text ``c * u0^a u1^b + ...``; ``0`` for the zero polynomial."""
        if not self._terms:
            return "0"
        parts = []
        for mono, c in self.sorted_terms():
            factors = [
                f"u{i}" if e == 1 else f"u{i}^{e}" for i, e in enumerate(mono) if e
            ]
            body = " ".join(factors) if factors else "1"
            parts.append(f"{c} * {body}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"JetPoly({self.to_text()})"

    @classmethod
    def from_text(cls, text: str) -> "JetPoly":
        """Inverse of :meth:`to_text`."""
        text = text.strip()
        if text == "0":
            return cls()
        terms: dict[Monomial, Fraction] = {}
        for part in text.split(" + "):
            coef, body = part.split(" * ")
            exps: list[int] = []
            if body != "1":
                for factor in body.split():
                    name, _, power = factor.partition("^")
                    idx = int(name[1:])
                    exps += [0] * (idx + 1 - len(exps))
                    exps[idx] += int(power) if power else 1
            key = _trim(exps)
            terms[key] = terms.get(key, Fraction(0)) + Fraction(coef)
        return cls(terms)


u0, u1, u2, u3, u4, u5 = (JetPoly.var(i) for i in range(6))


def total_derivative(p: JetPoly) -> JetPoly:
    """``D p = sum_m (dp/du_m) u_{m+1}``."""
    out = JetPoly()
    for m in range(p.max_jet_order + 1):
        dp = p.partial(m)
        if dp:
            out = out + dp * JetPoly.var(m + 1)
    return out


def euler_operator(p: JetPoly) -> JetPoly:
    """Variational derivative ``sum_m (-D)^m dp/du_m``."""
    out = JetPoly()
    for m in range(p.max_jet_order + 1):
        term = p.partial(m)
        for _ in range(m):
            term = -total_derivative(term)
        out = out + term
    return out


def antiderivative(p: JetPoly) -> JetPoly:
    """Exact inverse of :func:`total_derivative` with zero integration constant.

    Raises :class:`NotExact` when ``p`` is not in the image of ``D``.
    """
    rest = p
    q = JetPoly()
    while rest:
        m = rest.max_jet_order
        if m == 0:
            raise NotExact(f"not a total derivative: {p.to_text()}")
        top = rest.partial(m)
        if top.partial(m):
            raise NotExact(f"not linear in u{m}: {p.to_text()}")
        piece = top.integrate_var(m - 1)
        q = q + piece
        rest = rest - total_derivative(piece)
        if rest and rest.max_jet_order >= m and rest.partial(m):
            # D(piece) reproduced the u_m part exactly; anything left is a bug
            raise NotExact(f"reduction stalled at order {m}")
    return q


def is_total_derivative(p: JetPoly) -> bool:
    try:
        antiderivative(p)
    except NotExact:
        return False
    return True


def normal_form(p: JetPoly) -> JetPoly:
    """Canonical representative of ``p`` modulo the image of ``D``.

    Integrates by parts every monomial whose highest jet variable appears to the
    first power, so the result only contains monomials in u0 alone or with the
    top variable raised to a power >= 2.
    """
    out = p
    while True:
        target = None
        for mono, c in out.sorted_terms():
            if len(mono) >= 2 and mono[-1] == 1:
                target = (mono, c)
                break
        if target is None:
            return out
        mono, c = target
        m = len(mono) - 1
        rest = JetPoly({mono[:-1]: c})
        out = out - total_derivative(rest.integrate_var(m - 1))


def apply_recursion(p: JetPoly) -> JetPoly:
    """Recursion operator ``D^2 p + 4 u0 p + 2 u1 D^{-1} p``.

    The ``2 D u D^{-1}`` part of the operator is read as a composition; expanding
    ``D(u q) = u1 q + u0 D q`` with ``q = D^{-1} p`` gives the form above.
    """
    if not p:
        return JetPoly()
    d2 = total_derivative(total_derivative(p))
    return d2 + 4 * u0 * p + 2 * u1 * antiderivative(p)


@lru_cache(maxsize=None)
def kdv_rhs(n: int) -> JetPoly:
    """The n-th flow of the hierarchy: ``X_1 = u1``, ``X_{n+1} = Omega X_n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return u1
    return apply_recursion(kdv_rhs(n - 1))


@lru_cache(maxsize=None)
def hamiltonian_density(n: int) -> JetPoly:
    """Conserved density ``h_n`` with ``D(euler_operator(h_n)) == kdv_rhs(n)``.

    Built from the residue of a fractional power of ``L = D^2 + u``:
    ``h_n = 4^n/(2n+1) * res L^{(2n+1)/2}``, reduced to :func:`normal_form`.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    from .psido import frac_power, residue

    scale = Fraction(4**n, 2 * n + 1)
    return normal_form(residue(frac_power(u0, 2 * n + 1, depth=1)) * scale)


def variational_pairing(n: int, m: int) -> JetPoly:
    """``E(h_n) * X_m`` reduced modulo total derivatives (zero for commuting flows)."""
    return normal_form(euler_operator(hamiltonian_density(n)) * kdv_rhs(m))
