"""Hyperelliptic curves ``y^2 = (x - c_1) ... (x - c_{2g+1})`` with real branch points.

Periods of the first-kind forms ``omega_i = x^{i-1} dx / 2y`` and of the
second-kind forms ``eta_j`` are computed by quadrature along the real axis.
From them the module builds the theta function with characteristics, the
hyperelliptic sigma function and the multi-index ``wp`` functions, and provides the
genus-three differential relations together with finite-gap KdV potentials.

Cycle conventions (branch points sorted ``c_1 < ... < c_{2g+1}``):

* ``y`` is the branch of ``prod sqrt(x - c_j)`` (principal roots) continued
  from ``x > c_{2g+1}`` through the upper half plane, so on the real axis
  ``y = i^m sqrt|h(x)|`` with ``m`` the number of branch points right of ``x``.
* ``alpha_j`` encircles ``[c_{2j-1}, c_{2j}]``; its period of ``p(x) dx / 2y``
  is ``int p / y dx`` over that interval.
* ``beta_j`` encircles ``c_{2j}, ..., c_{2g+1}``; its period is the sum of the
  same integrals over the gaps ``[c_{2k}, c_{2k+1}]``, ``k >= j``.

With these choices the normalized period matrix is purely imaginary.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate


class DegenerateCurve(ValueError):
    """Branch points coincide (or nearly so) or are not supported."""


class QuadratureFailure(RuntimeError):
    """A period integral did not reach the requested accuracy."""


class RadiusTooSmall(ValueError):
    """The theta lattice box is too small for the requested accuracy."""


class NearDivisor(ValueError):
    """The point is too close to the zero set of sigma."""


# -- the curve ---------------------------------------------------------------


@dataclass(frozen=True)
class HECurve:
    """Curve of genus ``g`` given by ``2g + 1`` distinct real branch points."""

    branch_points: tuple[float, ...]
    degeneracy_tol: float = 1e-9

    def __post_init__(self):
        c = np.asarray(self.branch_points, dtype=complex)
        if c.ndim != 1 or c.size < 3 or c.size % 2 == 0:
            raise DegenerateCurve("need an odd number (>= 3) of branch points")
        if np.max(np.abs(c.imag)) > 0:
            raise DegenerateCurve("only real branch points are supported")
        c = np.sort(c.real)
        scale = max(1.0, float(np.max(np.abs(c))))
        gap = float(np.min(np.diff(c)))
        if gap <= self.degeneracy_tol * scale:
            raise DegenerateCurve(f"branch points closer than {gap:.3e}")
        object.__setattr__(self, "branch_points", tuple(float(x) for x in c))

    @classmethod
    def random(cls, rng: np.random.Generator, genus: int, spread: float = 2.0,
               min_gap: float = 0.3) -> "HECurve":
        """Sorted branch points in ``[-spread, spread]`` separated by ``min_gap``."""
        n = 2 * genus + 1
        room = 2 * spread - (n - 1) * min_gap
        if room <= 0:
            raise ValueError("spread too small for the requested gaps")
        u = np.sort(rng.uniform(0, room, n))
        return cls(tuple(-spread + u + min_gap * np.arange(n)))

    @property
    def genus(self) -> int:
        return (len(self.branch_points) - 1) // 2

    @property
    def roots(self) -> np.ndarray:
        return np.array(self.branch_points)

    @cached_property
    def lam(self) -> np.ndarray:
        """Coefficients ``lambda_0 .. lambda_{2g+1}`` of ``h(x) = sum lambda_k x^k``."""
        return np.poly(self.roots)[::-1].real.copy()

    def h(self, x):
        return np.polynomial.polynomial.polyval(x, self.lam)

    def to_json(self) -> str:
        return json.dumps({"genus": self.genus,
                           "branch_points": [[c, 0.0] for c in self.branch_points]})

    @classmethod
    def from_json(cls, text: str) -> "HECurve":
        data = json.loads(text)
        pts = [complex(re, im) for re, im in data["branch_points"]]
        curve = cls(tuple(pts))
        if "genus" in data and data["genus"] != curve.genus:
            raise DegenerateCurve(f"genus {data['genus']} does not match "
                                  f"{len(pts)} branch points")
        return curve


@dataclass(frozen=True)
class Differentials:
    """Numerators (ascending coefficients) of ``omega_i`` and ``eta_j`` over ``2y``."""

    omega: list[np.ndarray]
    eta: list[np.ndarray]


def differentials(curve: HECurve) -> Differentials:
    g = curve.genus
    lam = curve.lam
    omega = []
    for i in range(1, g + 1):
        p = np.zeros(i)
        p[i - 1] = 1.0
        omega.append(p)
    eta = []
    for j in range(1, g + 1):
        p = np.zeros(2 * g - j + 1)
        for k in range(j, 2 * g - j + 1):
            p[k] = (k + 1 - j) * lam[k + 1 + j]
        eta.append(p)
    return Differentials(omega, eta)


# -- periods -----------------------------------------------------------------


def _interval_integrals(curve: HECurve, numerators, a: float, b: float) -> np.ndarray:
    """``int_a^b p(x) / y(x) dx`` for each numerator, ``a``, ``b`` adjacent branch points.

    The substitution ``x = (a+b)/2 - (b-a)/2 cos(theta)`` absorbs both inverse
    square-root endpoint singularities.
    """
    roots = curve.roots
    others = roots[(roots != a) & (roots != b)]
    m = int(np.sum(roots > 0.5 * (a + b)))
    phase = 1j ** (-m)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    polys = np.zeros((len(numerators), max(len(p) for p in numerators)))
    for r, p in enumerate(numerators):
        polys[r, : len(p)] = p

    def f(theta):
        x = mid - half * np.cos(theta)
        rest = np.sqrt(np.abs(np.prod(x - others)))
        return np.polynomial.polynomial.polyval(x, polys.T) / rest

    val, err = integrate.quad_vec(f, 0.0, np.pi, epsabs=0.0, epsrel=1e-13, limit=400)
    if not np.all(np.isfinite(val)) or err > 1e-9 * max(1.0, float(np.max(np.abs(val)))):
        raise QuadratureFailure(f"period integral on [{a}, {b}] error {err:.2e}")
    return phase * val


@dataclass(frozen=True)
class PeriodData:
    """Full periods ``Omega', Omega''`` (first kind) and ``H', H''`` (second kind).

    Rows index the differential, columns the cycle.
    """

    omega1: np.ndarray
    omega2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray

    @cached_property
    def T(self) -> np.ndarray:
        return np.linalg.solve(self.omega1, self.omega2)

    @cached_property
    def omega1_inv(self) -> np.ndarray:
        return np.linalg.inv(self.omega1)

    @cached_property
    def quadratic(self) -> np.ndarray:
        """``H' Omega'^{-1}``, the matrix of the Gaussian factor of sigma."""
        return self.eta1 @ self.omega1_inv

    @property
    def genus(self) -> int:
        return self.omega1.shape[0]

    def legendre(self) -> np.ndarray:
        """``Omega' H''^T - Omega'' H'^T``, which equals ``2 pi i`` times the identity."""
        return self.omega1 @ self.eta2.T - self.omega2 @ self.eta1.T

    def riemann_defect(self) -> tuple[float, float]:
        """(asymmetry of T, smallest eigenvalue of Im T)."""
        T = self.T
        asym = float(np.max(np.abs(T - T.T)))
        return asym, float(np.min(np.linalg.eigvalsh(0.5 * (T + T.T).imag)))

    def lattice_vector(self, m, n) -> np.ndarray:
        return self.omega1 @ np.asarray(m, float) + self.omega2 @ np.asarray(n, float)

    def lattice_coordinates(self, t) -> np.ndarray:
        """Real coordinates ``(m, n)`` of ``t`` in the basis of the period lattice."""
        g = self.genus
        basis = np.hstack([self.omega1, self.omega2])
        real = np.vstack([basis.real, basis.imag])
        t = np.asarray(t, complex)
        return np.linalg.solve(real, np.concatenate([t.real, t.imag])).reshape(2, g)

    def to_json(self) -> str:
        def enc(mat):
            return [[[float(z.real), float(z.imag)] for z in row] for row in mat]

        return json.dumps({"omega1": enc(self.omega1), "omega2": enc(self.omega2),
                           "eta1": enc(self.eta1), "eta2": enc(self.eta2),
                           "T": enc(self.T)}, indent=1)


def periods(curve: HECurve) -> PeriodData:
    g = curve.genus
    c = curve.roots
    forms = differentials(curve)
    numerators = forms.omega + forms.eta
    cuts = np.array([_interval_integrals(curve, numerators, c[2 * j], c[2 * j + 1])
                     for j in range(g)]).T
    gaps = np.array([_interval_integrals(curve, numerators, c[2 * j + 1], c[2 * j + 2])
                     for j in range(g)]).T
    betas = np.cumsum(gaps[:, ::-1], axis=1)[:, ::-1]
    data = PeriodData(cuts[:g], betas[:g], cuts[g:], betas[g:])
    asym, low = data.riemann_defect()
    if asym > 1e-8 or low <= 0:
        raise QuadratureFailure(f"Riemann relations violated (asym={asym:.1e}, min Im T={low:.1e})")
    return data


# -- theta -------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaChar:
    a: tuple[float, ...]
    b: tuple[float, ...]

    @classmethod
    def zero(cls, g: int) -> "ThetaChar":
        return cls((0.0,) * g, (0.0,) * g)

    @classmethod
    def riemann(cls, g: int) -> "ThetaChar":
        """Half characteristic of the Riemann constant with base point at infinity."""
        return cls((0.5,) * g, tuple((g - k) / 2 for k in range(g)))

    def parity(self) -> int:
        """+1 for even, -1 for odd half-integer characteristics."""
        return 1 if round(4 * np.dot(self.a, self.b)) % 2 == 0 else -1


TAIL = 1e-12


def theta_radius(T: np.ndarray, tol: float = TAIL, degree: int = 4) -> int:
    """Half width of a lattice box whose neglected terms are below ``tol`` relatively.

    Terms decay like ``exp(-pi lam_min r^2)`` away from the dominant one; the
    bound adds room for a polynomial weight of the given degree and for the
    number of lattice points in a shell.
    """
    lam_min = float(np.min(np.linalg.eigvalsh(T.imag)))
    if lam_min <= 0:
        raise ValueError("Im T must be positive definite")
    g = T.shape[0]
    need = -math.log(tol) + 2 * g + degree * 2.0
    r = math.sqrt(need / (math.pi * lam_min))
    return int(math.ceil(r)) + 1


def _lattice(z, T: np.ndarray, char: ThetaChar, radius: int | None):
    """Lattice points ``n + a`` and log weights of the theta sum around its peak."""
    z = np.atleast_1d(np.asarray(z, complex))
    g = z.size
    a = np.asarray(char.a, float)
    b = np.asarray(char.b, float)
    need = theta_radius(T)
    if radius is None:
        radius = need
    elif radius < need:
        raise RadiusTooSmall(f"radius {radius} below certified {need}")
    centre = np.round(-np.linalg.solve(T.imag, z.imag) - a)
    offsets = np.array(list(itertools.product(range(-radius, radius + 1), repeat=g)), float)
    na = offsets + centre + a
    quad = 0.5 * np.einsum("ki,ij,kj->k", na, T, na)
    logw = 2j * np.pi * (quad + na @ (z + b))
    return na, logw


def theta(z, T: np.ndarray, char: ThetaChar | None = None, radius: int | None = None
          ) -> complex:
    """``sum_n exp 2 pi i {(n+a)^T T (n+a)/2 + (n+a)^T (z+b)}``."""
    T = np.asarray(T, complex)
    char = char or ThetaChar.zero(T.shape[0])
    _, logw = _lattice(z, T, char, radius)
    top = logw[np.argmax(logw.real)]
    return complex(np.exp(top) * np.sum(np.exp(logw - top)))


def log_theta(z, T: np.ndarray, char: ThetaChar | None = None, radius: int | None = None
              ) -> tuple[complex, float]:
    """(log theta, |theta| relative to its largest term)."""
    T = np.asarray(T, complex)
    char = char or ThetaChar.zero(T.shape[0])
    _, logw = _lattice(z, T, char, radius)
    top = logw[np.argmax(logw.real)]
    s = np.sum(np.exp(logw - top))
    return complex(top + np.log(s)), float(abs(s))


# -- sigma and wp ------------------------------------------------------------


@dataclass
class WpTensors:
    """``wp_ij``, ``wp_ijk``, ``wp_ijkl`` at one point (zero-based symmetric arrays)."""

    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray

    def __call__(self, *idx: int) -> complex:
        """One-based access: ``w(3, 3)`` is wp_33, ``w(3, 3, 3, 2)`` is wp_3332."""
        arr = {2: self.p2, 3: self.p3, 4: self.p4}[len(idx)]
        return complex(arr[tuple(i - 1 for i in idx)])


@dataclass
class Sigma:
    """Sigma function of a curve with its periods, and the derived ``wp`` functions.

    ``sigma(t) = exp(-t^T A t / 2) theta[delta''; delta'](Omega'^{-1} t; T)`` with
    ``A = H' Omega'^{-1}`` and the Riemann-constant characteristic.
    """

    curve: HECurve
    data: PeriodData = None
    char: ThetaChar = None
    divisor_tol: float = 1e-6
    _radius: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.data is None:
            self.data = periods(self.curve)
        if self.char is None:
            self.char = ThetaChar.riemann(self.curve.genus)
        self._radius = theta_radius(self.data.T)

    @property
    def genus(self) -> int:
        return self.curve.genus

    def log_sigma(self, t) -> complex:
        t = np.asarray(t, complex)
        A = self.data.quadratic
        lt, _ = log_theta(self.data.omega1_inv @ t, self.data.T, self.char, self._radius)
        return complex(-0.5 * t @ A @ t + lt)

    def __call__(self, t) -> complex:
        return complex(np.exp(self.log_sigma(t)))

    def gradient_at_zero(self) -> np.ndarray:
        """``d sigma / d t`` at the origin (the leading Taylor coefficients)."""
        na, logw = _lattice(np.zeros(self.genus), self.data.T, self.char, self._radius)
        d = 2j * np.pi * na @ self.data.omega1_inv
        return np.sum(np.exp(logw)[:, None] * d, axis=0)

    def tensors(self, t) -> WpTensors:
        """Analytic ``wp`` tensors from cumulants of the theta lattice sum."""
        t = np.asarray(t, complex)
        B = self.data.omega1_inv
        na, logw = _lattice(B @ t, self.data.T, self.char, self._radius)
        top = logw[np.argmax(logw.real)]
        w = np.exp(logw - top)
        total = np.sum(w)
        if abs(total) < self.divisor_tol:
            raise NearDivisor(f"|theta| relative size {abs(total):.2e} at t={t}")
        p = w / total
        d = 2j * np.pi * na @ B
        c = d - p @ d
        k2 = np.einsum("n,ni,nj->ij", p, c, c)
        k3 = np.einsum("n,ni,nj,nk->ijk", p, c, c, c)
        m4 = np.einsum("n,ni,nj,nk,nl->ijkl", p, c, c, c, c)
        k4 = (m4 - np.einsum("ij,kl->ijkl", k2, k2) - np.einsum("ik,jl->ijkl", k2, k2)
              - np.einsum("il,jk->ijkl", k2, k2))
        A = self.data.quadratic
        return WpTensors(0.5 * (A + A.T) - k2, -k3, -k4)

    def wp(self, i: int, j: int, t) -> complex:
        """``wp_ij(t) = -d^2 log sigma / dt_i dt_j`` (one-based indices)."""
        return self.tensors(t)(i, j)

    def wp_fd(self, i: int, j: int, t, h: float = 1e-2) -> complex:
        """``wp_ij`` from central differences of ``log sigma`` with Richardson extrapolation."""
        t = np.asarray(t, complex)
        ei = np.eye(self.genus)[i - 1]
        ej = np.eye(self.genus)[j - 1]

        def second(step):
            f = self.log_sigma
            return (f(t + step * (ei + ej)) - f(t + step * (ei - ej))
                    - f(t - step * (ei - ej)) + f(t - step * (ei + ej))) / (4 * step * step)

        d1, d2, d3 = second(h), second(h / 2), second(h / 4)
        r1 = (4 * d2 - d1) / 3
        r2 = (4 * d3 - d2) / 3
        return -complex((16 * r2 - r1) / 15)

    def quasi_period(self, m, n, t) -> complex:
        """Predicted ``sigma(t + l) / sigma(t)`` for ``l = Omega' m + Omega'' n``.

        ``+-exp(-(H' m + H'' n)^T (t + l/2))`` with sign ``exp i pi (2 a.m - 2 b.n + m.n)``.
        """
        m = np.asarray(m, float)
        n = np.asarray(n, float)
        d = self.data
        ell = d.lattice_vector(m, n)
        eta = d.eta1 @ m + d.eta2 @ n
        sign = np.exp(1j * np.pi * (2 * np.dot(self.char.a, m) - 2 * np.dot(self.char.b, n)
                                    + np.dot(m, n)))
        return complex(sign * np.exp(-eta @ (np.asarray(t, complex) + 0.5 * ell)))

    # -- divisor ------------------------------------------------------------

    def divisor(self, t, y_sign: int = 1) -> list[tuple[complex, complex]]:
        """Points ``(x_k, y_k)`` with ``sum_k int_inf^{P_k} omega = t`` mod periods.

        The ``x_k`` are the roots of ``x^g - sum_i wp_gi x^{i-1}`` and
        ``2 y_k = y_sign * sum_i wp_ggi x_k^{i-1}``.
        """
        g = self.genus
        w = self.tensors(t)
        poly = np.zeros(g + 1, complex)  # ascending
        poly[g] = 1
        for i in range(1, g + 1):
            poly[i - 1] = -w(g, i)
        xs = np.polynomial.polynomial.polyroots(poly)
        out = []
        for x in np.atleast_1d(xs):
            y = 0.5 * y_sign * sum(w(g, g, i) * x ** (i - 1) for i in range(1, g + 1))
            out.append((complex(x), complex(y)))
        return out


def wp_to_divisor(sig: Sigma, t) -> np.ndarray:
    """Ascending coefficients of ``F(x) = x^g - sum_i wp_gi(t) x^{i-1}``."""
    g = sig.genus
    w = sig.tensors(t)
    return np.array([-w(g, i) for i in range(1, g + 1)] + [1.0], complex)


def abel_point(curve: HECurve, x: complex, y: complex, panels: int = 64,
               nodes: int = 24) -> np.ndarray:
    """``int_inf^{(x, y)} omega_i`` for i = 1..g.

    Uses the local parameter ``x = 1/z^2`` at infinity, where
    ``omega_i = -z^{2g-2i} dz / sqrt(prod (1 - c_j z^2))``; the square root is
    continued from 1 at ``z = 0`` along the straight path to ``z_P``, whose sign
    is fixed by ``y = z^{-(2g+1)} sqrt(...)``.
    """
    g = curve.genus
    c = curve.roots
    zp = 1 / np.sqrt(complex(x))
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0, 1, panels + 1)
    tau = np.concatenate([0.5 * (e1 - e0) * gl_x + 0.5 * (e0 + e1)
                          for e0, e1 in zip(edges[:-1], edges[1:])])
    wts = np.concatenate([0.5 * (e1 - e0) * gl_w for e0, e1 in zip(edges[:-1], edges[1:])])

    def branch(zend):
        path = np.concatenate([[0.0], tau, [1.0]]) * zend
        q = np.prod(1 - np.outer(path**2, c), axis=1)
        arg = np.unwrap(np.angle(q))
        return np.sqrt(np.abs(q)) * np.exp(0.5j * arg)

    root = branch(zp)
    if abs(zp ** (-(2 * g + 1)) * root[-1] - y) > abs(zp ** (-(2 * g + 1)) * root[-1] + y):
        zp = -zp
        root = branch(zp)
    zs = tau * zp
    vals = []
    for i in range(1, g + 1):
        f = -zs ** (2 * g - 2 * i) / root[1:-1]
        vals.append(np.sum(wts * f) * zp)
    return np.array(vals)


def lattice_distance(data: PeriodData, v) -> float:
    """Distance of ``v`` to the period lattice, measured in lattice coordinates."""
    coords = data.lattice_coordinates(v)
    return float(np.max(np.abs(coords - np.round(coords))))


# -- relations ---------------------------------------------------------------


def relation_residuals(w: WpTensors, lam, halved: bool = False
                       ) -> list[tuple[complex, float]]:
    """The fifteen genus-three relations between ``wp_ijkl`` and ``wp_ij``, in a fixed order.

    Returns ``(lhs - rhs, scale)`` per relation, where ``scale`` is the sum of
    the moduli of all terms so ``|lhs - rhs| / scale`` is a relative residual.
    The constant terms of the last two (``wp_2111`` and ``wp_1111``) are
    ``-4 lam_0 lam_5`` and ``-8 lam_0 lam_4 + 2 lam_1 lam_3``.  With
    ``halved=True`` the ``lam_0`` products are halved; that variant does not
    hold and is kept as a negative control.
    """
    L = list(lam)
    P = w
    c14, c15 = (2, 4) if halved else (4, 8)

    def rel(lhs_terms, rhs_terms):
        lhs = sum(lhs_terms)
        rhs = sum(rhs_terms)
        scale = sum(abs(x) for x in lhs_terms) + sum(abs(x) for x in rhs_terms)
        return lhs - rhs, scale

    dw = [P(3, 2) * P(2, 1), -P(3, 1) * P(2, 2), P(3, 1) ** 2, -P(3, 3) * P(1, 1)]
    return [
        rel([P(3, 3, 3, 3), -6 * P(3, 3) ** 2],
            [2 * L[5] * L[7], 4 * L[6] * P(3, 3), 4 * L[7] * P(3, 2)]),
        rel([P(3, 3, 3, 2), -6 * P(3, 3) * P(3, 2)],
            [4 * L[6] * P(3, 2), 6 * L[7] * P(3, 1), -2 * L[7] * P(2, 2)]),
        rel([P(3, 3, 3, 1), -6 * P(3, 1) * P(3, 3)],
            [4 * L[6] * P(3, 1), -2 * L[7] * P(2, 1)]),
        rel([P(3, 3, 2, 2), -4 * P(3, 2) ** 2, -2 * P(3, 3) * P(2, 2)],
            [2 * L[5] * P(3, 2), 4 * L[6] * P(3, 1), -2 * L[7] * P(2, 1)]),
        rel([P(3, 3, 2, 1), -2 * P(3, 3) * P(2, 1), -4 * P(3, 2) * P(3, 1)],
            [2 * L[5] * P(3, 1)]),
        rel([P(3, 3, 1, 1), -4 * P(3, 1) ** 2, -2 * P(3, 3) * P(1, 1)],
            [2 * x for x in dw]),
        rel([P(3, 2, 2, 2), -6 * P(3, 2) * P(2, 2)],
            [-4 * L[2] * L[7], -2 * L[3] * P(3, 3), 4 * L[4] * P(3, 2),
             4 * L[5] * P(3, 1), -6 * L[7] * P(1, 1)]),
        rel([P(3, 2, 2, 1), -4 * P(3, 2) * P(2, 1), -2 * P(3, 1) * P(2, 2)],
            [-2 * L[1] * L[7], 4 * L[4] * P(3, 1)] + [-2 * x for x in dw]),
        rel([P(3, 2, 1, 1), -4 * P(3, 1) * P(2, 1), -2 * P(3, 2) * P(1, 1)],
            [-4 * L[0] * L[7], 2 * L[3] * P(3, 1)]),
        rel([P(3, 1, 1, 1), -6 * P(3, 1) * P(1, 1)],
            [4 * L[0] * P(3, 3), -2 * L[1] * P(3, 2), 4 * L[2] * P(3, 1)]),
        rel([P(2, 2, 2, 2), -6 * P(2, 2) ** 2],
            [-8 * L[2] * L[6], 2 * L[3] * L[5], -6 * L[1] * L[7], -12 * L[2] * P(3, 3),
             4 * L[3] * P(3, 2), 4 * L[4] * P(2, 2), 4 * L[5] * P(2, 1),
             -12 * L[6] * P(1, 1)] + [12 * x for x in dw]),
        rel([P(2, 2, 2, 1), -6 * P(2, 2) * P(2, 1)],
            [-4 * L[1] * L[6], -8 * L[0] * L[7], -6 * L[1] * P(3, 3), 4 * L[3] * P(3, 1),
             4 * L[4] * P(2, 1), -2 * L[5] * P(1, 1)]),
        rel([P(2, 2, 1, 1), -4 * P(2, 1) ** 2, -2 * P(2, 2) * P(1, 1)],
            [-8 * L[0] * L[6], -8 * L[0] * P(3, 3), -2 * L[1] * P(3, 2),
             4 * L[2] * P(3, 1), 2 * L[3] * P(2, 1)]),
        rel([P(2, 1, 1, 1), -6 * P(2, 1) * P(1, 1)],
            [-c14 * L[0] * L[5], -8 * L[0] * P(3, 2), 6 * L[1] * P(3, 1), -2 * L[1] * P(2, 2),
             4 * L[2] * P(2, 1)]),
        rel([P(1, 1, 1, 1), -6 * P(1, 1) ** 2],
            [-c15 * L[0] * L[4], 2 * L[1] * L[3], 16 * L[0] * P(3, 1), -12 * L[0] * P(2, 2),
             4 * L[1] * P(2, 1), 4 * L[2] * P(1, 1)]),
    ]


def kdv_relation_residual(w: WpTensors, lam, g: int) -> tuple[complex, float]:
    """The KdV relation in genus ``g``: ``wp_gggg - 6 wp_gg^2 = 2 lam_{2g-1} + 4 lam_{2g} wp_gg + 4 wp_{g,g-1}``."""
    lhs = [w(g, g, g, g), -6 * w(g, g) ** 2]
    rhs = [2 * lam[2 * g - 1], 4 * lam[2 * g] * w(g, g)]
    if g > 1:
        rhs.append(4 * w(g, g - 1))
    return sum(lhs) - sum(rhs), sum(abs(x) for x in lhs + rhs)


def random_points(sig: Sigma, rng: np.random.Generator, count: int,
                  margin: float = 1e-2) -> list[np.ndarray]:
    """Random points of the fundamental domain at least ``margin`` (relative) off the divisor."""
    pts = []
    while len(pts) < count:
        x = rng.uniform(0, 1, sig.genus)
        y = rng.uniform(0, 1, sig.genus)
        t = sig.data.lattice_vector(x, y)
        _, rel = log_theta(sig.data.omega1_inv @ t, sig.data.T, sig.char)
        if rel > margin:
            pts.append(t)
    return pts


# -- finite-gap potentials ---------------------------------------------------


def finite_gap_u(sig: Sigma, s, t_fixed) -> np.ndarray:
    """``u(s) = -2 (wp_gg(t_fixed + s e_g) - lambda_{2g}/3)``."""
    g = sig.genus
    lam2g = sig.curve.lam[2 * g]
    eg = np.eye(g)[g - 1]
    t0 = np.asarray(t_fixed, complex)
    return np.array([-2 * (sig.wp(g, g, t0 + x * eg) - lam2g / 3)
                     for x in np.atleast_1d(s)])


def real_potential_shift(sig: Sigma) -> np.ndarray:
    """Base point ``Omega'' e_1 / 2`` that puts a genus-one potential on a real regular line."""
    return 0.5 * sig.data.omega2[:, 0]


def kdv_fd_residual(sig: Sigma, t0, h: float) -> float:
    """Residual of ``u_tau + 6 u u_s + u_sss = 0`` by finite differences of ``u``.

    ``s = t_g`` and ``d/dtau = -4 d/dt_{g-1} - 8 lambda_{2g} d/dt_g``, where the
    second term is the Galilean shift that goes with the additive constant in
    ``u``.  Stencils are fourth-order central differences of step ``h``.
    """
    g = sig.genus
    if g < 2:
        raise ValueError("the first KdV flow needs genus >= 2")
    lam2g = sig.curve.lam[2 * g]
    t0 = np.asarray(t0, complex)
    eg = np.eye(g)[g - 1]
    eh = np.eye(g)[g - 2]

    def u(t):
        return -2 * (sig.wp(g, g, t) - lam2g / 3)

    us_pts = {k: u(t0 + k * h * eg) for k in range(-3, 4)}
    ut_pts = {k: u(t0 + k * h * eh) for k in (-2, -1, 1, 2)}
    u0 = us_pts[0]
    u_s = (us_pts[-2] - 8 * us_pts[-1] + 8 * us_pts[1] - us_pts[2]) / (12 * h)
    u_sss = (us_pts[-3] - 8 * us_pts[-2] + 13 * us_pts[-1] - 13 * us_pts[1]
             + 8 * us_pts[2] - us_pts[3]) / (8 * h**3)
    u_th = (ut_pts[-2] - 8 * ut_pts[-1] + 8 * ut_pts[1] - ut_pts[2]) / (12 * h)
    u_tau = -4 * u_th - 8 * lam2g * u_s
    return float(abs(u_tau + 6 * u0 * u_s + u_sss))
