"""Hill's equation ``psi'' = -(u(s) + xbar) psi`` with a periodic potential.

The monodromy over one period ``P`` is assembled from the two solutions with
``y0(0) = 1, y0'(0) = 0`` and ``y1(0) = 0, y1'(0) = 1``.  Its trace, the
discriminant ``Delta(xbar)``, decides stability (``Delta^2 <= 4``), and the
zeros of ``Delta^2 - 4`` are the band edges of the periodic spectrum.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize


class IntegrationFailure(RuntimeError):
    """The ODE solver did not reach the end of the period."""


class NoConvergence(RuntimeError):
    """Band-edge refinement did not converge."""


RTOL = 1e-13
ATOL = 1e-15


@dataclass(frozen=True)
class PeriodicPotential:
    """A potential on ``[0, P)``, given by uniform samples or by a callable.

    Samples are interpolated by their Fourier series, which is exact for
    band-limited data and spectrally accurate for analytic potentials.
    """

    period: float
    samples: np.ndarray | None = None
    func: Callable[[float], complex] | None = None

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if (self.samples is None) == (self.func is None):
            raise ValueError("give exactly one of samples or func")
        if self.samples is not None:
            u = np.asarray(self.samples)
            if u.ndim != 1 or u.size < 32:
                raise ValueError("need at least 32 samples")
            if not np.all(np.isfinite(u)):
                raise ValueError("potential has non-finite samples")
            u = u.real.astype(float) if np.all(np.isreal(u)) else u.astype(complex)
            u.setflags(write=False)
            object.__setattr__(self, "samples", u)

    @classmethod
    def zero(cls, period: float) -> "PeriodicPotential":
        return cls(period, np.zeros(64))

    @classmethod
    def from_function(cls, f: Callable, period: float, n: int = 256) -> "PeriodicPotential":
        """Sample ``f`` (vectorized) on ``n`` uniform nodes."""
        s = np.arange(n) * period / n
        return cls(period, np.asarray(f(s)))

    @property
    def is_real(self) -> bool:
        if self.samples is not None:
            return not np.iscomplexobj(self.samples)
        return bool(np.isreal(self.func(0.123 * self.period)))

    def evaluator(self) -> Callable[[float], complex]:
        if self.func is not None:
            return self.func
        u = self.samples
        n = u.size
        coef = np.fft.fft(u) / n
        k = np.fft.fftfreq(n, d=1.0 / n).astype(float)
        if n % 2 == 0:  # split the Nyquist term symmetrically
            coef = np.append(coef, coef[n // 2] / 2)
            coef[n // 2] /= 2
            k = np.append(k, -k[n // 2])
        omega = 2 * np.pi * k / self.period
        real = not np.iscomplexobj(u)

        def f(s):
            val = np.exp(1j * omega * s) @ coef
            return val.real if real else val

        return f


@dataclass(frozen=True)
class MonodromyResult:
    xbar: complex
    M: np.ndarray
    rho: np.ndarray

    @property
    def delta(self) -> complex:
        return complex(np.trace(self.M))

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.M))

    @property
    def stable(self) -> bool:
        return bool(np.max(np.abs(self.rho)) <= 1 + 1e-8)


def _monodromies(u: PeriodicPotential, xbars: np.ndarray) -> np.ndarray:
    """Monodromy matrices for many spectral parameters in one integration."""
    xb = np.asarray(xbars, dtype=complex).ravel()
    k = xb.size
    uf = u.evaluator()
    complex_run = (not u.is_real) or np.any(xb.imag != 0)

    def rhs(s, y):
        y = y.reshape(4, k)
        q = -(uf(s) + (xb if complex_run else xb.real))
        return np.concatenate([y[1], q * y[0], y[3], q * y[2]])

    y0 = np.zeros((4, k), dtype=complex if complex_run else float)
    y0[0] = 1.0
    y0[3] = 1.0
    sol = integrate.solve_ivp(rhs, (0.0, u.period), y0.ravel(), method="DOP853",
                              rtol=RTOL, atol=ATOL)
    if sol.status != 0:
        raise IntegrationFailure(sol.message)
    y = sol.y[:, -1].reshape(4, k)
    M = np.empty((k, 2, 2), dtype=complex)
    M[:, 0, 0], M[:, 0, 1] = y[0], y[2]
    M[:, 1, 0], M[:, 1, 1] = y[1], y[3]
    return M


def _floquet(M: np.ndarray) -> np.ndarray:
    """Roots of ``rho^2 - tr(M) rho + det(M) = 0``."""
    tr = np.trace(M, axis1=-2, axis2=-1)
    det = np.linalg.det(M)
    disc = np.sqrt(tr * tr - 4 * det + 0j)
    return np.array([(tr + disc) / 2, (tr - disc) / 2])


def monodromy(u: PeriodicPotential, xbar: complex) -> MonodromyResult:
    M = _monodromies(u, np.array([xbar]))[0]
    return MonodromyResult(complex(xbar), M, _floquet(M))


@dataclass
class DiscriminantScan:
    xbar: np.ndarray
    delta: np.ndarray
    det: np.ndarray
    rho_max: np.ndarray

    @property
    def stable(self) -> np.ndarray:
        return self.delta.real**2 - 4 <= 0

    def classification_mismatch(self, tol: float = 1e-8) -> int:
        """Points where ``Delta^2 <= 4`` and ``max|rho| <= 1 + tol`` disagree."""
        by_rho = self.rho_max <= 1 + tol
        near = np.abs(self.delta.real**2 - 4) < 1e-6  # both tests are ill-posed at edges
        return int(np.sum((self.stable != by_rho) & ~near))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xbar", "delta", "stable"])
        for x, d, st in zip(self.xbar, self.delta, self.stable):
            w.writerow([repr(float(x)), repr(float(d.real)), int(st)])
        return buf.getvalue()


def discriminant_scan(u: PeriodicPotential, xbar_grid, chunk: int = 128) -> DiscriminantScan:
    grid = np.asarray(xbar_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("xbar grid must be strictly increasing")
    Ms = np.concatenate([_monodromies(u, grid[i:i + chunk])
                         for i in range(0, grid.size, chunk)])
    rho = _floquet(Ms)
    delta = np.trace(Ms, axis1=1, axis2=2)
    if u.is_real:
        delta = delta.real
    return DiscriminantScan(grid, delta, np.linalg.det(Ms), np.max(np.abs(rho), axis=0))


@dataclass(frozen=True)
class BandEdge:
    xbar: float
    level: int  # +2 or -2
    simple: bool
    slope: float


def _delta(u: PeriodicPotential, x: float) -> float:
    return float(np.trace(_monodromies(u, np.array([x]))[0]).real)


def band_edges(u: PeriodicPotential, search_interval: tuple[float, float], max_edges: int = 64,
               points: int = 400, xtol: float = 1e-12, scan: DiscriminantScan | None = None
               ) -> list[BandEdge]:
    """Zeros of ``Delta^2 - 4`` in the interval, each marked simple or double.

    Sign changes of ``Delta -+ 2`` are refined with Brent's method; a root is
    simple when ``|Delta'|`` there exceeds ``1e-3 P^2`` (the slope scale of an
    open gap), otherwise double.  Tangential touches without a sign change are
    located as extrema of ``Delta`` and reported as double zeros.
    """
    if not u.is_real:
        raise ValueError("band edges are only defined for real potentials")
    lo, hi = search_interval
    if scan is None:
        scan = discriminant_scan(u, np.linspace(lo, hi, points))
    x, d = scan.xbar, scan.delta.real
    slope_tol = 1e-3 * u.period**2
    h = 1e-6 * max(1.0, hi - lo)
    found: list[BandEdge] = []
    for level in (2, -2):
        f = d - level
        for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
            fa, fb = _delta(u, x[i]) - level, _delta(u, x[i + 1]) - level
            try:
                if fa * fb < 0:
                    root = optimize.brentq(lambda t: _delta(u, t) - level, x[i], x[i + 1],
                                           xtol=xtol, rtol=1e-15)
                else:
                    # a crossing at roundoff level (a closed gap): the batched scan and a
                    # single-point solve disagree on its sign, so locate the touch instead
                    res = optimize.minimize_scalar(lambda t: abs(_delta(u, t) - level),
                                                   bounds=(x[i], x[i + 1]), method="bounded",
                                                   options={"xatol": 1e-10})
                    root = res.x
            except (ValueError, RuntimeError) as exc:
                raise NoConvergence(str(exc)) from exc
            slope = (_delta(u, root + h) - _delta(u, root - h)) / (2 * h)
            found.append(BandEdge(float(root), level, bool(abs(slope) > slope_tol), float(slope)))
        for i in range(1, x.size - 1):
            extremum = (f[i] - f[i - 1]) * (f[i + 1] - f[i]) < 0
            if not extremum or abs(f[i]) > 1e-2 or np.sign(f[i - 1]) != np.sign(f[i + 1]):
                continue
            if any(x[i - 1] <= e.xbar <= x[i + 1] and e.level == level for e in found):
                continue
            sgn = 1 if f[i] > 0 else -1
            res = optimize.minimize_scalar(lambda t: sgn * (_delta(u, t) - level),
                                           bounds=(x[i - 1], x[i + 1]), method="bounded",
                                           options={"xatol": 1e-10})
            if abs(res.fun) < 1e-8:
                found.append(BandEdge(float(res.x), level, False, 0.0))
    found.sort(key=lambda e: e.xbar)
    merged: list[BandEdge] = []
    for e in found:  # a numerically split touch shows up as two shallow roots
        if merged and not e.simple and not merged[-1].simple and e.level == merged[-1].level \
                and abs(e.xbar - merged[-1].xbar) < 1e-5 * max(1.0, abs(e.xbar)):
            continue
        merged.append(e)
    return merged[:max_edges]


def simple_edges(edges: list[BandEdge]) -> np.ndarray:
    return np.array([e.xbar for e in edges if e.simple])
