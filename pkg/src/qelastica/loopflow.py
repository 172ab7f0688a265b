"""Closed plane curves parameterized by arc length, stored through their tangent angle.

A curve of length ``L`` is sampled at ``s_j = j L / N``.  The tangent angle is
``phi(s) = 2 pi w s / L + theta(s)`` with ``theta`` periodic and ``w`` the
winding number; curvature is ``k = phi_s``.  Derivatives are spectral.

The curve flow evolves ``phi`` by ``phi_t = k_ss + k^3/2``, so the curvature
obeys ``k_t = k_sss + (3/2) k^2 k_s`` and the position moves with
``gamma_t = (k^2/2) T + k_s N``.  Since only the angle is evolved, ``|gamma'| = 1``
and the length are preserved by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import optimize, special


class Instability(RuntimeError):
    """Non-finite values appeared during time stepping."""


class StepTooLarge(ValueError):
    """Explicit stepping would violate the dispersive stability bound."""


class ClosureFailure(RuntimeError):
    """Root finding for a closed reference curve did not converge."""


class BranchAmbiguity(UserWarning):
    """Odd winding: the square root of the tangent is antiperiodic."""


@dataclass(frozen=True)
class LoopState:
    phi: np.ndarray
    length: float
    basepoint: complex = 0.0j
    winding: int = 1

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        n = phi.size
        if n < 16 or n % 2:
            raise ValueError(f"need an even number of samples >= 16, got {n}")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if not np.all(np.isfinite(phi)):
            raise ValueError("tangent angle has non-finite samples")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return self.phi.size

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.n) * self.length / self.n

    @property
    def ds(self) -> float:
        return self.length / self.n

    @property
    def mean_curvature(self) -> float:
        return 2 * math.pi * self.winding / self.length

    @property
    def theta(self) -> np.ndarray:
        """Periodic part of the tangent angle."""
        return self.phi - self.mean_curvature * self.s


class Scheme(str, Enum):
    RK4_SPECTRAL = "rk4_spectral"
    INTEGRATING_FACTOR = "integrating_factor"


@dataclass(frozen=True)
class FlowParams:
    dt: float
    steps: int
    scheme: Scheme = Scheme.INTEGRATING_FACTOR
    dealias: bool = False
    save_every: int = 0  # 0: first and last frame only

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        object.__setattr__(self, "scheme", Scheme(self.scheme))


# -- spectral helpers --------------------------------------------------------


def wavenumbers(n: int, length: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def spectral_diff(f: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    """Derivative of periodic samples; the Nyquist mode is dropped for odd orders."""
    n = f.size
    k = wavenumbers(n, length)
    mult = (1j * k) ** order
    if order % 2:
        mult[n // 2] = 0
    out = np.fft.ifft(mult * np.fft.fft(f))
    return out if np.iscomplexobj(f) else out.real


def spectral_antiderivative(f: np.ndarray, length: float) -> np.ndarray:
    """Periodic antiderivative of the zero-mean part of ``f``, vanishing at s=0."""
    n = f.size
    k = wavenumbers(n, length)
    fh = np.fft.fft(f)
    gh = np.zeros_like(fh)
    nz = k != 0
    gh[nz] = fh[nz] / (1j * k[nz])
    g = np.fft.ifft(gh)
    g = g - g[0]
    return g if np.iscomplexobj(f) else g.real


# -- geometry ---------------------------------------------------------------


def curvature(state: LoopState) -> np.ndarray:
    return spectral_diff(state.theta, state.length) + state.mean_curvature


def tangent(state: LoopState) -> np.ndarray:
    return np.exp(1j * state.phi)


def closure_vector(state: LoopState) -> complex:
    """``∮ e^{i phi} ds`` (trapezoid rule, spectrally accurate)."""
    return complex(np.sum(tangent(state)) * state.ds)


def closure_defect(state: LoopState) -> float:
    return abs(closure_vector(state))


def positions(state: LoopState) -> np.ndarray:
    """Samples of ``gamma``; any closure defect shows up as a linear drift."""
    t = tangent(state)
    mean = t.mean()
    return state.basepoint + spectral_antiderivative(t - mean, state.length) + mean * state.s


def schwarz(state: LoopState) -> np.ndarray:
    """Schwarz derivative ``{gamma, s} = i k' + k^2 / 2`` along the curve."""
    k = curvature(state)
    return 1j * spectral_diff(k, state.length) + 0.5 * k**2


def schwarz_of_samples(z: np.ndarray, length: float) -> np.ndarray:
    """``z'''/z' - (3/2)(z''/z')^2`` for periodic samples by spectral differentiation."""
    d1 = spectral_diff(z, length, 1)
    d2 = spectral_diff(z, length, 2)
    d3 = spectral_diff(z, length, 3)
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def energy(state: LoopState) -> float:
    """``(1/2π) ∮ k^2/2 ds``, the real part of the Schwarz-derivative integral."""
    k = curvature(state)
    return float(np.sum(0.5 * k**2) * state.ds / (2 * np.pi))


def miura_u(state: LoopState) -> np.ndarray:
    """``u = {gamma, s}/2 = v^2 + i v_s`` with ``v = k/2``."""
    return 0.5 * schwarz(state)


def lift_psi(state: LoopState) -> tuple[np.ndarray, np.ndarray]:
    """``psi = (i gamma / sqrt(gamma'), i / sqrt(gamma'))`` with ``det(psi, psi') = 1``.

    ``sqrt(gamma') = exp(i phi / 2)`` follows the unwrapped angle, so the branch
    is continuous in ``s``.  For odd winding it is antiperiodic; a
    :class:`BranchAmbiguity` warning is issued and the samples over one period
    are returned anyway.
    """
    if state.winding % 2:
        warnings.warn(
            f"winding {state.winding} is odd: sqrt(gamma') changes sign over one period",
            BranchAmbiguity,
            stacklevel=2,
        )
    root = np.exp(0.5j * state.phi)
    psi2 = 1j / root
    psi1 = positions(state) * psi2
    return psi1, psi2


def lift_derivative(state: LoopState, f: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative of a lifted quantity, handling antiperiodicity."""
    half = np.exp(-0.5j * state.mean_curvature * state.s)
    g = f * half  # periodic
    # d/ds (g / half) by the product rule, done through a modulated transform
    n = f.size
    k = wavenumbers(n, state.length) + 0.5 * state.mean_curvature
    out = np.fft.ifft((1j * k) ** order * np.fft.fft(g))
    return out / half


def wronskian(state: LoopState) -> np.ndarray:
    psi1, psi2 = lift_psi(state) if state.winding % 2 == 0 else _quiet_lift(state)
    return psi1 * lift_derivative(state, psi2) - lift_derivative(state, psi1) * psi2


def _quiet_lift(state: LoopState):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchAmbiguity)
        return lift_psi(state)


def psi_ode_residual(state: LoopState) -> float:
    """``max |(-d^2 - {gamma,s}/2) psi|`` over both components."""
    psi1, psi2 = _quiet_lift(state)
    q = 0.5 * schwarz(state)
    res = 0.0
    for p in (psi1, psi2):
        res = max(res, float(np.max(np.abs(-lift_derivative(state, p, 2) - q * p))))
    return res


# -- constructors -------------------------------------------------------------


def from_curvature(k: np.ndarray, length: float, basepoint: complex = 0j,
                   phi0: float = 0.0) -> LoopState:
    """Integrate curvature samples into a :class:`LoopState`."""
    k = np.asarray(k, dtype=float)
    total = float(np.mean(k)) * length
    winding = int(round(total / (2 * np.pi)))
    kmean = 2 * np.pi * winding / length
    s = np.arange(k.size) * length / k.size
    theta = spectral_antiderivative(k - k.mean(), length)
    return LoopState(phi0 + kmean * s + theta, length, basepoint, winding)


def circle(n: int = 256, radius: float = 1.0) -> LoopState:
    length = 2 * np.pi * radius
    s = np.arange(n) * length / n
    return LoopState(s / radius + np.pi / 2, length, complex(radius, 0), 1)


def random_loop(rng: np.random.Generator, n: int = 256, modes: int = 8,
                amplitude: float = 0.3, length: float = 2 * np.pi,
                decay: float = 4.0) -> LoopState:
    """Closed winding-one loop with a random band-limited angle perturbation.

    Harmonics ``m = 2..modes`` get normal coefficients damped by ``m**-decay``
    and rescaled so that their absolute sum is ``0.7 * amplitude``; the first
    harmonic is then solved for so that the curve closes.
    """
    s = np.arange(n) * length / n
    x = 2 * np.pi * s / length
    ms = np.arange(2, modes + 1)
    raw = rng.normal(size=(ms.size, 2)) / ms[:, None] ** decay
    raw *= 0.7 * amplitude / np.sum(np.abs(raw))
    pert = sum(a * np.cos(m * x) + b * np.sin(m * x) for m, (a, b) in zip(ms, raw))

    def defect(c):
        phi = x + pert + c[0] * np.cos(x) + c[1] * np.sin(x)
        z = np.mean(np.exp(1j * phi))
        return [z.real, z.imag]

    sol = optimize.root(defect, [0.0, 0.0], tol=1e-14)
    c = sol.x
    if np.hypot(*defect(c)) > 1e-13:
        raise ClosureFailure(sol.message)
    theta = pert + c[0] * np.cos(x) + c[1] * np.sin(x)
    return LoopState(x + theta + np.pi / 2, length, 1.0 + 0j, 1)


def figure_eight_angle(modulus: float, n: int, length: float) -> np.ndarray:
    """Tangent angle ``2 arcsin(l sn(alpha s | l^2))`` over one period ``4K/alpha``."""
    m = modulus**2
    alpha = 4 * special.ellipk(m) / length
    s = np.arange(n) * length / n
    sn, _, _, _ = special.ellipj(alpha * s, m)
    return 2 * np.arcsin(modulus * sn)


def figure_eight_closure(modulus: float, n: int = 512) -> float:
    """Signed x-component of ``∮ e^{i phi} ds`` per unit length (zero when closed)."""
    phi = figure_eight_angle(modulus, n, 1.0)
    return float(np.mean(np.cos(phi)))


def classical_elasticas(kind: str, n: int = 256, modulus: float | None = None,
                        alpha: float = 1.0, length: float | None = None,
                        variant: str = "sech") -> LoopState:
    """Reference elasticae: ``circle``, ``figure_eight`` or the modulus-one ``soliton``.

    ``figure_eight`` brackets and bisects the closure defect in the modulus
    unless ``modulus`` is given.  The curvature is ``2 l alpha cn(alpha s | l^2)``.
    ``soliton`` samples the open modulus-one loop on ``|s| <= length/2``; see
    :func:`soliton_gamma` for the two closed forms.
    """
    if kind == "circle":
        return circle(n)
    if kind == "figure_eight":
        if modulus is None:
            try:
                modulus = optimize.brentq(figure_eight_closure, 0.85, 0.95, xtol=1e-14)
            except ValueError as exc:
                raise ClosureFailure(str(exc)) from exc
        length = length or 2 * np.pi
        phi = figure_eight_angle(modulus, n, length)
        state = LoopState(phi, length, 0j, 0)
        if closure_defect(state) > 1e-8 * length:
            raise ClosureFailure(f"figure-eight with l={modulus} does not close")
        return state
    if kind == "soliton":
        length = length or 40.0 / alpha
        s = (np.arange(n) - n // 2) * length / n
        z = soliton_gamma(s, alpha, variant)
        dz = soliton_gamma_prime(s, alpha, variant)
        if variant != "sech":
            raise ValueError("only the sech variant has |gamma'| = 1 and yields a LoopState")
        phi = np.unwrap(np.angle(dz))
        phi = phi - phi[0]
        # total turning is 2π only asymptotically; winding is recorded as 1
        theta = phi - 2 * np.pi * (np.arange(n) / n)
        return LoopState(2 * np.pi * np.arange(n) / n + theta, length, complex(z[0]), 1)
    raise ValueError(f"unknown elastica kind {kind!r}")


def _check_variant(variant: str) -> None:
    if variant not in ("sech", "sinh"):
        raise ValueError(f"unknown soliton variant {variant!r}")


def soliton_gamma(s: np.ndarray, alpha: float = 1.0, variant: str = "sech") -> np.ndarray:
    """Modulus-one elastica ``s - (2/alpha)(tanh(alpha s) - i f(alpha s))``.

    ``variant="sech"`` uses ``f = sech`` (unit speed); ``variant="sinh"`` uses
    ``f = sinh``, which is not an arc-length curve and is kept for comparison.
    """
    _check_variant(variant)
    a = alpha * np.asarray(s, dtype=float)
    f = 1 / np.cosh(a) if variant == "sech" else np.sinh(a)
    return s - (2 / alpha) * (np.tanh(a) - 1j * f)


def soliton_gamma_prime(s: np.ndarray, alpha: float = 1.0, variant: str = "sech") -> np.ndarray:
    _check_variant(variant)
    a = alpha * np.asarray(s, dtype=float)
    sech = 1 / np.cosh(a)
    df = -sech * np.tanh(a) if variant == "sech" else np.cosh(a)
    return 1 - 2 * sech**2 + 2j * df


# -- evolution -----------------------------------------------------------------


@dataclass
class Frame:
    step: int
    time: float
    state: LoopState
    energy: float
    closure: float

    def summary(self) -> dict:
        return {
            "step": self.step,
            "time": self.time,
            "energy": self.energy,
            "closure_defect": self.closure,
            "winding": self.state.winding,
            "length": self.state.length,
        }


@dataclass
class Trajectory:
    params: FlowParams
    frames: list[Frame] = field(default_factory=list)

    @property
    def final(self) -> LoopState:
        return self.frames[-1].state

    def energy_drift(self) -> float:
        e0 = self.frames[0].energy
        return max(abs(f.energy - e0) for f in self.frames) / abs(e0)

    def max_closure(self) -> float:
        return max(f.closure for f in self.frames)


class _Rhs:
    """Spectral right-hand side ``theta_t = theta_sss + k^3/2`` plus basepoint motion."""

    def __init__(self, state: LoopState, dealias: bool):
        self.n = state.n
        self.length = state.length
        self.kbar = state.mean_curvature
        self.k = 2 * np.pi * np.fft.rfftfreq(self.n, d=state.length / self.n)
        self.ik = 1j * self.k
        self.ik[-1] = 0  # Nyquist mode of the first derivative
        self.lin = (1j * self.k) ** 3
        self.lin[-1] = 0
        self.mask = np.ones_like(self.k)
        if dealias:
            self.mask[self.k > (2 / 3) * self.k.max()] = 0

    def nonlinear(self, th: np.ndarray) -> np.ndarray:
        kap = np.fft.irfft(self.ik * th, n=self.n) + self.kbar
        return self.mask * np.fft.rfft(0.5 * kap**3)

    def point_velocity(self, th: np.ndarray) -> complex:
        """``gamma_t`` at s = 0."""
        w = np.full(th.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        th0 = float(np.sum(w * th.real)) / self.n
        k0 = float(np.sum(w * (self.ik * th).real)) / self.n + self.kbar
        ks0 = float(np.sum(w * ((1j * self.k) ** 2 * th).real)) / self.n
        return (0.5 * k0**2 + 1j * ks0) * np.exp(1j * th0)


def evolve_mkdv(state: LoopState, params: FlowParams) -> Trajectory:
    """Evolve the curve by the isometric MKdV flow and record diagnostics.

    Returns a :class:`Trajectory` whose frames hold the state, energy and
    closure defect; the length is carried over unchanged.
    """
    rhs = _Rhs(state, params.dealias)
    dt = params.dt
    if params.scheme is Scheme.RK4_SPECTRAL:
        kmax = rhs.k.max()
        if dt * kmax**3 > 2.5:
            raise StepTooLarge(
                f"dt={dt} exceeds explicit RK4 bound {2.5 / kmax**3:.3e}; "
                "use the integrating_factor scheme"
            )
    th = np.fft.rfft(state.theta)
    base = complex(state.basepoint)
    traj = Trajectory(params)

    def record(step: int, th_hat, base):
        st = LoopState(np.fft.irfft(th_hat, n=rhs.n) + state.mean_curvature * state.s,
                       state.length, base, state.winding)
        traj.frames.append(Frame(step, step * dt, st, energy(st), closure_defect(st)))

    record(0, th, base)
    save = params.save_every
    if params.scheme is Scheme.INTEGRATING_FACTOR:
        e_half = np.exp(rhs.lin * dt / 2)
        e_full = e_half**2
        for step in range(1, params.steps + 1):
            n1 = rhs.nonlinear(th)
            b1 = rhs.point_velocity(th)
            a = e_half * (th + 0.5 * dt * n1)
            n2 = rhs.nonlinear(a)
            b2 = rhs.point_velocity(a)
            b = e_half * th + 0.5 * dt * n2
            n3 = rhs.nonlinear(b)
            b3 = rhs.point_velocity(b)
            c = e_full * th + dt * e_half * n3
            n4 = rhs.nonlinear(c)
            b4 = rhs.point_velocity(c)
            th = e_full * th + dt / 6 * (e_full * n1 + 2 * e_half * (n2 + n3) + n4)
            base = base + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            if not np.all(np.isfinite(th)):
                raise Instability(f"non-finite spectrum at step {step}")
            if (save and step % save == 0) or step == params.steps:
                record(step, th, base)
    else:
        def f(x):
            return rhs.lin * x + rhs.nonlinear(x)

        for step in range(1, params.steps + 1):
            k1 = f(th)
            b1 = rhs.point_velocity(th)
            k2 = f(th + 0.5 * dt * k1)
            b2 = rhs.point_velocity(th + 0.5 * dt * k1)
            k3 = f(th + 0.5 * dt * k2)
            b3 = rhs.point_velocity(th + 0.5 * dt * k2)
            k4 = f(th + dt * k3)
            b4 = rhs.point_velocity(th + dt * k3)
            th = th + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            base = base + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            if not np.all(np.isfinite(th)):
                raise Instability(f"non-finite spectrum at step {step}")
            if (save and step % save == 0) or step == params.steps:
                record(step, th, base)
    return traj


def resolved_band(dt: float, phase: float = 1 / 3) -> float:
    """Largest wavenumber whose linear frequency ``kappa^3`` satisfies ``kappa^3 dt <= phase``."""
    return (phase / dt) ** (1 / 3)


def kdv_residual(u_prev: np.ndarray, u_mid: np.ndarray, u_next: np.ndarray, dt: float,
                 length: float, band: float | None = None) -> float:
    """``max |u_t - (u_sss + 6 u u_s)|`` with a centred time difference.

    With ``band`` set, the residual is projected onto wavenumbers
    ``|kappa| <= band`` before the maximum is taken.  Modes whose frequency
    ``kappa^3`` is not resolved by the step (``kappa^3 dt`` of order one) carry
    only roundoff, yet the centred difference misjudges their time derivative by
    ``O(kappa^3)``; the projection keeps those artefacts out of the measurement.
    """
    ut = (u_next - u_prev) / (2 * dt)
    us = spectral_diff(u_mid, length, 1)
    usss = spectral_diff(u_mid, length, 3)
    r = ut - usss - 6 * u_mid * us
    if band is not None:
        rh = np.fft.fft(r)
        rh[np.abs(wavenumbers(r.size, length)) > band] = 0
        r = np.fft.ifft(rh)
    return float(np.max(np.abs(r)))


@dataclass
class MiuraProbe:
    """KdV residuals of :func:`miura_u` sampled along one trajectory."""

    times: list[float]
    residuals: list[float]
    trajectory: Trajectory

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def miura_probe(state: LoopState, params: FlowParams, times, band: float | None = None
                ) -> MiuraProbe:
    """Evolve ``state`` and measure the KdV residual of ``u`` at the given times.

    Each probe uses the frames one step before and after the probe time.  The
    returned trajectory keeps the frames requested by ``params.save_every``
    plus the final one, so a single run serves both conservation and Miura
    diagnostics.
    """
    dt = params.dt
    probe_steps = sorted({int(round(t / dt)) for t in times})
    if not probe_steps or probe_steps[0] < 1 or probe_steps[-1] + 1 > params.steps:
        raise ValueError("probe times must lie strictly inside the run")
    traj = Trajectory(params)
    cur = state
    done = 0
    residuals = []
    for k in probe_steps:
        leg = evolve_mkdv(cur, replace(params, steps=k - 1 - done))
        _merge(traj, leg, done, dt)
        window = evolve_mkdv(leg.final, replace(params, steps=2, save_every=1))
        us = [miura_u(f.state) for f in window.frames]
        residuals.append(kdv_residual(us[0], us[1], us[2], dt, state.length, band))
        _merge(traj, window, k - 1, dt)
        cur = window.final
        done = k + 1
    leg = evolve_mkdv(cur, replace(params, steps=params.steps - done))
    _merge(traj, leg, done, dt)
    return MiuraProbe([k * dt for k in probe_steps], residuals, traj)


def _merge(traj: Trajectory, leg: Trajectory, offset: int, dt: float) -> None:
    for f in leg.frames:
        step = f.step + offset
        if traj.frames and traj.frames[-1].step == step:
            continue
        traj.frames.append(replace(f, step=step, time=step * dt))


def rigid_align(a: np.ndarray, b: np.ndarray) -> float:
    """Max pointwise distance between ``a`` and the best rotation+translation of ``b``."""
    ac = a - a.mean()
    bc = b - b.mean()
    rot = np.vdot(bc, ac)
    rot = rot / abs(rot) if abs(rot) > 0 else 1.0
    return float(np.max(np.abs(ac - rot * bc)))


def shift_samples(f: np.ndarray, shift: float, length: float) -> np.ndarray:
    """Spectral interpolation ``f(s + shift)`` of periodic samples."""
    k = wavenumbers(f.size, length)
    return np.fft.ifft(np.fft.fft(f) * np.exp(1j * k * shift))


def shape_distance(a: LoopState, b: LoopState) -> float:
    """Distance between curve shapes modulo rigid motion and a shift of the start point."""
    za = positions(a)
    zb = positions(b)
    length = a.length

    def cost(shift):
        return rigid_align(za, shift_samples(zb, shift, length))

    grid = np.linspace(0, length, 64, endpoint=False)
    best = grid[int(np.argmin([cost(x) for x in grid]))]
    res = optimize.minimize_scalar(cost, bracket=(best - length / 64, best, best + length / 64),
                                   tol=1e-12)
    return float(min(res.fun, cost(best)))
