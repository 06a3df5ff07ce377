"""Pseudo-spectral solver for the limiting compressible system on a periodic box.

State: density rho > 0 and velocity v.  Drift: d rho = -div(rho v) dt,
d v_q = -(v . grad v_q + (1/rho) d_q p) dt with pressure p = rho^2 / 2, so
the velocity drift reduces to -(v . grad) v_q - d_q rho; both pressure forms
are evaluated and their gap is tracked as a consistency diagnostic.  The
noise enters as an additive velocity kick v_q += sigma_q(t, x) dY^q after
each deterministic stage.  Pre-shock smooth regime only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "FluidState",
    "SigmaField",
    "rhs_deterministic",
    "pressure_forms_gap",
    "step_field",
    "noise_kick",
    "interpolate_state",
    "diagnostics",
    "dealias",
    "upsample",
]

VACUUM_FLOOR_DEFAULT = 1e-3


@dataclass(frozen=True)
class Grid:
    """Periodic box [0, L)^d discretized with M nodes per side."""

    box: float
    m: int
    dim: int = 1

    def __post_init__(self) -> None:
        if self.box <= 0 or self.m < 4 or self.dim not in (1, 2):
            raise ValueError("invalid grid parameters")

    @property
    def h(self) -> float:
        return self.box / self.m

    def nodes(self) -> np.ndarray:
        x = np.arange(self.m) * self.h
        if self.dim == 1:
            return x
        return np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)

    def wavenumbers(self, axis: int = 0) -> np.ndarray:
        k = 2.0 * np.pi * np.fft.fftfreq(self.m, d=self.h)
        if self.dim == 1:
            return k
        shape = [1, 1]
        shape[axis] = self.m
        return k.reshape(shape)

    def cell_volume(self) -> float:
        return self.h**self.dim


@dataclass(frozen=True)
class FluidState:
    """Gridded (rho, v) at one time.  v has a leading component axis."""

    grid: Grid
    rho: np.ndarray
    v: np.ndarray
    time: float = 0.0
    vacuum_floor: float = VACUUM_FLOOR_DEFAULT

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if v.shape[0] != self.grid.dim:
            raise ValueError("velocity must have a leading component axis")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite fluid state")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "v", v)

    def mass(self) -> float:
        return float(np.sum(self.rho) * self.grid.cell_volume())


@dataclass(frozen=True)
class SigmaField:
    """Noise coefficient sigma(t, x): component q multiplies dY^q.

    ``fn(t, x_nodes)`` returns an array shaped like one velocity component
    set (dim, M, ...); the default is the constant field of ``amplitude``.
    """

    amplitude: float = 1.0
    modulation: float = 0.0
    fn: Callable | None = None

    def __call__(self, t: float, grid: Grid) -> np.ndarray:
        if self.fn is not None:
            return np.asarray(self.fn(t, grid.nodes()), dtype=float)
        x = grid.nodes()
        if grid.dim == 1:
            base = self.amplitude * (1.0 + self.modulation * np.cos(2.0 * np.pi * x / grid.box))
            return base[None, :]
        r = x[..., 0]
        base = self.amplitude * (1.0 + self.modulation * np.cos(2.0 * np.pi * r / grid.box))
        return np.stack([base] * grid.dim, axis=0)

    def at(self, t: float, points: np.ndarray, box: float, dim: int) -> np.ndarray:
        """Pointwise evaluation at particle positions, shape (n, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.fn is not None:
            # Pointwise closures must accept raw coordinates.
            return np.asarray(self.fn(t, pts), dtype=float)
        base = self.amplitude * (1.0 + self.modulation * np.cos(2.0 * np.pi * pts[:, 0] / box))
        return np.repeat(base[:, None], dim, axis=1)


def _deriv(f: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    fk = np.fft.fftn(f)
    return np.fft.ifftn(1j * grid.wavenumbers(axis) * fk).real


def dealias(f: np.ndarray, grid: Grid) -> np.ndarray:
    """2/3-rule spectral truncation (idempotent)."""
    fk = np.fft.fftn(f)
    cut = grid.m // 3
    freq = np.fft.fftfreq(grid.m) * grid.m
    if grid.dim == 1:
        mask = np.abs(freq) <= cut
    else:
        mask = (np.abs(freq)[:, None] <= cut) & (np.abs(freq)[None, :] <= cut)
    return np.fft.ifftn(fk * mask).real


def rhs_deterministic(state: FluidState) -> tuple[np.ndarray, np.ndarray]:
    """Drift (d rho, d v); aborts if the density reaches the vacuum floor."""
    g = state.grid
    rho, v = state.rho, state.v
    if float(np.min(rho)) <= state.vacuum_floor:
        raise FloatingPointError(
            f"density {np.min(rho):.3e} at or below vacuum floor "
            f"{state.vacuum_floor:.1e} (1/rho singular)"
        )
    drho = np.zeros_like(rho)
    for q in range(g.dim):
        drho -= _deriv(dealias(rho * v[q], g), g, axis=q)
    dv = np.zeros_like(v)
    for q in range(g.dim):
        adv = np.zeros_like(rho)
        for r in range(g.dim):
            adv += v[r] * _deriv(v[q], g, axis=r)
        dv[q] = -dealias(adv, g) - _deriv(rho, g, axis=q)
    return drho, dv


def pressure_forms_gap(state: FluidState) -> float:
    """Sup gap between (1/rho) grad(rho^2/2) and grad rho (analytically equal)."""
    g = state.grid
    gap = 0.0
    for q in range(g.dim):
        a = _deriv(0.5 * state.rho**2, g, axis=q) / state.rho
        b = _deriv(state.rho, g, axis=q)
        gap = max(gap, float(np.max(np.abs(a - b))))
    return gap


def max_signal_speed(state: FluidState) -> float:
    speed = np.sqrt(np.sum(state.v**2, axis=0))
    return float(np.max(speed + np.sqrt(np.maximum(state.rho, 0.0))))


def step_field(
    state: FluidState,
    dt: float,
    dy: np.ndarray | None = None,
    sigma: SigmaField | None = None,
    cfl: float = 0.5,
) -> FluidState:
    """One step: SSP-RK3 on the deterministic drift, then the noise kick.

    Refuses dt above the advective stability bound cfl * h / max(|v| + c).
    """
    g = state.grid
    limit = cfl * g.h / max(max_signal_speed(state), 1e-30)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:.3e} violates CFL bound {limit:.3e}")

    def euler(rho, v):
        s = replace(state, rho=rho, v=v)
        drho, dv = rhs_deterministic(s)
        return rho + dt * drho, v + dt * dv

    r1, v1 = euler(state.rho, state.v)
    r2, v2 = euler(r1, v1)
    r2 = 0.75 * state.rho + 0.25 * r2
    v2 = 0.75 * state.v + 0.25 * v2
    r3, v3 = euler(r2, v2)
    rho_new = state.rho / 3.0 + 2.0 / 3.0 * r3
    v_new = state.v / 3.0 + 2.0 / 3.0 * v3
    t_new = state.time + dt
    out = replace(state, rho=rho_new, v=v_new, time=t_new)
    if dy is not None and sigma is not None:
        out = noise_kick(out, dy, sigma, at_time=state.time)
    if not (np.all(np.isfinite(out.rho)) and np.all(np.isfinite(out.v))):
        raise FloatingPointError("non-finite fluid state after step")
    return out


def noise_kick(
    state: FluidState, dy: np.ndarray, sigma: SigmaField, at_time: float | None = None
) -> FluidState:
    """v_q += sigma_q(t, x) dY^q; density untouched (additive Young-Euler kick)."""
    t = state.time if at_time is None else at_time
    sig = sigma(t, state.grid)
    dy = np.atleast_1d(np.asarray(dy, dtype=float))
    v_new = state.v.copy()
    for q in range(state.grid.dim):
        v_new[q] = v_new[q] + sig[q] * dy[q]
    return replace(state, v=v_new)


class FieldInterpolant:
    """Trigonometric interpolation of a periodic gridded field and its gradient.

    Exact for band-limited fields; built once per field, then evaluated at
    arbitrary point sets.
    """

    def __init__(self, values: np.ndarray, grid: Grid):
        self.grid = grid
        self.coeff = np.fft.fftn(values) / values.size
        if grid.dim == 1:
            self.k = 2.0 * np.pi * np.fft.fftfreq(grid.m, d=grid.h)
        else:
            k = 2.0 * np.pi * np.fft.fftfreq(grid.m, d=grid.h)
            self.kx = k[:, None]
            self.ky = k[None, :]

    def __call__(self, pts: np.ndarray, derivative: int | None = None) -> np.ndarray:
        g = self.grid
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if g.dim == 1:
            phase = np.exp(1j * np.outer(pts[:, 0], self.k))
            c = self.coeff if derivative is None else 1j * self.k * self.coeff
            return (phase @ c).real
        ex = np.exp(1j * np.outer(pts[:, 0], self.kx.ravel()))
        ey = np.exp(1j * np.outer(pts[:, 1], self.ky.ravel()))
        c = self.coeff
        if derivative == 0:
            c = 1j * self.kx * c
        elif derivative == 1:
            c = 1j * self.ky * c
        # sum_k c[kx,ky] e^{i kx x} e^{i ky y} evaluated per point
        return np.einsum("pk,kl,pl->p", ex, c, ey).real


def interpolate_state(state: FluidState, points: np.ndarray):
    """(rho, v, grad_rho, grad_v) at arbitrary points by spectral interpolation.

    grad_v[p, q, r] = d_r v_q at point p.
    """
    g = state.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float)) % g.box
    n = pts.shape[0]
    rho_i = FieldInterpolant(state.rho, g)
    rho = rho_i(pts)
    grad_rho = np.stack([rho_i(pts, derivative=r) for r in range(g.dim)], axis=-1)
    v = np.empty((n, g.dim))
    grad_v = np.empty((n, g.dim, g.dim))
    for q in range(g.dim):
        vi = FieldInterpolant(state.v[q], g)
        v[:, q] = vi(pts)
        for r in range(g.dim):
            grad_v[:, q, r] = vi(pts, derivative=r)
    return rho, v, grad_rho, grad_v


def upsample(values: np.ndarray, grid: Grid, m_fine: int) -> np.ndarray:
    """Zero-padded spectral upsampling onto a finer grid of the same box."""
    if m_fine == grid.m:
        return values.copy()
    if m_fine < grid.m or grid.dim != 1:
        raise ValueError("upsample: need m_fine >= m, d=1")
    fk = np.fft.rfft(values)
    out = np.zeros(m_fine // 2 + 1, dtype=complex)
    out[: fk.shape[0]] = fk
    return np.fft.irfft(out, n=m_fine) * (m_fine / grid.m)


def diagnostics(state: FluidState) -> dict:
    g = state.grid
    momentum = [float(np.sum(state.rho * state.v[q]) * g.cell_volume()) for q in range(g.dim)]
    return {
        "mass": state.mass(),
        "momentum": momentum,
        "min_density": float(np.min(state.rho)),
        "max_speed": float(np.max(np.sqrt(np.sum(state.v**2, axis=0)))),
    }
