"""Time integrators for the unit-mass Hamiltonian flow ``x' = v, v' = -grad U(x)``.

All maps work on batches: positions and velocities have shape ``(..., d)``
and per-step random offsets have shape ``(...)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .potentials import DomainError, PotentialModel
from .randomness import RandomStream

DEFAULT_QUAD_ORDER = 16
REFERENCE_RATIO = 64


class PhasePoint(NamedTuple):
    x: np.ndarray
    v: np.ndarray

    @classmethod
    def of(cls, x, v) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.shape != v.shape:
            raise ValueError(f"position {x.shape} and velocity {v.shape} shapes differ")
        return cls(x, v)

    def flip(self) -> "PhasePoint":
        return PhasePoint(self.x, -self.v)


@dataclass(frozen=True)
class IntegratorParams:
    """Duration ``T`` split into ``n`` steps of size ``h`` with ``n * h == T``."""

    T: float
    h: float
    n: int

    @classmethod
    def from_duration(cls, T: float, h: float) -> "IntegratorParams":
        """Round ``T / h`` to the nearest integer and redefine ``h := T / n``."""
        if T < 0:
            raise ValueError(f"duration must be >= 0, got {T}")
        if not h > 0:
            raise ValueError(f"step size must be positive, got {h}")
        if T == 0:
            return cls(0.0, float(h), 0)
        n = max(1, int(round(T / h)))
        h_new = T / n
        if abs(h_new - h) > 1e-12 * h:
            warnings.warn(
                f"step size adjusted from {h!r} to {h_new!r} so that T/h = {n}", stacklevel=2
            )
        return cls(float(T), h_new, n)

    @property
    def grid(self) -> np.ndarray:
        return self.h * np.arange(self.n + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray  # (n + 1, ..., d)
    v: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PhasePoint:
        return PhasePoint(self.x[i], self.v[i])

    @property
    def final(self) -> PhasePoint:
        return self.state(-1)


def _per_row(a) -> np.ndarray:
    # one scalar per batch row, broadcast against trailing coordinate axis
    a = np.asarray(a, dtype=float)
    return a[..., None] if a.ndim else a


def smc_step(model: PotentialModel, state: PhasePoint, h: float, u_offset) -> PhasePoint:
    """One stratified Monte Carlo step with the force frozen at ``x + u_offset * v``.

    ``u_offset`` is the position of the random time inside the stratum,
    ``0 <= u_offset < h``; it may be an array with one entry per batch row.
    """
    u = np.asarray(u_offset, dtype=float)
    if np.any(u < 0) or np.any(u >= h):
        raise ValueError(f"u_offset must lie in [0, h={h})")
    x, v = state
    f = -model.gradient(x + _per_row(u) * v)
    return PhasePoint(x + h * v + (0.5 * h * h) * f, v + h * f)


def smc_trajectory(
    model: PotentialModel, state0: PhasePoint, params: IntegratorParams, stream: RandomStream
) -> Trajectory:
    """Run ``params.n`` sMC steps drawing one uniform offset per stratum."""
    xs = [state0.x]
    vs = [state0.v]
    state = state0
    for _ in range(params.n):
        state = smc_step(model, state, params.h, stream.uniform(0.0, params.h))
        xs.append(state.x)
        vs.append(state.v)
    return Trajectory(params.grid, np.stack(xs), np.stack(vs))


def smc_flow(
    model: PotentialModel, state0: PhasePoint, params: IntegratorParams, stream: RandomStream
) -> PhasePoint:
    """Endpoint of :func:`smc_trajectory` without storing the grid states."""
    state = state0
    for _ in range(params.n):
        state = smc_step(model, state, params.h, stream.uniform(0.0, params.h))
    return state


def _drift(state: PhasePoint, t: float) -> PhasePoint:
    return PhasePoint(state.x + t * state.v, state.v)


def _kick(model: PotentialModel, state: PhasePoint, t: float) -> PhasePoint:
    return PhasePoint(state.x, state.v + t * -model.gradient(state.x))


def two_stage_step(model: PotentialModel, state: PhasePoint, h: float, b) -> PhasePoint:
    """Palindromic splitting drift(b h) kick(h/2) drift((1-2b) h) kick(h/2) drift(b h).

    Volume preserving and reversible under velocity flip for every
    ``b in [0, 1/2]``; ``b = 0`` is velocity Verlet, ``b = 1/2`` position
    Verlet.  ``b`` may be an array (one value per batch row).  Always two
    gradient evaluations.
    """
    b_arr = np.asarray(b, dtype=float)
    if np.any(b_arr < 0) or np.any(b_arr > 0.5):
        raise ValueError(f"b must lie in [0, 1/2], got {b}")
    bh = _per_row(b_arr * h)
    mid = _per_row((1.0 - 2.0 * b_arr) * h)
    state = _drift(state, bh)
    state = _kick(model, state, 0.5 * h)
    state = _drift(state, mid)
    state = _kick(model, state, 0.5 * h)
    return _drift(state, bh)


def verlet_step(model: PotentialModel, state: PhasePoint, h: float) -> PhasePoint:
    """Velocity Verlet (kick-drift-kick)."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    # same floating point sequence as two_stage_step(..., b=0)
    state = _kick(model, state, 0.5 * h)
    state = _drift(state, h)
    return _kick(model, state, 0.5 * h)


def verlet_flow(model: PotentialModel, state: PhasePoint, params: IntegratorParams) -> PhasePoint:
    for _ in range(params.n):
        state = verlet_step(model, state, params.h)
    return state


def exact_flow_gaussian(model: PotentialModel, state: PhasePoint, t) -> PhasePoint:
    """Closed-form flow of the linear oscillator, coordinate by coordinate."""
    if not model.is_gaussian:
        raise DomainError(f"closed-form flow needs a Gaussian model, got {model.kind}")
    omega = np.sqrt(model.curvatures)
    t = np.asarray(t, dtype=float)
    wt = omega * (t[..., None] if t.ndim else t)
    c, s = np.cos(wt), np.sin(wt)
    x, v = state
    return PhasePoint(x * c + (v / omega) * s, -x * omega * s + v * c)


def reference_flow(model: PotentialModel, state: PhasePoint, t: float, h_ref: float) -> PhasePoint:
    """Fine-step Verlet stand-in for the exact flow.

    Keep ``h_ref`` at most 1/64 of the smallest step being measured so the
    reference error is negligible.
    """
    if not h_ref > 0:
        raise ValueError(f"reference step must be positive, got {h_ref}")
    n = int(round(t / h_ref))
    if n == 0:
        return state
    if abs(n * h_ref - t) > 1e-9 * max(t, 1.0):
        raise ValueError(f"t={t} is not an integer multiple of h_ref={h_ref}")
    h = t / n
    x, v = state
    half = 0.5 * h
    g = model.gradient(x)
    for _ in range(n):
        v = v - half * g
        x = x + h * v
        g = model.gradient(x)
        v = v - half * g
    return PhasePoint(x, v)


def stratum_average_force(
    model: PotentialModel, state: PhasePoint, h: float, quad_order: int = DEFAULT_QUAD_ORDER
) -> np.ndarray:
    """Mean force ``-(1/h) int_0^h grad U(x + s v) ds`` along the free-flight line."""
    if quad_order < 2:
        raise ValueError(f"quad_order must be >= 2, got {quad_order}")
    x, v = state
    if model.is_gaussian:
        return -model.gradient(x + 0.5 * h * v)
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    s = 0.5 * h * (nodes + 1.0)
    total = np.zeros_like(np.asarray(x, dtype=float))
    for si, wi in zip(s, weights):
        total = total + wi * model.gradient(x + si * v)
    return -0.5 * total


def hamiltonian(model: PotentialModel, state: PhasePoint) -> np.ndarray:
    x, v = state
    return 0.5 * np.sum(np.asarray(v) ** 2, axis=-1) + model.energy(x)
