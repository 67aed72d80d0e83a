"""Synchronous couplings, distance traces and the distorted jump-process metric.

Two copies are driven by the same draws: the same initial velocity for every
transition and the same random time inside every stratum.  Under the convexity
and duration conditions this makes the distance between the copies shrink
almost surely, which is what the diagnostics here measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrators import IntegratorParams, PhasePoint, exact_flow_gaussian, smc_step
from .potentials import PotentialModel
from .randomness import RandomStream
from .samplers import jump_event, mean_holding_time, refresh_probability, _check_jump_args

NUMERICAL_FLOOR = 1e-12


@dataclass
class CouplingTrace:
    """Distances between two coupled copies; axis 0 indexes steps or events."""

    distances: np.ndarray
    times: np.ndarray
    max_ratio: float
    mean_ratio: float
    rho2: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def ratio_stats(self) -> tuple[float, float]:
        return self.max_ratio, self.mean_ratio


def _norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=-1))


def squared_ratios(distances: np.ndarray) -> np.ndarray:
    """Per-step ``|Z_{k+1}|^2 / |Z_k|^2``; steps starting from zero distance are NaN."""
    d2 = np.asarray(distances, dtype=float) ** 2
    prev, nxt = d2[:-1], d2[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(prev > 0, nxt / np.where(prev > 0, prev, 1.0), np.nan)


def _ratio_summary(distances: np.ndarray) -> tuple[float, float]:
    r = squared_ratios(distances)
    r = r[np.isfinite(r)]
    if r.size == 0:
        return 0.0, 0.0
    return float(r.max()), float(r.mean())


def coupled_smc_pair(
    model: PotentialModel, x, y, v, params: IntegratorParams, stream: RandomStream
) -> tuple[PhasePoint, PhasePoint]:
    """sMC flows from ``(x, v)`` and ``(y, v)`` sharing every stratum offset."""
    a = PhasePoint.of(x, v)
    b = PhasePoint.of(y, v)
    for _ in range(params.n):
        u = stream.uniform(0.0, params.h)
        a = smc_step(model, a, params.h, u)
        b = smc_step(model, b, params.h, u)
    return a, b


def synchronous_coupling_uhmc(
    model: PotentialModel, x0, y0, params: IntegratorParams, m: int, stream: RandomStream
) -> CouplingTrace:
    """``m`` coupled uHMC transitions; ``distances[k]`` is ``|X^k - Y^k|`` per lane."""
    if m < 1:
        raise ValueError(f"number of transitions must be >= 1, got {m}")
    x = np.asarray(x0, dtype=float)
    y = np.asarray(y0, dtype=float)
    out = [_norm(x - y)]
    for _ in range(m):
        xi = stream.normal(model.dim)
        a, b = coupled_smc_pair(model, x, y, xi, params, stream)
        x, y = a.x, b.x
        out.append(_norm(x - y))
    distances = np.stack(out)
    return CouplingTrace(distances, np.arange(m + 1) * params.T, *_ratio_summary(distances))


def coupled_with_exact_uhmc(
    model: PotentialModel, x0, params: IntegratorParams, m: int, stream: RandomStream
) -> tuple[np.ndarray, np.ndarray]:
    """``m`` uHMC transitions alongside exact HMC sharing every velocity draw.

    Returns the final positions ``(discretised, exact)``.  Started from the
    target, the exact copy stays exactly distributed, so the gap measures the
    discretisation bias through a coupling.
    """
    x = np.asarray(x0, dtype=float)
    y = x.copy()
    for _ in range(m):
        xi = stream.normal(model.dim)
        state = PhasePoint(x, xi)
        for _ in range(params.n):
            state = smc_step(model, state, params.h, stream.uniform(0.0, params.h))
        x = state.x
        y = exact_flow_gaussian(model, PhasePoint(y, xi), params.T).x
    return x, y


def distorted_metric(z, w, lam: float) -> np.ndarray:
    """``|z|^2/4 + <z, w>/(2 lam) + |w|^2/lam^2``: a squared distance on phase space."""
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    return (
        0.25 * np.sum(z * z, axis=-1)
        + (0.5 / lam) * np.sum(z * w, axis=-1)
        + np.sum(w * w, axis=-1) / lam**2
    )


def metric_bounds(z, w, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean sandwich ``(lower, upper)`` for the distorted metric."""
    r2 = np.sum(np.asarray(z) ** 2, axis=-1) + np.sum(np.asarray(w) ** 2, axis=-1)
    lower = 0.125 * min(1.0, 4.0 / lam**2) * r2
    upper = max(1.0, 13.0 / (12.0 * lam**2)) * r2
    return lower, upper


def metric_equivalence_holds(z, w, lam: float, rtol: float = 1e-12) -> np.ndarray:
    rho2 = distorted_metric(z, w, lam)
    lower, upper = metric_bounds(z, w, lam)
    slack = rtol * upper
    return (lower - slack <= rho2) & (rho2 <= upper + slack)


@dataclass
class MJPCouplingTrace(CouplingTrace):
    velocity_gaps: np.ndarray | None = None
    equivalence_ok: bool = True


def synchronous_coupling_mjp(
    model: PotentialModel,
    state_a: PhasePoint,
    state_b: PhasePoint,
    lam: float,
    h: float,
    t_end: float,
    stream: RandomStream,
) -> MJPCouplingTrace:
    """Two jump processes sharing holding times, event types, velocities and offsets.

    The trace starts with the initial states at time 0 and then records the
    distorted metric and ``|z|`` at each event up to ``t_end``.
    """
    _check_jump_args(lam, h, t_end)
    if stream.batched:
        raise ValueError("synchronous_coupling_mjp expects a single stream")
    a = PhasePoint.of(state_a.x, state_a.v)
    b = PhasePoint.of(state_b.x, state_b.v)
    times, zs, ws = [0.0], [a.x - b.x], [a.v - b.v]
    t = 0.0
    while True:
        dt = stream.exponential(mean_holding_time(lam, h))
        xi = stream.normal(model.dim)
        u = stream.uniform(0.0, h)
        selector = stream.uniform(0.0, 1.0)
        t += float(dt)
        if t > t_end:
            break
        if selector <= refresh_probability(lam, h):
            a, b = PhasePoint(a.x, xi), PhasePoint(b.x, xi)
        else:
            a, b = smc_step(model, a, h, u), smc_step(model, b, h, u)
        times.append(t)
        zs.append(a.x - b.x)
        ws.append(a.v - b.v)
    z = np.asarray(zs)
    w = np.asarray(ws)
    distances = _norm(z)
    rho2 = distorted_metric(z, w, lam)
    return MJPCouplingTrace(
        distances,
        np.asarray(times),
        *_ratio_summary(distances),
        rho2=rho2,
        velocity_gaps=_norm(w),
        equivalence_ok=bool(np.all(metric_equivalence_holds(z, w, lam))),
    )


def coupled_with_exact_mjp(
    model: PotentialModel,
    state0: PhasePoint,
    lam: float,
    h: float,
    events: int,
    stream: RandomStream,
) -> tuple[PhasePoint, PhasePoint]:
    """Jump process alongside its exact-flow counterpart for a fixed number of events.

    Both copies share every draw; the exact copy replaces ``smc_step`` by the
    Hamiltonian flow over ``h``.  Works on lane-batched streams because the
    embedded chain, unlike the time-indexed path, needs no per-lane clock.
    """
    a = PhasePoint.of(state0.x, state0.v)
    b = a
    p = refresh_probability(lam, h)
    for _ in range(events):
        stream.exponential(mean_holding_time(lam, h))
        xi = stream.normal(model.dim)
        u = stream.uniform(0.0, h)
        selector = stream.uniform(0.0, 1.0)
        keep = (np.asarray(selector) <= p)[..., None]
        moved = smc_step(model, a, h, u)
        exact = exact_flow_gaussian(model, b, h)
        a = PhasePoint(np.where(keep, a.x, moved.x), np.where(keep, xi, moved.v))
        b = PhasePoint(np.where(keep, b.x, exact.x), np.where(keep, xi, exact.v))
    return a, b


def fit_decay(times, msd, floor: float = NUMERICAL_FLOOR) -> tuple[float, float, int]:
    """Least-squares exponential rate of a mean squared distance curve.

    Fits ``log msd`` against ``times`` on the prefix before ``sqrt(msd)``
    first drops below ``floor``.  Returns ``(rate, intercept, points_used)``
    where ``msd ~ exp(intercept - rate * t)``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(msd, dtype=float)
    below = np.nonzero(~(np.sqrt(y) >= floor))[0]
    stop = below[0] if below.size else len(y)
    if stop < 2:
        raise ValueError("fewer than two points above the numerical floor")
    slope, intercept = np.polyfit(t[:stop], np.log(y[:stop]), 1)
    return float(-slope), float(intercept), int(stop)
