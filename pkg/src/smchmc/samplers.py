"""Markov chains built on the integrators.

* unadjusted HMC with stratified Monte Carlo integration and full velocity refresh,
* exact HMC on Gaussian targets,
* Metropolis-adjusted HMC whose proposal composes randomly chosen 2-stage maps,
* duration-randomised uHMC, a jump process alternating sMC steps and refreshes,

plus the step-size / duration calculators derived from the convergence bounds.

Random draws are taken in a fixed order per transition so that two copies
fed from the same stream stay synchronously coupled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrators import (
    IntegratorParams,
    PhasePoint,
    exact_flow_gaussian,
    hamiltonian,
    smc_flow,
    smc_step,
    two_stage_step,
)
from .potentials import DomainError, PotentialModel
from .randomness import RandomStream

UNIFORM_CONTINUOUS = "uniform_continuous"
UNIFORM_TWO_POINT = "uniform_two_point"
RHO_KINDS = (UNIFORM_CONTINUOUS, UNIFORM_TWO_POINT)

REFRESH = "refresh"
INTEGRATE = "integrate"


@dataclass
class ChainRecord:
    positions: np.ndarray  # (m + 1, ..., d)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass
class JumpPath:
    """Embedded chain of the jump process; the path is constant between events."""

    start_time: float
    start: PhasePoint
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    tags: np.ndarray  # REFRESH / INTEGRATE per event

    def __len__(self) -> int:
        return len(self.times)

    @property
    def refreshed(self) -> np.ndarray:
        return self.tags == REFRESH


@dataclass
class TuningResult:
    """Hyperparameters from the complexity bounds.

    For the fixed-duration chain ``c`` is the per-transition contraction
    coefficient and ``m`` the number of transitions.  For the jump process
    ``T`` is the mean duration ``1/lam``, ``c`` equals the rate ``gamma`` per
    unit time and ``m`` is the expected number of integration steps
    ``t_end / h``.
    """

    T: float
    h: float
    m: int
    c: float
    n: Optional[int] = None
    h_star: Optional[float] = None
    lam: Optional[float] = None
    t_end: Optional[float] = None
    gamma: Optional[float] = None

    @property
    def grad_evals(self) -> int:
        if self.n is not None:
            return self.m * self.n
        return self.m


def _velocity(stream: RandomStream, d: int) -> np.ndarray:
    return stream.normal(d)


def uhmc_step(model: PotentialModel, x, params: IntegratorParams, stream: RandomStream) -> np.ndarray:
    """One uHMC transition: fresh Gaussian velocity, sMC flow over ``T``, keep the position."""
    x = np.asarray(x, dtype=float)
    xi = _velocity(stream, model.dim)
    return smc_flow(model, PhasePoint(x, xi), params, stream).x


def uhmc_chain(
    model: PotentialModel, x0, params: IntegratorParams, m: int, stream: RandomStream
) -> ChainRecord:
    if m < 0:
        raise ValueError(f"number of transitions must be >= 0, got {m}")
    xs = [np.asarray(x0, dtype=float)]
    for _ in range(m):
        xs.append(uhmc_step(model, xs[-1], params, stream))
    return ChainRecord(np.stack(xs))


def exact_hmc_step(model: PotentialModel, x, T: float, stream: RandomStream) -> np.ndarray:
    if not model.is_gaussian:
        raise DomainError(f"exact HMC is only available for Gaussian models, got {model.kind}")
    xi = _velocity(stream, model.dim)
    return exact_flow_gaussian(model, PhasePoint(np.asarray(x, dtype=float), xi), T).x


def draw_stage_parameters(stream: RandomStream, N: int, rho_kind: str) -> np.ndarray:
    """``N`` i.i.d. values of ``b`` from Uniform(0, 1/2) or Uniform{0, 1/2}."""
    u = stream.uniform(0.0, 1.0, size=N)
    if rho_kind == UNIFORM_CONTINUOUS:
        return 0.5 * u
    if rho_kind == UNIFORM_TWO_POINT:
        return np.where(u < 0.5, 0.0, 0.5)
    raise ValueError(f"unknown rho kind {rho_kind!r}; expected one of {RHO_KINDS}")


def adjusted_proposal(model: PotentialModel, state: PhasePoint, h: float, bs) -> PhasePoint:
    """Compose 2-stage steps with parameters ``bs[..., 0], bs[..., 1], ...`` in order."""
    bs = np.asarray(bs, dtype=float)
    for j in range(bs.shape[-1]):
        state = two_stage_step(model, state, h, bs[..., j])
    return state


def adjusted_hmc_transition(
    model: PotentialModel, x, h: float, N: int, rho_kind: str, stream: RandomStream
) -> tuple[PhasePoint, np.ndarray, np.ndarray]:
    """Adjusted HMC step returning ``(new_state, accepted, delta_H)``.

    Draw order: velocity, the ``N`` stage parameters, then the accept uniform.
    On rejection the returned state is the velocity-flipped start ``(x, -xi)``.
    """
    if N < 1:
        raise ValueError(f"number of integration steps must be >= 1, got {N}")
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    xi = _velocity(stream, model.dim)
    bs = draw_stage_parameters(stream, N, rho_kind)
    accept_u = stream.uniform(0.0, 1.0)
    start = PhasePoint(x, xi)
    proposal = adjusted_proposal(model, start, h, bs)
    delta_h = hamiltonian(model, proposal) - hamiltonian(model, start)
    with np.errstate(over="ignore", invalid="ignore"):
        accepted = accept_u <= np.exp(-np.maximum(delta_h, 0.0))
    keep = np.asarray(accepted)[..., None] if np.ndim(accepted) else accepted
    new = PhasePoint(np.where(keep, proposal.x, x), np.where(keep, proposal.v, -xi))
    return new, accepted, delta_h


def adjusted_hmc_step(
    model: PotentialModel, state: PhasePoint, h: float, N: int, rho_kind: str, stream: RandomStream
) -> PhasePoint:
    """Metropolis-adjusted HMC transition; the incoming velocity is discarded."""
    return adjusted_hmc_transition(model, state.x, h, N, rho_kind, stream)[0]


def refresh_probability(lam: float, h: float) -> float:
    return lam * h / (1.0 + lam * h)


def mean_holding_time(lam: float, h: float) -> float:
    return h / (lam * h + 1.0)


def _check_jump_args(lam: float, h: float, t_end: float) -> None:
    for name, value in (("lam", lam), ("h", h), ("t_end", t_end)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def jump_event(
    model: PotentialModel, state: PhasePoint, lam: float, h: float, stream: RandomStream
) -> tuple[PhasePoint, np.ndarray, np.ndarray]:
    """One jump of duration-randomised uHMC: ``(new_state, holding_time, refreshed)``.

    All four variables (holding time, velocity, stratum offset, selector) are
    drawn on every event, in that order.
    """
    dt = stream.exponential(mean_holding_time(lam, h))
    xi = _velocity(stream, model.dim)
    u = stream.uniform(0.0, h)
    selector = stream.uniform(0.0, 1.0)
    refreshed = selector <= refresh_probability(lam, h)
    moved = smc_step(model, state, h, u)
    keep = np.asarray(refreshed)[..., None] if np.ndim(refreshed) else refreshed
    new = PhasePoint(np.where(keep, state.x, moved.x), np.where(keep, xi, moved.v))
    return new, dt, refreshed


def randomized_uhmc_run(
    model: PotentialModel,
    state0: PhasePoint,
    lam: float,
    h: float,
    t_end: float,
    stream: RandomStream,
    t0: float = 0.0,
) -> JumpPath:
    """Simulate the jump process on ``[t0, t_end]`` for a single (unbatched) stream.

    The first event whose time exceeds ``t_end`` is drawn but not recorded.
    """
    _check_jump_args(lam, h, t_end)
    if stream.batched:
        raise ValueError("randomized_uhmc_run expects a single stream")
    state = PhasePoint.of(state0.x, state0.v)
    t = t0
    times, xs, vs, tags = [], [], [], []
    while True:
        new, dt, refreshed = jump_event(model, state, lam, h, stream)
        t += float(dt)
        if t > t_end:
            break
        state = new
        times.append(t)
        xs.append(state.x)
        vs.append(state.v)
        tags.append(REFRESH if refreshed else INTEGRATE)
    d = model.dim
    return JumpPath(
        t0,
        PhasePoint.of(state0.x, state0.v),
        np.asarray(times, dtype=float),
        np.asarray(xs, dtype=float).reshape(-1, d),
        np.asarray(vs, dtype=float).reshape(-1, d),
        np.asarray(tags, dtype=object),
    )


def _check_constants(K: float, L: float) -> None:
    if not (0 < K <= L):
        raise ValueError(f"need 0 < K <= L, got K={K}, L={L}")


def tune_uhmc(
    K: float, L: float, d: int, eps: float, w2_init: float, relax: float = 1.0
) -> TuningResult:
    """Duration, step size and transition count guaranteeing W2 accuracy ``eps``.

    ``T = (8L)^(-1/2)`` saturates ``L T^2 <= 1/8``; ``h`` is the largest
    step below ``relax * h_star`` that divides ``T``.
    """
    _check_constants(K, L)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if w2_init < 0:
        raise ValueError(f"w2_init must be >= 0, got {w2_init}")
    if not relax > 0:
        raise ValueError(f"relax must be positive, got {relax}")
    T = (8.0 * L) ** -0.5
    c = K / (48.0 * L)
    log_term = max(math.log(2.0 * w2_init / eps), 0.0) if w2_init > 0 else 0.0
    m = math.ceil(log_term / c)
    h_star = math.exp(-4.0) * (c * (eps / 2.0) / (d**0.5 * (L / K) ** 0.5 * L**0.25)) ** (2.0 / 3.0)
    n = math.ceil(T / (relax * h_star))
    return TuningResult(T=T, h=T / n, m=m, c=c, n=n, h_star=h_star)


def tune_randomized(
    K: float, L: float, d: int, eps: float, w2_init: float, relax: float = 1.0
) -> TuningResult:
    """Refresh intensity, horizon and step size for duration-randomised uHMC.

    ``relax`` multiplies the step size; the result is capped so ``lam h <= 1``.
    """
    _check_constants(K, L)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not relax > 0:
        raise ValueError(f"relax must be positive, got {relax}")
    lam = 12.0 * L**0.5
    gamma = K / (10.0 * lam)
    kappa = L / K
    log_arg = 3.0 * max(L**0.5 / 12.0, 12.0 * L**-0.5) * w2_init / eps
    log_term = max(math.log(log_arg), 0.0) if log_arg > 0 else 0.0
    t_end = 240.0 * K**-0.5 * kappa**0.5 * log_term
    h_inv = 2.0 * max(
        (8.0 * 195.0) ** 0.25 * K**0.5 * (d / K) ** 0.25 * kappa * eps**-0.5,
        2.0 * 390.0 ** (1.0 / 3.0) * K**0.5 * (d / K) ** (1.0 / 3.0) * kappa ** (5.0 / 6.0) * eps ** (-2.0 / 3.0),
    )
    h = min(relax / h_inv, 1.0 / lam)
    return TuningResult(
        T=1.0 / lam, h=h, m=math.ceil(t_end / h), c=gamma, lam=lam, t_end=t_end, gamma=gamma
    )
