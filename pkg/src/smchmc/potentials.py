"""Target potentials U with gradients and curvature constants.

Every function accepts positions with shape ``(..., d)`` so a whole batch of
trials can be pushed through one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

ISOTROPIC = "isotropic_gaussian"
ANISOTROPIC = "anisotropic_gaussian"
DOUBLE_WELL = "double_well"
ROUGH_WELL = "rough_well"

KINDS = (ISOTROPIC, ANISOTROPIC, DOUBLE_WELL, ROUGH_WELL)
GAUSSIAN_KINDS = (ISOTROPIC, ANISOTROPIC)
CONVEX_KINDS = (ISOTROPIC, ANISOTROPIC, ROUGH_WELL)

_ALIASES = {
    "iso": ISOTROPIC,
    "isotropic": ISOTROPIC,
    "gauss": ISOTROPIC,
    "harmonic": ISOTROPIC,
    "aniso": ANISOTROPIC,
    "anisotropic": ANISOTROPIC,
    "dw": DOUBLE_WELL,
    "double": DOUBLE_WELL,
    "doublewell": DOUBLE_WELL,
    "rough": ROUGH_WELL,
    "roughwell": ROUGH_WELL,
}

DEFAULT_BOX = 4.0


class DomainError(ValueError):
    """Operation is not defined for this kind of potential."""


@dataclass(frozen=True)
class PotentialModel:
    """Immutable description of a target potential.

    ``params`` holds the per-kind parameters: the curvature ``(k,)`` for the
    isotropic Gaussian, the spectrum ``(k_1, ..., k_d)`` for the anisotropic
    one, nothing for the double well and the roughness ``(a,)`` for the rough
    well.  For the two non-Gaussian kinds ``L`` (and ``K`` for the rough
    well) are bounds valid on ``|x| <= box`` only.
    """

    kind: str
    dim: int
    params: tuple
    K: Optional[float]
    L: float
    box: Optional[float] = None

    @property
    def is_gaussian(self) -> bool:
        return self.kind in GAUSSIAN_KINDS

    @property
    def is_convex(self) -> bool:
        return self.kind in CONVEX_KINDS

    @property
    def curvatures(self) -> np.ndarray:
        """Diagonal of the (constant) Hessian; Gaussian kinds only."""
        if self.kind == ISOTROPIC:
            return np.full(self.dim, self.params[0])
        if self.kind == ANISOTROPIC:
            return np.asarray(self.params, dtype=float)
        raise DomainError(f"{self.kind} has no constant curvature spectrum")

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x

    def energy(self, x) -> np.ndarray:
        x = self._check(x)
        if self.is_gaussian:
            return 0.5 * np.sum(self.curvatures * x * x, axis=-1)
        s = x[..., 0]
        if self.kind == DOUBLE_WELL:
            return 0.5 * (1.0 - s * s) ** 2
        a = self.params[0]
        return 0.5 * s * s + a * np.abs(s) ** 2.5

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        if self.is_gaussian:
            return self.curvatures * x
        if self.kind == DOUBLE_WELL:
            return 2.0 * x**3 - 2.0 * x
        a = self.params[0]
        return x + 2.5 * a * np.sign(x) * np.abs(x) ** 1.5

    def force(self, x) -> np.ndarray:
        return -self.gradient(x)


def isotropic_gaussian(k: float = 1.0, dim: int = 1) -> PotentialModel:
    if not k > 0:
        raise ValueError(f"curvature must be positive, got {k}")
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return PotentialModel(ISOTROPIC, int(dim), (float(k),), float(k), float(k))


def anisotropic_gaussian(curvatures) -> PotentialModel:
    ks = tuple(float(k) for k in np.atleast_1d(curvatures))
    if not ks or min(ks) <= 0:
        raise ValueError(f"curvatures must be positive, got {ks}")
    return PotentialModel(ANISOTROPIC, len(ks), ks, min(ks), max(ks))


def double_well(box: float = DEFAULT_BOX) -> PotentialModel:
    # U'' = 6x^2 - 2, so |U''| <= 6 box^2 - 2 on the box; not convex, K undefined.
    return PotentialModel(DOUBLE_WELL, 1, (), None, 6.0 * box * box - 2.0, box)


def rough_well(a: float = 1.0, box: float = DEFAULT_BOX) -> PotentialModel:
    # U'' = 1 + (15 a / 4) |x|^(1/2): unbounded third derivative at 0.
    if a < 0:
        raise ValueError(f"roughness must be >= 0, got {a}")
    return PotentialModel(ROUGH_WELL, 1, (float(a),), 1.0, 1.0 + 3.75 * a * np.sqrt(box), box)


def parse_model(spec: str) -> PotentialModel:
    """Build a model from ``kind:param,param,...``.

    ``iso:k[,d]``, ``aniso:k1,k2,...``, ``dw`` and ``rough:a`` are accepted,
    as are the full kind names.
    """
    name, _, rest = spec.strip().partition(":")
    kind = _ALIASES.get(name.lower().replace("-", "").replace("_", ""), name.lower())
    try:
        values = [float(p) for p in rest.split(",") if p.strip()]
    except ValueError as exc:
        raise ValueError(f"bad model parameters in {spec!r}") from exc
    if kind == ISOTROPIC:
        k = values[0] if values else 1.0
        dim = values[1] if len(values) > 1 else 1
        if dim != int(dim):
            raise ValueError(f"dimension must be an integer in {spec!r}")
        return isotropic_gaussian(k, int(dim))
    if kind == ANISOTROPIC:
        if not values:
            raise ValueError(f"anisotropic model needs a curvature list: {spec!r}")
        return anisotropic_gaussian(values)
    if kind == DOUBLE_WELL:
        if values:
            raise ValueError("double_well takes no parameters")
        return double_well()
    if kind == ROUGH_WELL:
        return rough_well(values[0] if values else 1.0)
    raise ValueError(f"unknown model kind {name!r}; expected one of {', '.join(KINDS)}")


def evaluate_potential(model: PotentialModel, x):
    return model.energy(x)


def evaluate_gradient(model: PotentialModel, x):
    return model.gradient(x)


def finite_difference_gradient(model: PotentialModel, x, step: float = 1e-5) -> np.ndarray:
    """Central differences of the energy along each coordinate axis."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x = model._check(x)
    out = np.empty_like(x)
    for i in range(model.dim):
        e = np.zeros(model.dim)
        e[i] = step
        out[..., i] = (model.energy(x + e) - model.energy(x - e)) / (2.0 * step)
    return out


def cocoercivity_residual(model: PotentialModel, x, y) -> np.ndarray:
    """``L <g(x)-g(y), x-y> - |g(x)-g(y)|^2``; nonnegative for convex L-smooth U."""
    if not model.is_convex:
        raise DomainError(f"co-coercivity needs a convex potential, got {model.kind}")
    x = model._check(x)
    y = model._check(y)
    dg = model.gradient(x) - model.gradient(y)
    return model.L * np.sum(dg * (x - y), axis=-1) - np.sum(dg * dg, axis=-1)
