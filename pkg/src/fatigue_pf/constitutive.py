"""Point-wise elastoplastic-damage model with ratcheting and fatigue.

Free energy
    psi = g(alpha) * (psi_e+ + psi_p) + psi_e-
with the volumetric/deviatoric split of the elastic energy, a quadratic
degradation ``g = (1 - alpha)**2`` and ``n_y`` nested yield surfaces, each
carrying its own plastic strain ``eps_p[s]`` and hardening variable
``kappa[s]``. A single deviatoric ratcheting strain ``eps_r`` flows along the
deviatoric stress. Fatigue degrades the crack resistance through ``d(gamma)``.

Every function broadcasts over leading axes so the same code serves the
material-point driver and batches of finite-element quadrature points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T

SQRT_2_3 = math.sqrt(2.0 / 3.0)
SQRT_3_2 = math.sqrt(1.5)


@dataclass(frozen=True)
class SurfaceParams:
    sigma_p: float
    H_kin: float = 0.0
    H_iso: float = 0.0

    def __post_init__(self):
        if not self.sigma_p > 0:
            raise ValueError(f"sigma_p must be positive, got {self.sigma_p}")
        if self.H_kin < 0:
            raise ValueError(f"H_kin must be non-negative, got {self.H_kin}")


def linear_ramp(first: float, last: float, n: int) -> list[float]:
    """``n`` values from ``first`` to ``last`` in equal steps, endpoints exact."""
    if n < 1:
        raise ValueError("need at least one value")
    if n == 1:
        return [float(first)]
    vals = [first + i * (last - first) / (n - 1) for i in range(n)]
    vals[0], vals[-1] = float(first), float(last)
    return vals


def linear_surfaces(n: int, sigma_p, H_kin=(0.0, 0.0), H_iso=(0.0, 0.0)) -> tuple[SurfaceParams, ...]:
    """Surfaces whose parameters vary linearly from surface 1 to surface n.

    Each argument is a ``(first, last)`` pair or a single value; with
    ``n == 1`` only the first value is used.
    """
    if n < 1:
        raise ValueError("need at least one yield surface")

    def ramp(pair):
        first, last = (pair, pair) if np.isscalar(pair) else pair
        return linear_ramp(first, last, n)

    sp, hk, hi = ramp(sigma_p), ramp(H_kin), ramp(H_iso)
    return tuple(SurfaceParams(a, b, c) for a, b, c in zip(sp, hk, hi))


@dataclass(frozen=True)
class MaterialSpec:
    """Constitutive parameters.

    ``uniaxial=True`` selects the 1D reduction: scalar tensors, no energy
    split and no sqrt(2/3) factor in the hardening law. ``K`` and ``mu`` are
    then only used through the Young's modulus (see :meth:`from_young`).
    """

    K: float
    mu: float
    surfaces: tuple[SurfaceParams, ...]
    w0: float
    damage_model: str = "AT1"
    beta: float = 0.0
    eta_p: float = 0.0
    eta_d: float = 0.0
    gamma0: float = math.inf
    k: float = 1.0
    split: str = "voldev"
    uniaxial: bool = False
    ratchet_correction: bool = True

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if not (self.K > 0 and self.mu > 0):
            raise ValueError("K and mu must be positive")
        if len(self.surfaces) < 1:
            raise ValueError("need at least one yield surface")
        sp = [s.sigma_p for s in self.surfaces]
        if any(b < a for a, b in zip(sp, sp[1:])):
            raise ValueError("yield surfaces must be ordered by increasing sigma_p")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.damage_model not in ("AT1", "AT2"):
            raise ValueError(f"damage_model must be AT1 or AT2, got {self.damage_model!r}")
        if self.split not in ("voldev", "none"):
            raise ValueError(f"split must be 'voldev' or 'none', got {self.split!r}")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive or inf")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.w0 < 0 or self.eta_p < 0 or self.eta_d < 0:
            raise ValueError("w0, eta_p and eta_d must be non-negative")
        if self.uniaxial and self.split != "none":
            object.__setattr__(self, "split", "none")

    @classmethod
    def from_young(cls, E: float, nu: float = 0.0, **kw) -> "MaterialSpec":
        K = E / (3.0 * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        return cls(K=K, mu=mu, **kw)

    def with_(self, **kw) -> "MaterialSpec":
        return replace(self, **kw)

    @property
    def ny(self) -> int:
        return len(self.surfaces)

    @property
    def young(self) -> float:
        return 9.0 * self.K * self.mu / (3.0 * self.K + self.mu)

    @property
    def ncomp(self) -> int:
        return 1 if self.uniaxial else 6

    @property
    def flow_factor(self) -> float:
        """Ratio between plastic-strain norm increments and kappa increments."""
        return 1.0 if self.uniaxial else SQRT_3_2

    @property
    def shear_stiffness(self) -> float:
        """Undamaged modulus relating deviatoric elastic strain to stress."""
        return self.young if self.uniaxial else 2.0 * self.mu

    @property
    def sigma_p(self) -> np.ndarray:
        return np.array([s.sigma_p for s in self.surfaces])

    @property
    def H_kin(self) -> np.ndarray:
        return np.array([s.H_kin for s in self.surfaces])

    @property
    def H_iso(self) -> np.ndarray:
        return np.array([s.H_iso for s in self.surfaces])


@dataclass
class PointState:
    """Constitutive state at one material point (or a batch of them).

    ``grad_energy[s]`` holds ``0.5 * eta_p**2 * |grad kappa_s|**2``; it is
    supplied by the finite-element layer and stays zero at a lone point.
    """

    eps: np.ndarray
    eps_p: np.ndarray
    kappa: np.ndarray
    eps_r: np.ndarray
    alpha: np.ndarray | float = 0.0
    gamma: np.ndarray | float = 0.0
    theta_prev: np.ndarray | float = 0.0
    grad_energy: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.grad_energy is None:
            self.grad_energy = np.zeros_like(np.asarray(self.kappa, dtype=float))

    @classmethod
    def virgin(cls, spec: MaterialSpec, *lead: int) -> "PointState":
        nc, ny = spec.ncomp, spec.ny
        z = np.zeros(lead) if lead else 0.0
        return cls(
            eps=np.zeros((*lead, nc)),
            eps_p=np.zeros((*lead, ny, nc)),
            kappa=np.zeros((*lead, ny)),
            eps_r=np.zeros((*lead, nc)),
            alpha=np.copy(z) if lead else 0.0,
            gamma=np.copy(z) if lead else 0.0,
            theta_prev=np.copy(z) if lead else 0.0,
        )

    def copy(self) -> "PointState":
        cp = lambda v: np.copy(v) if isinstance(v, np.ndarray) else v  # noqa: E731
        return PointState(
            eps=cp(self.eps), eps_p=cp(self.eps_p), kappa=cp(self.kappa), eps_r=cp(self.eps_r),
            alpha=cp(self.alpha), gamma=cp(self.gamma), theta_prev=cp(self.theta_prev),
            grad_energy=cp(self.grad_energy),
        )


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0.0) or np.any(a > 1.0) or np.any(np.isnan(a)):
        raise ValueError("damage must lie in [0, 1]")
    return a


def degradation(alpha):
    """Quadratic degradation ``g = (1 - alpha)^2`` and its derivative."""
    a = _check_alpha(alpha)
    g, gp = (1.0 - a) ** 2, -2.0 * (1.0 - a)
    if g.ndim == 0:
        return float(g), float(gp)
    return g, gp


def local_damage(alpha, spec: MaterialSpec):
    """Local dissipation ``w(alpha)`` and ``w'(alpha)`` for AT-1 or AT-2."""
    a = _check_alpha(alpha)
    if spec.damage_model == "AT1":
        w, wp = spec.w0 * a, spec.w0 * np.ones_like(a)
    else:
        w, wp = spec.w0 * a**2, 2.0 * spec.w0 * a
    if w.ndim == 0:
        return float(w), float(wp)
    return w, wp


def fatigue_degradation(gamma, spec: MaterialSpec):
    """Fatigue degradation of the crack resistance (base-10 logarithm)."""
    gam = np.asarray(gamma, dtype=float)
    if np.any(gam < 0):
        raise ValueError("fatigue variable must be non-negative")
    if math.isinf(spec.gamma0):
        d = np.ones_like(gam)
    else:
        ratio = np.maximum(gam / spec.gamma0, 1.0)
        bracket = np.clip(1.0 - spec.k * np.log10(ratio), 0.0, 1.0)
        d = bracket**2
    return float(d) if d.ndim == 0 else d


def elastic_strain(state: PointState) -> np.ndarray:
    return np.asarray(state.eps) - np.sum(state.eps_p, axis=-2) - np.asarray(state.eps_r)


def elastic_energy_split(eps_e, spec: MaterialSpec):
    """Return ``(psi_e+, psi_e-)`` for an elastic strain."""
    eps_e = np.asarray(eps_e, dtype=float)
    if spec.uniaxial:
        psi = 0.5 * spec.young * eps_e[..., 0] ** 2
        return psi, np.zeros_like(psi)
    tr = T.trace(eps_e)
    e_dev = T.dev(eps_e)
    dev_part = spec.mu * T.ddot(e_dev, e_dev)
    if spec.split == "none":
        return 0.5 * spec.K * tr**2 + dev_part, np.zeros_like(tr)
    tp, tm = np.maximum(tr, 0.0), np.minimum(tr, 0.0)
    return 0.5 * spec.K * tp**2 + dev_part, 0.5 * spec.K * tm**2


def stress_from_elastic(eps_e, alpha, spec: MaterialSpec) -> np.ndarray:
    """``g(alpha) d(psi_e+)/d eps + d(psi_e-)/d eps``."""
    eps_e = np.asarray(eps_e, dtype=float)
    g, _ = degradation(alpha)
    g = np.asarray(g)[..., None]
    if spec.uniaxial:
        return g * spec.young * eps_e
    tr = T.trace(eps_e)[..., None]
    I = T.identity()
    dev_stress = 2.0 * spec.mu * T.dev(eps_e)
    if spec.split == "none":
        return g * (spec.K * tr * I + dev_stress)
    return g * (spec.K * np.maximum(tr, 0.0) * I + dev_stress) + spec.K * np.minimum(tr, 0.0) * I


def plastic_energy(state: PointState, spec: MaterialSpec):
    """Hardening energy plus the supplied gradient energy, summed over surfaces."""
    eps_p = np.asarray(state.eps_p, dtype=float)
    kappa = np.asarray(state.kappa, dtype=float)
    kin = T.ddot(eps_p, eps_p) * spec.H_kin
    iso = spec.H_iso * kappa**2
    return 0.5 * np.sum(kin + iso, axis=-1) + np.sum(state.grad_energy, axis=-1)


def coupling_energy(state: PointState, spec: MaterialSpec):
    """``sum_s sigma_p[s] * kappa[s]``, the plastic work stored in the dissipation state."""
    return np.sum(spec.sigma_p * np.asarray(state.kappa), axis=-1)


def free_energy(state: PointState, spec: MaterialSpec):
    pp, pm = elastic_energy_split(elastic_strain(state), spec)
    g, _ = degradation(state.alpha)
    return g * (pp + plastic_energy(state, spec)) + pm


def stress(state: PointState, spec: MaterialSpec) -> np.ndarray:
    return stress_from_elastic(elastic_strain(state), state.alpha, spec)


def yield_radius(kappa, spec: MaterialSpec):
    """``sigma_p + H_iso kappa`` floored at zero (softening cannot invert a surface)."""
    return np.maximum(spec.sigma_p + spec.H_iso * np.asarray(kappa, dtype=float), 0.0)


def plastic_yield(state: PointState, s: int, spec: MaterialSpec, laplacian_term=0.0):
    """Plastic yield function of surface ``s``.

    ``laplacian_term`` is ``-eta_p**2 * div(grad kappa_s)``; zero at a point.
    """
    sig = stress(state, spec)
    g, _ = degradation(state.alpha)
    rel = T.dev(sig) - g * spec.H_kin[s] * np.asarray(state.eps_p)[..., s, :]
    radius = yield_radius(state.kappa, spec)[..., s]
    scale = 1.0 if spec.uniaxial else SQRT_2_3
    return T.norm(rel) - g * scale * (radius + laplacian_term)


def damage_driving_energy(state: PointState, spec: MaterialSpec):
    """``psi_e+ + psi_p + sum_s sigma_p kappa_s``; ``-g'(alpha)`` times this is D_e + D_p."""
    pp, _ = elastic_energy_split(elastic_strain(state), spec)
    return pp + plastic_energy(state, spec) + coupling_energy(state, spec)


def damage_forces(state: PointState, spec: MaterialSpec):
    """Elastic and plastic damage driving forces and the local resisting force."""
    pp, _ = elastic_energy_split(elastic_strain(state), spec)
    _, gp = degradation(state.alpha)
    _, wp = local_damage(state.alpha, spec)
    D_e = -gp * pp
    D_p = -gp * (plastic_energy(state, spec) + coupling_energy(state, spec))
    R = fatigue_degradation(state.gamma, spec) * wp
    return D_e, D_p, R


def fatigue_driver(state: PointState, spec: MaterialSpec):
    """``theta = g(alpha) (psi_e+ + psi_p)``, the quantity whose increase feeds gamma."""
    pp, _ = elastic_energy_split(elastic_strain(state), spec)
    g, _ = degradation(state.alpha)
    return g * (pp + plastic_energy(state, spec))


def update_fatigue(state: PointState, spec: MaterialSpec):
    """Return ``(gamma_new, theta)``; only increases of theta accumulate."""
    theta = fatigue_driver(state, spec)
    gamma = np.asarray(state.gamma) + np.maximum(theta - np.asarray(state.theta_prev), 0.0)
    if np.ndim(gamma) == 0:
        return float(gamma), float(theta)
    return gamma, theta


def flow_direction(relative_stress, floor: float = 0.0) -> np.ndarray:
    """Unit deviatoric direction; zero where the stress vanishes."""
    return T.unit(T.dev(relative_stress), floor)
