"""Homogeneous material-point driver.

A single point is driven through a cyclic program of imposed strain
(displacement control) or imposed stress (force control). Each increment
alternates between the plastic return map at frozen damage and the closed-form
damage update at frozen plastic fields until both settle, then updates the
fatigue variable once.

In full-tensor mode the point is loaded in uniaxial strain along ``xx``; the
1D reduction (``spec.uniaxial``) works on scalars.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from . import constitutive as C
from . import tensor as T
from .boxsolve import nonneg_qp_dense
from .errors import LoadCapacityError, SolverError
from .loading import LoadSchedule


# deviatoric stresses below this fraction of the first yield strength carry no
# ratcheting direction (force-controlled zero crossings land within round-off)
RATCHET_FLOOR = 1e-8


@dataclass
class PointConfig:
    stagger_tol: float = 1e-12
    max_stagger: int = 2000
    force_tol: float = 1e-10
    balance_tol: float = 1e-6


@dataclass
class ReturnMapInfo:
    dkappa: np.ndarray
    fhat: np.ndarray
    directions: np.ndarray
    ratchet_direction: np.ndarray


def _axial(spec: C.MaterialSpec, e: float) -> np.ndarray:
    out = np.zeros(spec.ncomp)
    out[0] = e
    return out


def _axial_stiffness(spec: C.MaterialSpec) -> float:
    return spec.young if spec.uniaxial else spec.K + 4.0 * spec.mu / 3.0


def local_plastic_system(eps_p_n, kappa_n, sig_tr, g, sigma_n, spec: C.MaterialSpec, floored=None):
    """Quadratic model of the incremental energy in the hardening increments.

    At every point the derivative of the incremental functional with respect
    to ``dkappa`` is ``A @ dkappa - b``, exactly, because plastic flow is
    deviatoric and the flow directions are frozen at their trial values.
    Broadcasts over leading axes; returns ``(A, b, n, n_g)`` with ``A`` of
    shape ``(..., ny, ny)``.

    ``floored`` marks surfaces whose radius has hit zero; they get no
    isotropic term.
    """
    c = spec.flow_factor
    Hk, Hi, sp_ = spec.H_kin, spec.H_iso, spec.sigma_p
    g = np.asarray(g, dtype=float)
    gs = g[..., None]
    rel = T.dev(sig_tr)[..., None, :] - (gs * Hk)[..., None] * eps_p_n
    n = C.flow_direction(rel)
    n_g = C.flow_direction(sigma_n, floor=RATCHET_FLOOR * float(sp_[0]))
    nn = T.ddot(n, n)
    m = c * (n + spec.beta * n_g[..., None, :])
    test = m if spec.ratchet_correction else c * n
    # sigma(dkappa) = sig_tr - g * G_eff * sum_t m_t dkappa_t  (flow is deviatoric)
    A = (g[..., None, None] * spec.shear_stiffness) * T.ddot(test[..., :, None, :], m[..., None, :, :])
    if floored is None:
        floored = np.zeros(np.shape(kappa_n), dtype=bool)
    h_iso = np.where(floored, 0.0, Hi)
    r_n = np.where(floored, 0.0, sp_ + Hi * kappa_n)
    diag = gs * (c * c * Hk * nn + h_iso)
    A = A + diag[..., None] * np.eye(spec.ny)
    lag = c * spec.beta * T.ddot(sigma_n, n_g) if spec.ratchet_correction else np.zeros(g.shape)
    b = T.ddot(test, sig_tr[..., None, :]) - c * gs * Hk * T.ddot(eps_p_n, n) - np.asarray(lag)[..., None] - gs * r_n
    return A, b, n, n_g


def return_map_step(state_n: C.PointState, eps, alpha: float, sigma_n, spec: C.MaterialSpec):
    """Plastic update at imposed strain ``eps`` and frozen damage ``alpha``.

    Solves the complementarity system for the hardening increments of all
    surfaces jointly, with the plastic flow along each surface's trial
    direction and ratcheting along the deviatoric stress of the previous
    accepted step. Returns ``(state, ReturnMapInfo)``.
    """
    c = spec.flow_factor
    g, _ = C.degradation(alpha)
    ny = spec.ny
    trial = state_n.copy()
    trial.eps = np.asarray(eps, dtype=float)
    trial.alpha = alpha
    sig_tr = C.stress(trial, spec)

    floored = np.zeros(ny, dtype=bool)
    for _ in range(ny + 2):
        A, b, n, n_g = local_plastic_system(state_n.eps_p, state_n.kappa, sig_tr, g, sigma_n, spec, floored)
        dk = np.zeros(ny) if g == 0.0 else nonneg_qp_dense(A, b)
        new_floor = spec.sigma_p + spec.H_iso * (state_n.kappa + dk) < 0.0
        if np.array_equal(new_floor | floored, floored):
            break
        floored |= new_floor
    fhat = -(A @ dk - b) / c

    out = trial
    out.eps_p = state_n.eps_p + c * n * dk[:, None]
    out.kappa = state_n.kappa + dk
    out.eps_r = state_n.eps_r + c * spec.beta * n_g * np.sum(dk)
    return out, ReturnMapInfo(dk, fhat, n, n_g)


def damage_update_point(state: C.PointState, spec: C.MaterialSpec, gamma_lag: float, alpha_n: float) -> float:
    """Minimize the incremental energy over ``alpha`` in ``[alpha_n, 1]``.

    With quadratic degradation the functional is a convex quadratic in
    ``alpha`` (driving energy clipped at zero), so the constrained minimizer is
    the clipped stationary point.
    """
    B = max(float(C.damage_driving_energy(state, spec)), 0.0)
    d = C.fatigue_degradation(gamma_lag, spec)
    dw = d * spec.w0
    if B == 0.0:
        return alpha_n
    if spec.damage_model == "AT2":
        a = B / (B + dw)
    else:
        a = 1.0 - dw / (2.0 * B)
    return min(max(a, alpha_n), 1.0)


def damage_yield_point(state: C.PointState, spec: C.MaterialSpec, gamma_lag: float) -> float:
    B = float(C.damage_driving_energy(state, spec))
    _, gp = C.degradation(state.alpha)
    _, wp = C.local_damage(state.alpha, spec)
    return -gp * B - C.fatigue_degradation(gamma_lag, spec) * wp


@dataclass
class StepResult:
    state: C.PointState
    sigma: np.ndarray
    iterations: int
    info: ReturnMapInfo


def stagger_point(state_n: C.PointState, eps, sigma_n, spec: C.MaterialSpec, cfg: PointConfig) -> StepResult:
    """Alternate plastic and damage updates at imposed strain until stationary."""
    alpha = float(state_n.alpha)
    kappa_prev = np.asarray(state_n.kappa, dtype=float)
    for it in range(1, cfg.max_stagger + 1):
        st, info = return_map_step(state_n, eps, alpha, sigma_n, spec)
        a_new = damage_update_point(st, spec, state_n.gamma, float(state_n.alpha))
        da = abs(a_new - alpha)
        dk = float(np.max(np.abs(st.kappa - kappa_prev), initial=0.0))
        alpha, kappa_prev = a_new, st.kappa
        if da <= cfg.stagger_tol and dk <= cfg.stagger_tol * max(1.0, float(np.max(st.kappa, initial=0.0))):
            st.alpha = alpha
            if da > 0.0:
                st, info = return_map_step(state_n, eps, alpha, sigma_n, spec)
            return StepResult(st, C.stress(st, spec), it, info)
    raise SolverError("staggered point iteration did not converge", residual=da)


def dissipation_increment(state: C.PointState, state_n: C.PointState, sigma_n, spec: C.MaterialSpec) -> float:
    """Incremental dissipation with the fatigue degradation lagged at gamma_n."""
    g, _ = C.degradation(state.alpha)
    g_n, _ = C.degradation(state_n.alpha)
    d_n = C.fatigue_degradation(state_n.gamma, spec)
    w, _ = C.local_damage(state.alpha, spec)
    w_n, _ = C.local_damage(state_n.alpha, spec)
    plastic = float(np.sum(spec.sigma_p * (g * state.kappa - g_n * state_n.kappa)))
    ratchet = float(T.ddot(sigma_n, state.eps_r - state_n.eps_r))
    return plastic + ratchet + d_n * (w - w_n)


@dataclass
class ControlMode:
    """Imposed stress (``force``) or strain (``displacement``) history."""

    mode: str
    vmin: float = -1.0
    vmax: float = 1.0
    first: str = "max"
    values: tuple[float, ...] | None = None

    def schedule(self, steps_per_cycle: int, n_cycles: int) -> LoadSchedule:
        return LoadSchedule(
            control=self.mode, vmin=self.vmin, vmax=self.vmax, cycles=n_cycles,
            steps_per_cycle=steps_per_cycle, first=self.first, values=self.values,
        )


@dataclass
class PointTrace:
    """Per-step history of a material-point run."""

    ny: int
    rows: list[list[float]] = field(default_factory=list)
    steps_per_cycle: int = 0

    @property
    def columns(self) -> list[str]:
        return (
            ["step", "control", "stress", "strain"]
            + [f"eps_p_{s + 1}" for s in range(self.ny)]
            + [f"kappa_{s + 1}" for s in range(self.ny)]
            + ["eps_r", "alpha", "gamma", "d_gamma", "D_e", "D_p", "R", "energy", "dissipation", "work"]
        )

    def __len__(self) -> int:
        return len(self.rows)

    def array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(len(self.rows), len(self.columns))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.array()[:, self.columns.index(name)]

    def kappa(self) -> np.ndarray:
        a = self.array()
        i = self.columns.index("kappa_1")
        return a[:, i:i + self.ny]

    def eps_p(self) -> np.ndarray:
        a = self.array()
        i = self.columns.index("eps_p_1")
        return a[:, i:i + self.ny]

    def balance_residuals(self) -> np.ndarray:
        """Per-step ``dE + dD - dW`` from the cumulative columns."""
        E, D, W = self["energy"], self["dissipation"], self["work"]
        return np.diff(E) + np.diff(D) - np.diff(W)

    def cycle_of_rows(self) -> np.ndarray:
        steps = self["step"].astype(int)
        return np.ceil(steps / self.steps_per_cycle).astype(int)

    def first_damage_cycle(self, threshold: float = 0.0) -> int | None:
        alpha = self["alpha"]
        idx = np.flatnonzero(alpha > threshold)
        if idx.size == 0:
            return None
        return int(self.cycle_of_rows()[idx[0]])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([f"{int(row[0])}"] + [f"{v:.9g}" for v in row[1:]])


def _row(step, control, st: C.PointState, sigma, spec, energy, diss, work):
    D_e, D_p, R = C.damage_forces(st, spec)
    d = C.fatigue_degradation(st.gamma, spec)
    return (
        [step, control, float(sigma[0]), float(st.eps[0])]
        + [float(v) for v in st.eps_p[:, 0]]
        + [float(v) for v in st.kappa]
        + [float(st.eps_r[0]), float(st.alpha), float(st.gamma), float(d), float(D_e), float(D_p), float(R),
           float(energy), float(diss), float(work)]
    )


class PointDriver:
    """Stateful driver; :func:`run_point` is the usual entry point."""

    def __init__(self, spec: C.MaterialSpec, config: PointConfig | None = None):
        self.spec = spec
        self.cfg = config or PointConfig()
        self.state = C.PointState.virgin(spec)
        self.sigma = np.zeros(spec.ncomp)
        self.energy = 0.0
        self.dissipation = 0.0
        self.work = 0.0
        self.iterations: list[int] = []
        self.kkt: list[dict] = []

    def _solve_at(self, e: float) -> StepResult:
        return stagger_point(self.state, _axial(self.spec, e), self.sigma, self.spec, self.cfg)

    def _solve_force(self, target: float, step: int) -> StepResult:
        tol = self.cfg.force_tol * max(1.0, abs(target))
        e_n = float(self.state.eps[0])
        cache: dict[float, StepResult] = {}

        def resid(e):
            if e not in cache:
                cache[e] = self._solve_at(e)
            return float(cache[e].sigma[0]) - target

        r0 = resid(e_n)
        if abs(r0) <= tol:
            return cache[e_n]
        direction = -math.copysign(1.0, r0)
        g, _ = C.degradation(float(self.state.alpha))
        h = abs(r0) / (max(g, 1e-12) * _axial_stiffness(self.spec))
        # walk away from e_n in doubling steps; phi < 0 until the target is passed
        sgn = -math.copysign(1.0, r0)
        before, lo, r_lo = e_n, e_n, r0
        for _ in range(80):
            hi = e_n + direction * h
            r_hi = resid(hi)
            if math.copysign(1.0, r_hi) != math.copysign(1.0, r_lo) or r_hi == 0.0:
                break
            if sgn * r_hi < sgn * r_lo:
                # the response peaked (softening) somewhere in [before, hi]
                peak = sopt.minimize_scalar(lambda e: -sgn * resid(e), bounds=tuple(sorted((before, hi))),
                                            method="bounded", options={"xatol": 1e-14 * max(1.0, abs(hi))})
                if sgn * resid(peak.x) < 0.0:
                    raise LoadCapacityError(
                        f"stress target {target:g} exceeds the peak {float(cache[peak.x].sigma[0]):.6g}", step=step)
                lo, r_lo = before, resid(before)
                hi, r_hi = peak.x, resid(peak.x)
                break
            before, lo, r_lo = lo, hi, r_hi
            h *= 2.0
        else:
            raise LoadCapacityError(f"stress target {target:g} cannot be sustained", step=step)
        if r_hi == 0.0:
            return cache[hi]
        root = sopt.brentq(resid, min(lo, hi), max(lo, hi), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        if abs(resid(root)) > tol:
            # brentq stops at the floating-point bracket; pick the closer end
            best = min(cache, key=lambda e: abs(float(cache[e].sigma[0]) - target))
            if abs(float(cache[best].sigma[0]) - target) > tol:
                raise LoadCapacityError(
                    f"stress target {target:g} missed by {abs(resid(root)):.3e}", step=step)
            root = best
        return cache[root]

    def advance(self, control: float, mode: str, step: int) -> StepResult:
        spec = self.spec
        self._gamma_lag = float(self.state.gamma)
        self._alpha_n = float(self.state.alpha)
        res = self._solve_force(control, step) if mode == "force" else self._solve_at(control)
        st = res.state
        st.gamma, st.theta_prev = C.update_fatigue(st, spec)
        diss = dissipation_increment(st, self.state, self.sigma, spec)
        energy = float(C.free_energy(st, spec))
        dwork = float(T.ddot(0.5 * (self.sigma + res.sigma), st.eps - self.state.eps))
        self.kkt.append(self._kkt(res, st))
        self.state = st
        self.sigma = res.sigma
        self.energy = energy
        self.dissipation += diss
        self.work += dwork
        self.iterations.append(res.iterations)
        return res

    def _kkt(self, res: StepResult, st: C.PointState) -> dict:
        dk = res.info.dkappa
        f = res.info.fhat
        fd = damage_yield_point(st, self.spec, self._gamma_lag)
        da = float(st.alpha) - self._alpha_n
        rel = f / self.spec.sigma_p
        # yield may not be exceeded, and active surfaces must sit on it
        plastic = np.where(dk > 0.0, np.abs(rel), np.maximum(rel, 0.0))
        alpha = float(st.alpha)
        if alpha >= 1.0:
            damage = max(-fd, 0.0)
        elif da > 0.0:
            damage = abs(fd)
        else:
            damage = max(fd, 0.0)
        return {
            "plastic": float(np.max(plastic)),
            "damage_kkt": damage,
            "plastic_max": float(np.max(rel)),
            "plastic_compl": float(np.max(np.abs(f * dk))),
            "dkappa_min": float(np.min(dk)),
            "damage": fd,
            "damage_compl": abs(fd * da),
            "dalpha": da,
        }

    def run(self, schedule: LoadSchedule) -> PointTrace:
        trace = PointTrace(self.spec.ny, steps_per_cycle=schedule.steps_per_cycle)
        trace.rows.append(_row(0, 0.0, self.state, self.sigma, self.spec, self.energy, 0.0, 0.0))
        for i in range(1, schedule.n_steps + 1):
            v = schedule.sample(i)
            try:
                self.advance(v, schedule.control, i)
            except LoadCapacityError as exc:
                exc.trace = trace
                exc.step = i
                raise
            trace.rows.append(
                _row(i, v, self.state, self.sigma, self.spec, self.energy, self.dissipation, self.work))
        return trace


def run_point(control: ControlMode, spec: C.MaterialSpec, steps_per_cycle: int = 80, n_cycles: int = 1,
              config: PointConfig | None = None) -> PointTrace:
    driver = PointDriver(spec, config)
    return driver.run(control.schedule(steps_per_cycle, n_cycles))
