"""Alternate minimization over the finite-element fields.

Each load step repeats displacement, plastic and damage solves until the three
fields stop changing, then advances the fatigue variable once and books the
energy terms. The plastic and damage subproblems are bound-constrained
quadratic programs solved by a primal-dual active-set method.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constitutive as C
from . import tensor as T
from .boxsolve import active_set, kkt_residual
from .errors import EnergyBalanceError, LoadCapacityError, SolverError
from .fem import (
    FieldSolution, Geometry, Loads, Mesh, apply_plastic_increment, assemble_damage,
    assemble_plastic, equilibrium_residual, external_force, internal_force, point_state, stiffness,
)
from .loading import LoadSchedule

TRACE_COLUMNS = (
    "step", "time", "load_factor", "reaction_y", "control_disp", "E", "D_cum", "W_ext",
    "balance_residual", "alpha_max", "kappa_eq_max", "gamma_max",
)


@dataclass
class SolverConfig:
    stagger_tol: float = 1e-5
    max_stagger: int = 300
    newton_tol: float = 1e-8
    max_newton: int = 100
    active_set_tol: float = 1e-8
    max_active_set: int = 500
    linear_solver: str = "direct"
    max_surface_sweeps: int = 200
    surface_tol: float = 1e-10
    balance_tol: float = 1e-5
    strict_balance: bool = False
    acceleration: str = "none"
    anderson_depth: int = 5
    plastic_coupling: str = "joint"

    def __post_init__(self):
        for name in ("stagger_tol", "newton_tol", "active_set_tol", "surface_tol", "balance_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_stagger", "max_newton", "max_active_set", "max_surface_sweeps", "anderson_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.acceleration not in ("none", "anderson"):
            raise ValueError(f"acceleration must be 'none' or 'anderson', got {self.acceleration!r}")
        if self.plastic_coupling not in ("joint", "gauss-seidel"):
            raise ValueError(f"plastic_coupling must be 'joint' or 'gauss-seidel', got {self.plastic_coupling!r}")
        if self.linear_solver not in ("direct", "cg"):
            raise ValueError(f"linear_solver must be 'direct' or 'cg', got {self.linear_solver!r}")


@dataclass
class EnergyLedger:
    """Energy bookkeeping of one accepted step."""

    E: float
    D_cum: float
    W_ext: float
    dE: float
    dD: float
    dW: float
    balance_residual: float


def linear_solve(K, rhs, cfg: SolverConfig, what: str = "linear system"):
    if K.shape[0] == 0:
        return np.zeros(0)
    if cfg.linear_solver == "cg":
        diag = K.diagonal()
        if np.any(diag <= 0):
            raise SolverError(f"{what}: non-positive diagonal, not SPD")
        M = sp.diags(1.0 / diag)
        x, info = spla.cg(K, rhs, rtol=1e-12, atol=0.0, maxiter=20 * K.shape[0], M=M)
        if info != 0:
            raise SolverError(f"{what}: CG did not converge")
        return x
    try:
        x = spla.splu(sp.csc_matrix(K)).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"{what}: singular matrix") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError(f"{what}: singular matrix")
    return x


def free_dofs(mesh: Mesh, loads: Loads) -> np.ndarray:
    mask = np.ones(2 * mesh.n_nodes, dtype=bool)
    mask[loads.dirichlet_dofs] = False
    return np.flatnonzero(mask)


class _Factorization:
    """Last factorized equilibrium tangent, reused while the moduli and the
    free dofs are unchanged (no damage growth, no branch switch)."""

    def __init__(self):
        self.D = None
        self.free = None
        self.solve = None

    def get(self, D, free, build, cfg):
        if self.solve is not None and np.array_equal(free, self.free) and np.array_equal(D, self.D):
            return self.solve
        K_ff = build()
        if cfg.linear_solver == "cg":
            self.solve = lambda r: linear_solve(K_ff, r, cfg, "equilibrium tangent")
        else:
            try:
                lu = spla.splu(sp.csc_matrix(K_ff))
            except RuntimeError:
                # fully broken regions carry no stiffness in tension; a tiny
                # shift keeps the Newton direction a descent direction
                shift = 1e-12 * max(float(np.max(np.abs(K_ff.diagonal()), initial=0.0)), 1e-300)
                try:
                    lu = spla.splu(sp.csc_matrix(K_ff + shift * sp.identity(K_ff.shape[0])))
                except RuntimeError as exc:
                    raise SolverError("equilibrium tangent is singular") from exc
            self.solve = lu.solve
        self.D, self.free = D.copy(), free.copy()
        return self.solve


def _factor_cache(geom: Geometry) -> _Factorization:
    if not hasattr(geom, "_factor_cache"):
        geom._factor_cache = _Factorization()
    return geom._factor_cache


def solve_displacement(fields: FieldSolution, mesh: Mesh, geom: Geometry, spec: C.MaterialSpec,
                       loads: Loads, cfg: SolverConfig) -> int:
    """Newton iteration on equilibrium; returns the number of linear solves.

    The only nonlinearity is the tension/compression switch of the energy
    split, so the iteration ends after one solve when no point changes branch.
    The potential is convex in ``u``; when a full step does not reduce the
    residual (branch switches in nearly broken material) the step is cut back
    until the potential decreases.
    """
    fields.u[loads.dirichlet_dofs] = loads.dirichlet_values
    free = free_dofs(mesh, loads)
    f_ext = external_force(mesh, geom, loads)
    cache = _factor_cache(geom)

    def potential():
        return stored_energy(fields, geom, spec) - float(f_ext @ fields.u)

    res, D = equilibrium_residual(mesh, geom, fields, spec, loads)
    for it in range(cfg.max_newton + 1):
        r = res[free]
        scale = max(float(np.linalg.norm(res + f_ext)), float(np.linalg.norm(f_ext)))
        rn = float(np.linalg.norm(r))
        if rn == 0.0 or rn <= cfg.newton_tol * scale:
            return it
        if it == cfg.max_newton:
            break
        solve = cache.get(D, free, lambda: stiffness(geom, D)[free][:, free], cfg)
        du = solve(-r)
        if not np.all(np.isfinite(du)):
            raise SolverError("equilibrium tangent is singular")
        u0 = fields.u[free].copy()
        fields.u[free] = u0 + du
        res, D = equilibrium_residual(mesh, geom, fields, spec, loads)
        if np.linalg.norm(res[free]) >= rn:
            fields.u[free] = u0
            p0, slope, t = potential(), float(r @ du), 1.0
            while t > 1e-12:
                fields.u[free] = u0 + t * du
                if potential() <= p0 + 1e-4 * t * slope:
                    break
                t *= 0.5
            res, D = equilibrium_residual(mesh, geom, fields, spec, loads)
    raise SolverError("equilibrium Newton iteration did not converge", residual=rn / max(scale, 1e-300))


@dataclass
class SubproblemInfo:
    iterations: int
    kkt: float


def solve_plastic(fields: FieldSolution, fields_n: FieldSolution, mesh: Mesh, geom: Geometry,
                  spec: C.MaterialSpec, cfg: SolverConfig) -> SubproblemInfo:
    """Hardening increments ``dk >= 0`` at the current displacement and damage.

    By default all surfaces are solved together by one active-set solve of
    the coupled block system; ``plastic_coupling = "gauss-seidel"`` sweeps
    the surfaces one at a time instead. The quadrature-point plastic and
    ratcheting strains then follow from the flow rule.
    """
    system = assemble_plastic(mesh, geom, fields, fields_n, spec)
    n, ny = mesh.n_nodes, spec.ny
    dk = np.maximum(fields.kappa - fields_n.kappa, 0.0).reshape(ny, n)
    sweeps = 0
    if cfg.plastic_coupling == "joint" or ny == 1:
        x, sweeps = active_set(system.K, system.F, 0.0, np.inf, x0=dk.ravel(), max_iter=cfg.max_active_set,
                               what="plastic surfaces")
        dk = x.reshape(ny, n)
    else:
        for sweeps in range(1, cfg.max_surface_sweeps + 1):
            change = 0.0
            for s in range(ny):
                rhs = system.F[s * n:(s + 1) * n].copy()
                for t in range(ny):
                    if t != s:
                        rhs -= system.block(s, t) @ dk[t]
                x, _ = active_set(system.block(s, s), rhs, 0.0, np.inf, x0=dk[s], max_iter=cfg.max_active_set,
                                  what=f"plastic surface {s + 1}")
                change = max(change, float(np.max(np.abs(x - dk[s]), initial=0.0)))
                dk[s] = x
            if change <= cfg.surface_tol:
                break
        else:
            raise SolverError(f"surface sweeps did not settle after {cfg.max_surface_sweeps} sweeps", residual=change)
    apply_plastic_increment(fields, fields_n, geom, system, dk, spec)
    kkt = kkt_residual(system.K, system.F, dk.ravel(), 0.0, np.inf)
    return SubproblemInfo(sweeps, kkt / (float(spec.sigma_p[0]) * float(np.max(geom.nodal_weight))))


def solve_damage(fields: FieldSolution, fields_n: FieldSolution, mesh: Mesh, geom: Geometry,
                 spec: C.MaterialSpec, cfg: SolverConfig) -> SubproblemInfo:
    """Nodal damage in ``[alpha_n, 1]`` at frozen displacement and plastic fields."""
    res, K, (lo, hi) = assemble_damage(mesh, geom, fields, fields_n, spec)
    F = K @ fields.alpha - res
    # a tiny proximal term keeps rows with zero curvature (no driving energy,
    # no resistance) solvable; it does not move any other solution
    reg = 1e-13 * max(float(np.max(np.abs(K.diagonal()), initial=0.0)), 1e-300)
    Kr = K + reg * sp.identity(K.shape[0], format="csr")
    Fr = F + reg * fields.alpha
    x, it = active_set(Kr, Fr, lo, hi, x0=np.clip(fields.alpha, lo, hi), max_iter=cfg.max_active_set,
                       what="damage")
    fields.alpha = np.clip(x, lo, hi)
    kkt = kkt_residual(K, F, fields.alpha, lo, hi)
    scale = max(spec.w0, 1e-300) * float(np.max(geom.nodal_weight))
    return SubproblemInfo(it, kkt / scale)


def stored_energy(fields: FieldSolution, geom: Geometry, spec: C.MaterialSpec) -> float:
    return geom.integrate(C.free_energy(point_state(fields, geom, spec), spec))


def dissipation_density(fields: FieldSolution, fields_n: FieldSolution, geom: Geometry, spec: C.MaterialSpec):
    """Incremental dissipation at every quadrature point, ``(E, 4)``."""
    st = point_state(fields, geom, spec)
    st_n = point_state(fields_n, geom, spec)
    g, _ = C.degradation(st.alpha)
    g_n, _ = C.degradation(st_n.alpha)
    d_n = C.fatigue_degradation(fields_n.gamma, spec)
    w, _ = C.local_damage(st.alpha, spec)
    w_n, _ = C.local_damage(st_n.alpha, spec)
    grad = np.sum(geom.grad_qp(fields.alpha) ** 2, axis=-1)
    grad_n = np.sum(geom.grad_qp(fields_n.alpha) ** 2, axis=-1)
    plastic = np.sum(spec.sigma_p * (g[..., None] * st.kappa - g_n[..., None] * st_n.kappa), axis=-1)
    ratchet = T.ddot(fields_n.stress, fields.eps_r - fields_n.eps_r)
    damage = d_n * (w - w_n + 0.5 * spec.eta_d**2 * (grad - grad_n))
    return plastic + ratchet + damage


def incremental_functional(fields: FieldSolution, fields_n: FieldSolution, mesh: Mesh, geom: Geometry,
                           spec: C.MaterialSpec, loads: Loads) -> float:
    """Stored energy plus incremental dissipation minus the work of the
    prescribed forces; each staggered substep does not increase it (for
    ``beta = 0``, where the ratcheting lag plays no role)."""
    f_ext = external_force(mesh, geom, loads)
    return (stored_energy(fields, geom, spec)
            + geom.integrate(dissipation_density(fields, fields_n, geom, spec)) - float(f_ext @ fields.u))


_ANDERSON_PATIENCE = 50


class Anderson:
    """Anderson mixing of a fixed-point map ``x -> G(x)`` (history ``depth``).

    Used on the displacement between staggered sweeps; the plastic and damage
    subproblems stay exact at every iterate, only the displacement they are
    evaluated at is extrapolated. The history restarts when the residual grows.
    """

    def __init__(self, depth: int = 5):
        self.depth = depth
        self.G: list[np.ndarray] = []
        self.F: list[np.ndarray] = []

    def update(self, x: np.ndarray, gx: np.ndarray) -> np.ndarray:
        f = gx - x
        if self.F and np.linalg.norm(f) > 2.0 * np.linalg.norm(self.F[-1]):
            self.G, self.F = [], []
        self.G.append(gx.copy())
        self.F.append(f)
        if len(self.F) > self.depth + 1:
            self.G.pop(0)
            self.F.pop(0)
        if len(self.F) < 2:
            return gx
        dF = np.diff(np.array(self.F), axis=0).T
        dG = np.diff(np.array(self.G), axis=0).T
        coef, *_ = np.linalg.lstsq(dF, f, rcond=None)
        return gx - dG @ coef


@dataclass
class StepInfo:
    staggered: int
    newton: int
    plastic: SubproblemInfo
    damage: SubproblemInfo


def _rel_change(new, old) -> float:
    diff = float(np.linalg.norm(new - old))
    scale = float(np.linalg.norm(new))
    return diff if scale < 1e-12 else diff / scale


def step(fields_n: FieldSolution, mesh: Mesh, geom: Geometry, spec: C.MaterialSpec, loads: Loads,
         cfg: SolverConfig, ledger_n: EnergyLedger | None = None):
    """One load increment; returns ``(fields, EnergyLedger, StepInfo)``."""
    fields = fields_n.copy()
    free = free_dofs(mesh, loads)
    newton = solve_displacement(fields, mesh, geom, spec, loads, cfg)
    mixer = Anderson(cfg.anderson_depth) if cfg.acceleration == "anderson" else None
    p_info = d_info = SubproblemInfo(0, 0.0)
    best, since_best = np.inf, 0
    for j in range(1, cfg.max_stagger + 1):
        u0, k0, a0 = fields.u.copy(), fields.kappa.copy(), fields.alpha.copy()
        p_info = solve_plastic(fields, fields_n, mesh, geom, spec, cfg)
        d_info = solve_damage(fields, fields_n, mesh, geom, spec, cfg)
        newton += solve_displacement(fields, mesh, geom, spec, loads, cfg)
        pairs = ((fields.u, u0), (fields.kappa, k0), (fields.alpha, a0))
        changes = [_rel_change(a, b) for a, b in pairs]
        if max(changes) <= cfg.stagger_tol or all(float(np.max(np.abs(a - b), initial=0.0)) <= 1e-12
                                                  for a, b in pairs):
            break
        if mixer is not None:
            # mixing can cycle once the ligament snaps; plain alternation cannot
            if max(changes) < best:
                best, since_best = max(changes), 0
            else:
                since_best += 1
            if since_best >= _ANDERSON_PATIENCE:
                mixer = None
            else:
                fields.u[free] = mixer.update(u0[free], fields.u[free])
    else:
        raise SolverError("staggered iteration did not converge", residual=max(changes))

    state = point_state(fields, geom, spec)
    fields.gamma, fields.theta_prev = C.update_fatigue(state, spec)
    fields.stress = C.stress(state, spec)

    if ledger_n is None:
        ledger_n = EnergyLedger(stored_energy(fields_n, geom, spec), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    E = stored_energy(fields, geom, spec)
    dD = geom.integrate(dissipation_density(fields, fields_n, geom, spec))
    f, f_n = internal_force(geom, fields.stress), internal_force(geom, fields_n.stress)
    dW = 0.5 * float((f + f_n) @ (fields.u - fields_n.u))
    dE = E - ledger_n.E
    ledger = EnergyLedger(E, ledger_n.D_cum + dD, ledger_n.W_ext + dW, dE, dD, dW,
                          balance_ratio(dE, dD, dW, max(abs(E), abs(ledger_n.W_ext), abs(ledger_n.D_cum))))
    return fields, ledger, StepInfo(j, newton, p_info, d_info)


def balance_ratio(dE: float, dD: float, dW: float, level: float = 0.0) -> float:
    """``|dE + dD - dW|`` relative to the largest increment (floored at
    round-off of the accumulated totals)."""
    scale = max(abs(dW), abs(dD), abs(dE), 1e-12 * abs(level), 1e-300)
    return abs(dE + dD - dW) / scale


def loads_at(mesh: Mesh, schedule: LoadSchedule, step_index: int) -> Loads:
    """Boundary data of a schedule at one step."""
    value = schedule.sample(step_index)
    comp = 0 if schedule.direction == "x" else 1
    dofs, vals = [], []
    for name, comps in schedule.fixed.items():
        nodes = mesh.node_set(name)
        for c in comps:
            dofs.append(2 * nodes + (0 if c == "x" else 1))
            vals.append(np.zeros(len(nodes)))
    edges = np.zeros((0, 2), dtype=np.int64)
    traction = (0.0, 0.0)
    if schedule.control == "displacement":
        nodes = mesh.node_set(schedule.target)
        dofs.append(2 * nodes + comp)
        vals.append(np.full(len(nodes), value))
    else:
        edges = mesh.edge_set(schedule.target)
        traction = (value, 0.0) if comp == 0 else (0.0, value)
    if dofs:
        dofs_a = np.concatenate(dofs)
        vals_a = np.concatenate(vals)
        # later assignments (the driven set) win on shared dofs
        _, idx = np.unique(dofs_a[::-1], return_index=True)
        keep = len(dofs_a) - 1 - idx
        dofs_a, vals_a = dofs_a[keep], vals_a[keep]
    else:
        dofs_a, vals_a = np.zeros(0, dtype=np.int64), np.zeros(0)
    return Loads(dofs_a, vals_a, edges, traction)


@dataclass
class RunResult:
    rows: list[dict] = field(default_factory=list)
    fields: FieldSolution | None = None
    infos: list[StepInfo] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])


def _trace_row(step_index, schedule, mesh, geom, fields, ledger, loads_value):
    comp = 0 if schedule.direction == "x" else 1
    f = internal_force(geom, fields.stress)
    target = mesh.node_set(schedule.target)
    reaction = float(np.sum(f[2 * target + 1]))
    if schedule.control == "displacement":
        control = loads_value
    else:
        control = float(np.mean(fields.u[2 * target + comp]))
    spc = schedule.steps_per_cycle if schedule.values is None else 1
    return {
        "step": step_index, "time": step_index / spc, "load_factor": loads_value,
        "reaction_y": reaction, "control_disp": control, "E": ledger.E, "D_cum": ledger.D_cum,
        "W_ext": ledger.W_ext, "balance_residual": ledger.balance_residual,
        "alpha_max": float(np.max(fields.alpha)), "kappa_eq_max": float(np.max(np.sum(fields.kappa, axis=0))),
        "gamma_max": float(np.max(fields.gamma)),
    }


def format_value(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def run(mesh: Mesh, spec: C.MaterialSpec, schedule: LoadSchedule, cfg: SolverConfig | None = None,
        out_dir: str | None = None, snapshot_every: int = 0, progress=None) -> RunResult:
    """March a load schedule; optionally write ``trace.csv`` and snapshots.

    Trace rows are flushed as they are produced, so a failing run leaves
    everything up to the last accepted step on disk.
    """
    from .io import write_vtk

    cfg = cfg or SolverConfig()
    geom = Geometry(mesh)
    for name in [schedule.target, *schedule.fixed]:
        mesh.node_set(name)
    fields = FieldSolution.virgin(mesh, spec)
    result = RunResult(fields=fields)
    ledger = EnergyLedger(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    result.rows.append(_trace_row(0, schedule, mesh, geom, fields, ledger, schedule.sample(0)))

    fh = writer = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        fh = open(os.path.join(out_dir, "trace.csv"), "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        writer.writerow([format_value(result.rows[0][c]) for c in TRACE_COLUMNS])
        fh.flush()
        if snapshot_every:
            write_vtk(fields, mesh, spec, os.path.join(out_dir, "snap_000000.vtk"))
    try:
        for i in range(1, schedule.n_steps + 1):
            loads = loads_at(mesh, schedule, i)
            try:
                fields, ledger, info = step(fields, mesh, geom, spec, loads, cfg, ledger)
            except SolverError as exc:
                exc.step = i
                if schedule.control == "force":
                    raise LoadCapacityError(f"force target {schedule.sample(i):g} not reachable: {exc}",
                                            step=i, trace=result) from exc
                raise
            row = _trace_row(i, schedule, mesh, geom, fields, ledger, schedule.sample(i))
            result.rows.append(row)
            result.infos.append(info)
            result.fields = fields
            if writer is not None:
                writer.writerow([format_value(row[c]) for c in TRACE_COLUMNS])
                fh.flush()
                if snapshot_every and (i % snapshot_every == 0 or i == schedule.n_steps):
                    write_vtk(fields, mesh, spec, os.path.join(out_dir, f"snap_{i:06d}.vtk"))
            if progress is not None:
                progress(row, info)
            if cfg.strict_balance and ledger.balance_residual > cfg.balance_tol:
                raise EnergyBalanceError(
                    f"power balance violated: relative residual {ledger.balance_residual:.3e}", step=i)
    finally:
        if fh is not None:
            fh.close()
    return result
