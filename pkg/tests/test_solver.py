import math

import numpy as np
import pytest
import scipy.sparse as sp

from fatigue_pf import constitutive as C
from fatigue_pf import fem, io, solver
from fatigue_pf import tensor as T
from fatigue_pf.errors import EnergyBalanceError, LoadCapacityError, SolverError
from fatigue_pf.loading import LoadSchedule
from fatigue_pf.matpoint import ControlMode, run_point

from conftest import notched_spec


def elastic_spec(**kw):
    return C.MaterialSpec.from_young(200.0, 0.3, surfaces=(C.SurfaceParams(1e9),), w0=1e12, **kw)


def test_displacement_solve_matches_dense_oracle():
    spec = elastic_spec(split="none")
    m = io.unit_square(3)
    g = fem.Geometry(m)
    sched = LoadSchedule(vmin=-0.01, vmax=0.01, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    loads = solver.loads_at(m, sched, 2)
    f = fem.FieldSolution.virgin(m, spec)
    solver.solve_displacement(f, m, g, spec, loads, solver.SolverConfig())
    # dense elimination of the prescribed dofs
    _, K = fem.assemble_equilibrium(m, g, fem.FieldSolution.virgin(m, spec), spec, loads)
    K = K.toarray()
    free = solver.free_dofs(m, loads)
    u = np.zeros(2 * m.n_nodes)
    u[loads.dirichlet_dofs] = loads.dirichlet_values
    u[free] = np.linalg.solve(K[np.ix_(free, free)], -K[free] @ u)
    assert np.max(np.abs(f.u - u)) <= 1e-12 * np.abs(u).max()


def test_cg_and_direct_agree():
    spec = elastic_spec()
    m = io.unit_square(4)
    g = fem.Geometry(m)
    sched = LoadSchedule(vmin=-0.01, vmax=0.01, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    loads = solver.loads_at(m, sched, 2)
    out = []
    for ls in ("direct", "cg"):
        f = fem.FieldSolution.virgin(m, spec)
        solver.solve_displacement(f, m, fem.Geometry(m), spec, loads, solver.SolverConfig(linear_solver=ls))
        out.append(f.u)
    assert np.allclose(out[0], out[1], rtol=0, atol=1e-10 * np.abs(out[0]).max())


def test_singular_system_raises():
    spec = elastic_spec()
    m = io.unit_square(2)
    with pytest.raises(SolverError):
        f = fem.FieldSolution.virgin(m, spec)
        loads = fem.Loads(traction_edges=m.edge_set("top"), traction=(0.0, 1.0))
        solver.solve_displacement(f, m, fem.Geometry(m), spec, loads, solver.SolverConfig())


def test_homogeneous_at2_damage_follows_point_trajectory():
    """A single element in uniaxial strain: eta_p = eta_d = 0 and a
    homogeneous field, so the FE run must reproduce the point driver."""
    spec = C.MaterialSpec.from_young(1.0, 0.0, surfaces=(C.SurfaceParams(1e9),), w0=1.0, damage_model="AT2")
    m = io.unit_square(1)
    sched = LoadSchedule(vmin=-0.5, vmax=1.5, cycles=1, steps_per_cycle=16,
                         fixed={"bottom": ("x", "y"), "top": ("x",)})
    res = solver.run(m, spec, sched, solver.SolverConfig(stagger_tol=1e-12))
    alpha_fe = res.column("alpha_max")
    point = run_point(ControlMode("displacement", -0.5, 1.5), spec, steps_per_cycle=16)
    assert np.max(np.abs(alpha_fe - point["alpha"])) <= 1e-6


def test_staggered_substeps_do_not_increase_functional():
    spec = notched_spec(beta=0.0, gamma0=math.inf)
    m = io.double_notch(h=2.0)
    g = fem.Geometry(m)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, cycles=1, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    cfg = solver.SolverConfig()
    fn = fem.FieldSolution.virgin(m, spec)
    for i in (1, 2):
        loads = solver.loads_at(m, sched, i)
        f = fn.copy()
        solver.solve_displacement(f, m, g, spec, loads, cfg)
        pi = [solver.incremental_functional(f, fn, m, g, spec, loads)]
        for _ in range(5):
            solver.solve_plastic(f, fn, m, g, spec, cfg)
            pi.append(solver.incremental_functional(f, fn, m, g, spec, loads))
            solver.solve_damage(f, fn, m, g, spec, cfg)
            pi.append(solver.incremental_functional(f, fn, m, g, spec, loads))
            solver.solve_displacement(f, m, g, spec, loads, cfg)
            pi.append(solver.incremental_functional(f, fn, m, g, spec, loads))
        assert np.all(np.diff(pi) <= 1e-10 * abs(pi[0]) + 1e-12)
        fn, _, _ = solver.step(fn, m, g, spec, loads, cfg)


def test_anderson_and_plain_iterations_agree():
    spec = notched_spec()
    m = io.double_notch(h=2.0)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, cycles=1, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    out = {}
    for acc in ("none", "anderson"):
        g = fem.Geometry(m)
        f = fem.FieldSolution.virgin(m, spec)
        cfg = solver.SolverConfig(acceleration=acc, stagger_tol=1e-9, max_stagger=3000)
        for i in (1, 2, 3):
            f, _, info = solver.step(f, m, g, spec, solver.loads_at(m, sched, i), cfg)
        out[acc] = (f, info.staggered)
    a, b = out["none"][0], out["anderson"][0]
    assert out["anderson"][1] < out["none"][1]
    assert np.max(np.abs(a.u - b.u)) <= 1e-6 * np.abs(a.u).max()
    assert np.max(np.abs(a.kappa - b.kappa)) <= 1e-6 * np.abs(a.kappa).max()


def test_factorization_cache_gives_same_answer():
    spec = notched_spec()
    m = io.double_notch(h=2.0)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, cycles=1, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    loads = solver.loads_at(m, sched, 1)
    g = fem.Geometry(m)
    f1 = fem.FieldSolution.virgin(m, spec)
    solver.solve_displacement(f1, m, g, spec, loads, solver.SolverConfig())
    f1.u[:] = 0.0
    solver.solve_displacement(f1, m, g, spec, loads, solver.SolverConfig())  # reuses the factors
    f2 = fem.FieldSolution.virgin(m, spec)
    solver.solve_displacement(f2, m, fem.Geometry(m), spec, loads, solver.SolverConfig())
    assert np.array_equal(f1.u, f2.u)


def test_loads_driven_set_wins_on_shared_dofs():
    m = io.unit_square(2)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, steps_per_cycle=8, fixed={"left": ("x", "y")})
    loads = solver.loads_at(m, sched, 2)
    corner = int(np.intersect1d(m.node_set("left"), m.node_set("top"))[0])
    d = dict(zip(loads.dirichlet_dofs.tolist(), loads.dirichlet_values.tolist()))
    assert d[2 * corner + 1] == 1.0 and d[2 * corner] == 0.0
    assert len(d) == len(loads.dirichlet_dofs)


def test_run_outputs(tmp_path):
    spec = elastic_spec()
    m = io.unit_square(2)
    sched = LoadSchedule(vmin=-0.01, vmax=0.01, cycles=2, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    res = solver.run(m, spec, sched, out_dir=str(tmp_path), snapshot_every=8)
    cols = io.read_trace(str(tmp_path / "trace.csv"))
    assert list(cols) == list(solver.TRACE_COLUMNS)
    assert len(cols["step"]) == 17 == len(res.rows)
    assert sorted(p.name for p in tmp_path.glob("*.vtk")) == [
        "snap_000000.vtk", "snap_000008.vtk", "snap_000016.vtk"]
    assert np.max(cols["balance_residual"]) <= 1e-10


def test_run_is_deterministic(tmp_path):
    spec = notched_spec()
    m = io.double_notch(h=2.0)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, cycles=1, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    cfg = solver.SolverConfig(acceleration="anderson")
    for name in ("a", "b"):
        solver.run(m, spec, sched, cfg, out_dir=str(tmp_path / name))
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_strict_balance_aborts():
    spec = notched_spec()
    m = io.double_notch(h=2.0)
    sched = LoadSchedule(vmin=-1.0, vmax=1.0, cycles=1, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    with pytest.raises(EnergyBalanceError) as err:
        solver.run(m, spec, sched, solver.SolverConfig(strict_balance=True, acceleration="anderson"))
    assert err.value.step >= 1


def test_force_control_capacity_error_keeps_trace():
    spec = C.MaterialSpec.from_young(1.0, 0.0, surfaces=(C.SurfaceParams(1e9),), w0=1.0, damage_model="AT2")
    m = io.unit_square(1)
    sched = LoadSchedule(control="force", values=(0.2, 5.0), fixed={"bottom": ("x", "y")})
    with pytest.raises(LoadCapacityError) as err:
        solver.run(m, spec, sched, solver.SolverConfig(max_stagger=50))
    assert err.value.step == 2
    assert len(err.value.trace.rows) == 2


def test_config_validation():
    for kw in (dict(stagger_tol=0.0), dict(max_stagger=0), dict(linear_solver="lu"),
               dict(acceleration="broyden"), dict(plastic_coupling="jacobi")):
        with pytest.raises(ValueError):
            solver.SolverConfig(**kw)


def test_joint_and_gauss_seidel_surfaces_agree():
    spec = C.MaterialSpec.from_young(
        200e3, 0.3, surfaces=C.linear_surfaces(3, (150.0, 300.0), (2e4, 3e3)), w0=1e12, eta_p=2.0)
    m = io.unit_square(3)
    g = fem.Geometry(m)
    sched = LoadSchedule(vmin=-0.01, vmax=0.01, steps_per_cycle=8, fixed={"bottom": ("x", "y")})
    f = fem.FieldSolution.virgin(m, spec)
    solver.solve_displacement(f, m, g, spec, solver.loads_at(m, sched, 2), solver.SolverConfig())
    fn = fem.FieldSolution.virgin(m, spec)
    a, b = f.copy(), f.copy()
    solver.solve_plastic(a, fn, m, g, spec, solver.SolverConfig())
    solver.solve_plastic(b, fn, m, g, spec, solver.SolverConfig(plastic_coupling="gauss-seidel",
                                                                 max_surface_sweeps=5000, surface_tol=1e-14))
    assert np.max(np.abs(a.kappa - b.kappa)) <= 1e-9 * np.abs(a.kappa).max()
