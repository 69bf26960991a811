import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fatigue_pf import constitutive as C
from fatigue_pf import fem, io, solver
from fatigue_pf import tensor as T
from fatigue_pf.errors import InputError
from fatigue_pf.matpoint import return_map_step

unit = st.floats(-1.0, 1.0)


def elastic_spec(**kw):
    return C.MaterialSpec.from_young(200.0, 0.3, surfaces=(C.SurfaceParams(1e9),), w0=1e12, **kw)


def distorted_2x2():
    m = io.unit_square(2)
    nodes = m.nodes.copy()
    nodes[4] = [0.58, 0.43]  # interior node
    return fem.Mesh(nodes, m.elements, m.node_sets, m.edge_sets)


@given(unit, unit)
def test_partition_of_unity(xi, eta):
    N, dN = fem.shape_functions(xi, eta)
    assert np.isclose(N.sum(), 1.0, atol=1e-15)
    assert np.allclose(dN.sum(axis=0), 0.0, atol=1e-15)


@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), unit, unit)
def test_shape_gradients_reproduce_linear_field(dx, dy, xi, eta):
    xy = np.array([[0.0, 0.0], [1.0, 0.1], [1.1 + dx, 1.0 + dy], [-0.1, 0.9]])
    N, grad, det = fem.shape_eval(xy, xi, eta)
    f = 3.0 * xy[:, 0] - 2.0 * xy[:, 1] + 0.5
    assert det > 0
    assert np.allclose(grad.T @ f, [3.0, -2.0], atol=1e-12)


def test_inverted_element_rejected():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(InputError, match="Jacobian"):
        fem.Mesh(nodes, np.array([[0, 3, 2, 1]]))
    with pytest.raises(InputError, match="missing node"):
        fem.Mesh(nodes, np.array([[0, 1, 2, 7]]))


def test_node_set_falls_back_to_edge_set():
    m = io.double_notch(h=2.0)
    assert np.array_equal(m.node_set("top"), m.node_sets["top"])
    m2 = fem.Mesh(m.nodes, m.elements, {}, m.edge_sets)
    assert set(m2.node_set("top")) == set(m.node_sets["top"])
    with pytest.raises(InputError):
        m.node_set("nowhere")


def test_area_and_mass():
    m = distorted_2x2()
    g = fem.Geometry(m)
    assert g.integrate(np.ones((4, 4))) == pytest.approx(1.0, rel=1e-14)
    assert g.nodal_weight.sum() == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("mesh", [io.unit_square(1), distorted_2x2()], ids=["one", "distorted"])
def test_patch_test(mesh):
    """Linear boundary displacement on an elastic patch: interior nodes follow
    the linear field and the stress is uniform, to 1e-10."""
    spec = elastic_spec(split="none")
    grad_u = np.array([[1e-3, 4e-4], [-2e-4, -5e-4]])
    exact = mesh.nodes @ grad_u.T + [1e-4, 2e-4]
    boundary = np.unique(np.concatenate([mesh.node_set(s) for s in ("top", "bottom", "left", "right")]))
    dofs = np.concatenate([2 * boundary, 2 * boundary + 1])
    vals = np.concatenate([exact[boundary, 0], exact[boundary, 1]])
    loads = fem.Loads(dofs, vals)
    geom = fem.Geometry(mesh)
    f = fem.FieldSolution.virgin(mesh, spec)
    solver.solve_displacement(f, mesh, geom, spec, loads, solver.SolverConfig())
    assert np.max(np.abs(f.u.reshape(-1, 2) - exact)) <= 1e-10 * np.abs(exact).max()
    eps = T.plane_strain(grad_u[0, 0], grad_u[1, 1], 0.5 * (grad_u[0, 1] + grad_u[1, 0]))
    st_ = C.PointState.virgin(spec)
    st_.eps = eps
    sig = C.stress(st_, spec)
    got = C.stress(fem.point_state(f, geom, spec), spec)
    assert np.max(np.abs(got - sig)) <= 1e-10 * np.abs(sig).max()


def test_internal_force_is_linear_for_elastic_no_split():
    spec = elastic_spec(split="none")
    m = distorted_2x2()
    g = fem.Geometry(m)
    rng = np.random.default_rng(3)
    u1, u2 = rng.normal(size=(2, 2 * m.n_nodes)) * 1e-3
    f = fem.FieldSolution.virgin(m, spec)

    def fint(u):
        f.u = u
        return fem.internal_force(g, C.stress(fem.point_state(f, g, spec), spec))

    lhs = fint(2.0 * u1 - 3.0 * u2)
    rhs = 2.0 * fint(u1) - 3.0 * fint(u2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.abs(rhs).max()


@given(st.integers(0, 1000))
def test_equilibrium_tangent_matches_finite_differences(seed):
    spec = elastic_spec()
    m = distorted_2x2()
    g = fem.Geometry(m)
    rng = np.random.default_rng(seed)
    f = fem.FieldSolution.virgin(m, spec)
    f.u = rng.normal(size=2 * m.n_nodes) * 1e-3
    f.alpha = rng.uniform(0.0, 0.6, m.n_nodes)
    f.eps_p = rng.normal(size=f.eps_p.shape) * 1e-4 * [1, 1, 0, 1, 0, 0]
    tr = T.trace(C.elastic_strain(fem.point_state(f, g, spec)))
    if np.min(np.abs(tr)) < 1e-5:
        return  # too close to the split kink for a finite-difference check
    loads = fem.Loads()
    r0, K = fem.assemble_equilibrium(m, g, f, spec, loads)
    h = 1e-8
    v = rng.normal(size=2 * m.n_nodes)
    fp, fm = f.copy(), f.copy()
    fp.u = f.u + h * v
    fm.u = f.u - h * v
    rp, _ = fem.assemble_equilibrium(m, g, fp, spec, loads)
    rm, _ = fem.assemble_equilibrium(m, g, fm, spec, loads)
    fd = (rp - rm) / (2 * h)
    assert np.linalg.norm(fd - K @ v) <= 1e-5 * np.linalg.norm(K @ v)


@given(st.integers(0, 1000))
def test_damage_tangent_is_symmetric_psd(seed):
    spec = elastic_spec(damage_model="AT2", eta_d=0.1).with_(w0=1.0)
    m = distorted_2x2()
    g = fem.Geometry(m)
    rng = np.random.default_rng(seed)
    f = fem.FieldSolution.virgin(m, spec)
    f.u = rng.normal(size=2 * m.n_nodes) * 1e-2
    _, K, (lo, hi) = fem.assemble_damage(m, g, f, f, spec)
    Kd = K.toarray()
    assert np.allclose(Kd, Kd.T, atol=1e-14 * np.abs(Kd).max())
    assert np.linalg.eigvalsh(Kd).min() >= -1e-12 * np.abs(Kd).max()
    assert np.array_equal(lo, f.alpha) and np.all(hi == 1.0)


def test_traction_resultant():
    m = io.unit_square(3, size=2.0)
    g = fem.Geometry(m)
    f = fem.external_force(m, g, fem.Loads(traction_edges=m.edge_set("top"), traction=(0.5, -3.0)))
    assert f[0::2].sum() == pytest.approx(1.0) and f[1::2].sum() == pytest.approx(-6.0)
    assert np.all(f[2 * np.setdiff1d(np.arange(m.n_nodes), m.node_set("top"))] == 0.0)


def _homogeneous(mesh, spec, eps):
    """Fields for an imposed homogeneous plane strain, all dofs prescribed."""
    f = fem.FieldSolution.virgin(mesh, spec)
    x, y = mesh.nodes.T
    f.u[0::2] = eps[0] * x + eps[3] * y
    f.u[1::2] = eps[3] * x + eps[1] * y
    return f


@given(st.integers(0, 10_000))
def test_fe_plastic_step_matches_point_return_map(seed):
    rng = np.random.default_rng(seed)
    spec = C.MaterialSpec.from_young(
        200e3, 0.3, surfaces=C.linear_surfaces(3, (150.0, 300.0), (2e4, 3e3), (rng.uniform(-50, 200), 0.0)),
        w0=1e12, beta=rng.uniform(0.0, 0.6),
    )
    mesh = io.unit_square(1)
    geom = fem.Geometry(mesh)
    eps = T.plane_strain(*rng.normal(scale=3e-3, size=3))
    fn = fem.FieldSolution.virgin(mesh, spec)
    fn.stress[:] = T.plane_strain(*rng.normal(scale=100.0, size=3))
    f = _homogeneous(mesh, spec, eps)
    solver.solve_plastic(f, fn, mesh, geom, spec, solver.SolverConfig())
    st_n = C.PointState.virgin(spec)
    ref, _ = return_map_step(st_n, eps, 0.0, fn.stress[0, 0], spec)
    scale = max(1e-12, float(np.abs(ref.kappa).max()))
    assert np.max(np.abs(f.kappa - ref.kappa[:, None])) <= 1e-8 * scale
    assert np.max(np.abs(f.eps_p - ref.eps_p)) <= 1e-8 * max(1e-12, float(np.abs(ref.eps_p).max()))
