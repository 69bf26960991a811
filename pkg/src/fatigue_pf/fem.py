"""Bilinear quadrilaterals in plane strain.

Unknowns per node: two displacement components, one hardening field per yield
surface and the damage field. Plastic and ratcheting strains, the fatigue
accumulator and the stress of the last accepted step live at the 2x2 Gauss
points of each element.

Each subproblem of the staggered scheme is assembled here:

* equilibrium: residual and consistent tangent in the displacements,
* plastic: the exact quadratic model of the incremental energy in the nodal
  hardening increments (a bound-constrained QP, increments >= 0),
* damage: the incremental energy in the nodal damage, quadratic for the
  quadratic degradation function (box constraints ``alpha_n <= alpha <= 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import constitutive as C
from . import tensor as T
from .errors import InputError
from .matpoint import local_plastic_system

_G = 1.0 / math.sqrt(3.0)
QP_LOCAL = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def shape_functions(xi: float, eta: float):
    """Bilinear shape values ``(4,)`` and reference gradients ``(4, 2)``."""
    N = 0.25 * (1.0 + _CORNERS[:, 0] * xi) * (1.0 + _CORNERS[:, 1] * eta)
    dN = np.empty((4, 2))
    dN[:, 0] = 0.25 * _CORNERS[:, 0] * (1.0 + _CORNERS[:, 1] * eta)
    dN[:, 1] = 0.25 * _CORNERS[:, 1] * (1.0 + _CORNERS[:, 0] * xi)
    return N, dN


def shape_eval(xy, xi: float, eta: float, element_id=None):
    """Shape values, physical gradients and Jacobian determinant at a point.

    ``xy`` holds the four corner coordinates counterclockwise.
    """
    if not (-1.0 <= xi <= 1.0 and -1.0 <= eta <= 1.0):
        raise ValueError(f"local coordinates ({xi}, {eta}) outside [-1, 1]^2")
    xy = np.asarray(xy, dtype=float)
    N, dN = shape_functions(xi, eta)
    J = dN.T @ xy
    det = float(np.linalg.det(J))
    if det <= 0.0:
        raise InputError(f"element {element_id}: non-positive Jacobian determinant {det:.3e}")
    grad = dN @ np.linalg.inv(J).T
    return N, grad, det


@dataclass
class Mesh:
    """Quadrilateral mesh; ``elements`` are 0-based node indices.

    ``node_ids`` / ``element_ids`` keep the 1-based ids of the source file so
    that error messages can name them. Edge sets hold node-index pairs.
    """

    nodes: np.ndarray
    elements: np.ndarray
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)
    edge_sets: dict[str, np.ndarray] = field(default_factory=dict)
    node_ids: np.ndarray | None = None
    element_ids: np.ndarray | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 4)
        if self.node_ids is None:
            self.node_ids = np.arange(1, len(self.nodes) + 1)
        if self.element_ids is None:
            self.element_ids = np.arange(1, len(self.elements) + 1)
        self.node_sets = {k: np.asarray(v, dtype=np.int64).ravel() for k, v in self.node_sets.items()}
        self.edge_sets = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in self.edge_sets.items()}
        self.validate()

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def validate(self):
        n = self.n_nodes
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            raise InputError("element connectivity references a missing node")
        for name, ids in self.node_sets.items():
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise InputError(f"node set {name!r} references a missing node")
        for name, ids in self.edge_sets.items():
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise InputError(f"edge set {name!r} references a missing node")
        keys = np.sort(self.elements, axis=1)
        _, first = np.unique(keys, axis=0, return_index=True)
        if len(first) != len(keys):
            dup = sorted(set(range(len(keys))) - set(first.tolist()))[0]
            raise InputError(f"element {self.element_ids[dup]} duplicates another element")
        if self.n_elements:
            _geometry_arrays(self)

    def node_set(self, name: str) -> np.ndarray:
        if name in self.node_sets:
            return self.node_sets[name]
        if name in self.edge_sets:
            return np.unique(self.edge_sets[name])
        raise InputError(f"unknown node set {name!r}")

    def edge_set(self, name: str) -> np.ndarray:
        if name not in self.edge_sets:
            raise InputError(f"unknown edge set {name!r}")
        return self.edge_sets[name]


def _geometry_arrays(mesh: Mesh):
    xy = mesh.nodes[mesh.elements]  # (E, 4, 2)
    N = np.empty((4, 4))
    dN = np.empty((4, 4, 2))
    for q, (xi, eta) in enumerate(QP_LOCAL):
        N[q], dN[q] = shape_functions(xi, eta)
    J = np.einsum("qai,eaj->eqij", dN, xy)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    bad = np.flatnonzero(np.any(det <= 0.0, axis=1))
    if bad.size:
        raise InputError(f"element {mesh.element_ids[bad[0]]}: non-positive Jacobian determinant")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    grad = np.einsum("qak,eqjk->eqaj", dN, inv)
    return N, grad, det


class Geometry:
    """Quadrature data and scatter patterns of a mesh (weights are all one)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.N, self.grad, det = _geometry_arrays(mesh)
        self.wdet = det
        conn = mesh.elements
        self.dofs = np.stack([2 * conn, 2 * conn + 1], axis=-1).reshape(-1, 8)
        self._rows8 = np.repeat(self.dofs, 8, axis=1).ravel()
        self._cols8 = np.tile(self.dofs, (1, 8)).ravel()
        self._rows4 = np.repeat(conn, 4, axis=1).ravel()
        self._cols4 = np.tile(conn, (1, 4)).ravel()
        B = np.zeros((mesh.n_elements, 4, 3, 8))
        B[:, :, 0, 0::2] = self.grad[..., 0]
        B[:, :, 1, 1::2] = self.grad[..., 1]
        B[:, :, 2, 0::2] = self.grad[..., 1]
        B[:, :, 2, 1::2] = self.grad[..., 0]
        self.B = B
        # consistent "mass" and stiffness patterns of a scalar nodal field
        self.mass_e = np.einsum("eq,qa,qb->eqab", self.wdet, self.N, self.N)
        self.lap_e = np.einsum("eq,eqai,eqbi->eqab", self.wdet, self.grad, self.grad)
        self.nodal_weight = self.scatter_scalar(np.einsum("eq,qa->ea", self.wdet, self.N))

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    def at_qp(self, nodal: np.ndarray) -> np.ndarray:
        """Interpolate nodal values ``(n_nodes, ...)`` to ``(E, 4, ...)``."""
        return np.einsum("qa,ea...->eq...", self.N, nodal[self.mesh.elements])

    def grad_qp(self, nodal: np.ndarray) -> np.ndarray:
        """Gradient of a scalar nodal field at the quadrature points, ``(E, 4, 2)``."""
        vals = nodal[self.mesh.elements][:, None, None, :]
        return np.matmul(vals, self.grad)[:, :, 0, :]

    def strain(self, u: np.ndarray) -> np.ndarray:
        """Plane-strain tensors ``(E, 4, 6)`` from the displacement vector."""
        voigt = np.einsum("eqkd,ed->eqk", self.B, u[self.dofs])
        return T.plane_strain(voigt[..., 0], voigt[..., 1], 0.5 * voigt[..., 2])

    def integrate(self, qp_values: np.ndarray) -> float:
        return float(np.sum(self.wdet * qp_values))

    def scatter_scalar(self, elem: np.ndarray) -> np.ndarray:
        return np.bincount(self.mesh.elements.ravel(), weights=elem.ravel(), minlength=self.n_nodes)

    def scatter_vector(self, elem: np.ndarray) -> np.ndarray:
        return np.bincount(self.dofs.ravel(), weights=elem.ravel(), minlength=2 * self.n_nodes)

    def scatter_matrix8(self, elem: np.ndarray) -> sp.csr_matrix:
        n = 2 * self.n_nodes
        return sp.coo_matrix((elem.ravel(), (self._rows8, self._cols8)), shape=(n, n)).tocsr()

    def scatter_matrix4(self, elem: np.ndarray) -> sp.csr_matrix:
        n = self.n_nodes
        return sp.coo_matrix((elem.ravel(), (self._rows4, self._cols4)), shape=(n, n)).tocsr()

    def element_mean(self, qp_values: np.ndarray) -> np.ndarray:
        w = self.wdet.reshape(self.wdet.shape + (1,) * (qp_values.ndim - 2))
        return np.sum(w * qp_values, axis=1) / np.sum(w, axis=1)

    def project(self, qp_values: np.ndarray) -> np.ndarray:
        """Lumped L2 projection of a scalar quadrature field to the nodes."""
        num = self.scatter_scalar(np.einsum("eq,qa,eq->ea", self.wdet, self.N, qp_values))
        return num / self.nodal_weight


@dataclass
class FieldSolution:
    """Nodal fields and quadrature-point history.

    ``stress`` is the stress of the last accepted step; it fixes the
    ratcheting direction during the next step.
    """

    u: np.ndarray
    kappa: np.ndarray
    alpha: np.ndarray
    eps_p: np.ndarray
    eps_r: np.ndarray
    gamma: np.ndarray
    theta_prev: np.ndarray
    stress: np.ndarray

    @classmethod
    def virgin(cls, mesh: Mesh, spec: C.MaterialSpec) -> "FieldSolution":
        if spec.uniaxial:
            raise ValueError("the finite-element layer needs a full-tensor material (uniaxial=False)")
        n, ne, ny = mesh.n_nodes, mesh.n_elements, spec.ny
        return cls(
            u=np.zeros(2 * n), kappa=np.zeros((ny, n)), alpha=np.zeros(n),
            eps_p=np.zeros((ne, 4, ny, 6)), eps_r=np.zeros((ne, 4, 6)),
            gamma=np.zeros((ne, 4)), theta_prev=np.zeros((ne, 4)), stress=np.zeros((ne, 4, 6)),
        )

    def copy(self) -> "FieldSolution":
        return FieldSolution(**{k: np.copy(v) for k, v in self.__dict__.items()})


@dataclass
class Loads:
    """Boundary data for one step.

    ``traction`` is a force per unit length applied on the node-pair edges
    ``traction_edges``; ``body`` a force per unit volume.
    """

    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    traction_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    traction: tuple[float, float] = (0.0, 0.0)
    body: tuple[float, float] = (0.0, 0.0)


def point_state(fields: FieldSolution, geom: Geometry, spec: C.MaterialSpec) -> C.PointState:
    """Constitutive state at all quadrature points, shape ``(E, 4)``."""
    kappa_q = geom.at_qp(fields.kappa.T)
    grad_k = np.stack([geom.grad_qp(k) for k in fields.kappa], axis=-2)  # (E, 4, ny, 2)
    return C.PointState(
        eps=geom.strain(fields.u), eps_p=fields.eps_p, kappa=kappa_q, eps_r=fields.eps_r,
        alpha=np.clip(geom.at_qp(fields.alpha), 0.0, 1.0), gamma=fields.gamma, theta_prev=fields.theta_prev,
        grad_energy=0.5 * spec.eta_p**2 * np.sum(grad_k**2, axis=-1),
    )


def _voigt(sig: np.ndarray) -> np.ndarray:
    return np.stack([sig[..., 0], sig[..., 1], sig[..., 3]], axis=-1)


def tangent_moduli(state: C.PointState, spec: C.MaterialSpec) -> np.ndarray:
    """Plane-strain moduli ``(..., 3, 3)`` (engineering shear) for fixed
    plastic strains and damage, on the branch selected by ``tr(eps_e)``."""
    g, _ = C.degradation(state.alpha)
    tr = T.trace(C.elastic_strain(state))
    if spec.split == "none":
        kt = g * spec.K
    else:
        kt = np.where(tr > 0.0, g * spec.K, spec.K)
    gm = g * spec.mu
    D = np.zeros(np.shape(tr) + (3, 3))
    D[..., 0, 0] = D[..., 1, 1] = kt + 4.0 * gm / 3.0
    D[..., 0, 1] = D[..., 1, 0] = kt - 2.0 * gm / 3.0
    D[..., 2, 2] = gm
    return D


def internal_force(geom: Geometry, stress: np.ndarray) -> np.ndarray:
    fe = np.einsum("eq,eqkd,eqk->ed", geom.wdet, geom.B, _voigt(stress))
    return geom.scatter_vector(fe)


def external_force(mesh: Mesh, geom: Geometry, loads: Loads) -> np.ndarray:
    f = np.zeros(2 * mesh.n_nodes)
    t = np.asarray(loads.traction, dtype=float)
    if loads.traction_edges.size and np.any(t != 0.0):
        a, b = loads.traction_edges[:, 0], loads.traction_edges[:, 1]
        length = np.linalg.norm(mesh.nodes[b] - mesh.nodes[a], axis=1)
        # two-point Gauss rule on the edge, exact for linear shape functions
        for s in (-_G, _G):
            na, nb = 0.5 * (1.0 - s), 0.5 * (1.0 + s)
            for comp in (0, 1):
                np.add.at(f, 2 * a + comp, na * t[comp] * 0.5 * length)
                np.add.at(f, 2 * b + comp, nb * t[comp] * 0.5 * length)
    body = np.asarray(loads.body, dtype=float)
    if np.any(body != 0.0):
        w = np.einsum("eq,qa->ea", geom.wdet, geom.N)
        fe = np.zeros((mesh.n_elements, 8))
        fe[:, 0::2] = w * body[0]
        fe[:, 1::2] = w * body[1]
        f += geom.scatter_vector(fe)
    return f


def assemble_equilibrium(mesh: Mesh, geom: Geometry, fields: FieldSolution, spec: C.MaterialSpec, loads: Loads):
    """Residual ``f_int - f_ext`` over all dofs and the consistent tangent.

    Rows of Dirichlet dofs carry the reactions; the solver restricts to the
    free dofs.
    """
    residual, D = equilibrium_residual(mesh, geom, fields, spec, loads)
    return residual, stiffness(geom, D)


def equilibrium_residual(mesh: Mesh, geom: Geometry, fields: FieldSolution, spec: C.MaterialSpec, loads: Loads):
    """Residual over all dofs and the quadrature-point moduli behind the tangent."""
    state = point_state(fields, geom, spec)
    sig = C.stress(state, spec)
    residual = internal_force(geom, sig) - external_force(mesh, geom, loads)
    return residual, tangent_moduli(state, spec)


def stiffness(geom: Geometry, D: np.ndarray) -> sp.csr_matrix:
    ne = geom.mesh.n_elements
    DB = np.matmul(D, geom.B).reshape(ne, 12, 8)
    Bw = (geom.B * geom.wdet[..., None, None]).reshape(ne, 12, 8)
    return geom.scatter_matrix8(np.matmul(Bw.transpose(0, 2, 1), DB))


@dataclass
class PlasticSystem:
    """Block system ``K dk = F`` for all surfaces, ``dk >= 0``.

    Unknowns are ordered surface-major: ``index = s * n_nodes + node``.
    """

    K: sp.csr_matrix
    F: np.ndarray
    directions: np.ndarray
    ratchet_direction: np.ndarray
    n_nodes: int
    ny: int

    def block(self, s: int, t: int) -> sp.csr_matrix:
        n = self.n_nodes
        return self.K[s * n:(s + 1) * n, t * n:(t + 1) * n]

    def residual(self, dk: np.ndarray) -> np.ndarray:
        return self.K @ dk.ravel() - self.F


def assemble_plastic(mesh: Mesh, geom: Geometry, fields: FieldSolution, fields_n: FieldSolution,
                     spec: C.MaterialSpec) -> PlasticSystem:
    """Quadratic model of the incremental energy in the nodal increments of
    every hardening field, at the current displacement and damage.

    Local yield terms come from the point model at each quadrature point
    (trial directions, lagged ratcheting direction); the gradient term
    ``g eta_p^2 grad(kappa_s) . grad(kappa~)`` couples neighbouring nodes.
    """
    ny, n = spec.ny, mesh.n_nodes
    trial = fields.copy()
    trial.eps_p, trial.eps_r, trial.kappa = fields_n.eps_p, fields_n.eps_r, fields_n.kappa
    state = point_state(trial, geom, spec)
    sig_tr = C.stress(state, spec)
    g, _ = C.degradation(state.alpha)
    floored = spec.sigma_p + spec.H_iso * state.kappa <= 0.0
    A, b, dirs, n_g = local_plastic_system(fields_n.eps_p, state.kappa, sig_tr, g, fields_n.stress, spec, floored)
    blocks = []
    lap = spec.eta_p**2 * np.einsum("eq,eqab->eab", g, geom.lap_e)
    F = np.empty((ny, n))
    for s in range(ny):
        row = []
        for t in range(ny):
            Ke = np.einsum("eq,eqab->eab", A[..., s, t], geom.mass_e)
            if s == t:
                Ke = Ke + lap
            row.append(geom.scatter_matrix4(Ke))
        blocks.append(row)
        Fe = np.einsum("eq,eq,qa->ea", geom.wdet, b[..., s], geom.N)
        F[s] = geom.scatter_scalar(Fe) - geom.scatter_matrix4(lap) @ fields_n.kappa[s]
    K = sp.bmat(blocks, format="csr")
    return PlasticSystem(K, F.ravel(), dirs, n_g, n, ny)


def assemble_plastic_surface(mesh: Mesh, geom: Geometry, fields: FieldSolution, fields_n: FieldSolution,
                             spec: C.MaterialSpec, s: int):
    """Residual, tangent and lower bounds of surface ``s`` with the other
    surfaces' increments taken from ``fields``."""
    system = assemble_plastic(mesh, geom, fields, fields_n, spec)
    dk = (fields.kappa - fields_n.kappa).ravel()
    n = mesh.n_nodes
    res = system.residual(dk)[s * n:(s + 1) * n]
    return res, system.block(s, s), np.zeros(n)


def apply_plastic_increment(fields: FieldSolution, fields_n: FieldSolution, geom: Geometry,
                            system: PlasticSystem, dk: np.ndarray, spec: C.MaterialSpec):
    """Flow rule at the quadrature points from interpolated nodal increments."""
    dk = dk.reshape(spec.ny, -1)
    c = spec.flow_factor
    dk_q = geom.at_qp(dk.T)  # (E, 4, ny)
    fields.kappa = fields_n.kappa + dk
    fields.eps_p = fields_n.eps_p + c * system.directions * dk_q[..., None]
    fields.eps_r = fields_n.eps_r + c * spec.beta * system.ratchet_direction * np.sum(dk_q, axis=-1)[..., None]


def assemble_damage(mesh: Mesh, geom: Geometry, fields: FieldSolution, fields_n: FieldSolution,
                    spec: C.MaterialSpec):
    """Damage subproblem as ``(residual, K, (lo, hi))`` with residual ``K alpha - F``.

    With ``g = (1 - alpha)^2`` the incremental energy is quadratic in the
    nodal damage: curvature ``2 B + d w''`` locally plus
    ``d eta_d^2 grad . grad``, where ``B`` is the (non-negative) damage
    driving energy and ``d = d(gamma_n)`` is lagged.
    """
    state = point_state(fields, geom, spec)
    B = np.maximum(C.damage_driving_energy(state, spec), 0.0)
    d = C.fatigue_degradation(fields_n.gamma, spec)
    if spec.damage_model == "AT2":
        w1, w2 = 0.0, 2.0 * spec.w0
    else:
        w1, w2 = spec.w0, 0.0
    Ke = np.einsum("eq,eqab->eab", 2.0 * B + d * w2, geom.mass_e)
    Ke += spec.eta_d**2 * np.einsum("eq,eqab->eab", d, geom.lap_e)
    K = geom.scatter_matrix4(Ke)
    F = geom.scatter_scalar(np.einsum("eq,eq,qa->ea", geom.wdet, 2.0 * B - d * w1, geom.N))
    residual = K @ fields.alpha - F
    return residual, K, (fields_n.alpha.copy(), np.ones(mesh.n_nodes))
