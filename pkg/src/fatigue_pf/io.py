"""Run configuration, mesh files, built-in meshes, VTK snapshots and traces."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np
import tomli
import tomli_w

from . import constitutive as C
from . import tensor as T
from .errors import InputError
from .fem import FieldSolution, Geometry, Mesh
from .loading import LoadSchedule
from .matpoint import PointConfig
from .solver import SolverConfig

# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class MeshSource:
    """Either a mesh file or one of the built-in generators with parameters."""

    path: str | None = None
    generator: str | None = None
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("mesh needs exactly one of 'path' or 'generator'")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {sorted(GENERATORS)}, got {self.generator!r}")

    def load(self, base_dir: str = ".") -> Mesh:
        if self.path is not None:
            path = self.path if os.path.isabs(self.path) else os.path.join(base_dir, self.path)
            return read_mesh(path)
        params = {k: int(v) if k in _INT_PARAMS else v for k, v in self.params}
        try:
            return GENERATORS[self.generator](**params)
        except ValueError as exc:
            raise InputError(f"mesh generator {self.generator}: {exc}", key="params") from exc


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    snapshot_every: int = 0

    def __post_init__(self):
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be non-negative")


@dataclass
class RunConfig:
    material: C.MaterialSpec
    schedule: LoadSchedule
    mesh: MeshSource | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    point: PointConfig = field(default_factory=PointConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_MATERIAL_KEYS = {
    "E", "nu", "K", "mu", "n_y", "sigma_p", "H_kin", "H_iso", "w0", "damage_model", "beta", "eta_p",
    "eta_d", "gamma0", "k", "split", "uniaxial", "ratchet_correction",
}
_SCHEDULE_KEYS = {"control", "min", "max", "cycles", "steps_per_cycle", "first", "values", "target", "direction", "fixed"}
_SECTIONS = {
    "material": _MATERIAL_KEYS,
    "schedule": _SCHEDULE_KEYS,
    "mesh": {"path", "generator", "params"},
    "solver": {f.name for f in dataclasses.fields(SolverConfig)},
    "point": {f.name for f in dataclasses.fields(PointConfig)},
    "output": {"dir", "snapshot_every"},
}
_STRINGS = {"damage_model", "split", "control", "first", "target", "direction", "linear_solver", "acceleration", "plastic_coupling", "path", "generator", "dir"}
_BOOLS = {"uniaxial", "ratchet_correction", "strict_balance"}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    lines = text.splitlines()
    header = re.compile(r"^\s*\[\s*" + re.escape(section) + r"(\.[^\]]*)?\s*\]")
    in_sec = False
    for i, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_sec = bool(header.match(line))
            if in_sec and key is None:
                return i
            continue
        if in_sec and key is not None and re.match(r"^\s*" + re.escape(key) + r"\s*=", line):
            return i
    return None


def _fail(text, msg, section, key=None):
    raise InputError(msg, line=_line_of(text, section, key), key=key or section)


def _number(text, section, key, v, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(text, f"[{section}] {key} must be a number, got {v!r}", section, key)
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            _fail(text, f"[{section}] {key} must be an integer, got {v!r}", section, key)
        return int(v)
    return float(v)


def _check_types(text, section, table):
    for key, v in table.items():
        if key in _STRINGS and not isinstance(v, str):
            _fail(text, f"[{section}] {key} must be a string, got {v!r}", section, key)
        if key in _BOOLS and not isinstance(v, bool):
            _fail(text, f"[{section}] {key} must be true or false, got {v!r}", section, key)


def _per_surface(text, key, v, ny):
    """Expand a per-surface entry: scalar, list of n_y values, or {first, last}."""
    if isinstance(v, dict):
        extra = set(v) - {"first", "last"}
        if extra or "first" not in v:
            _fail(text, f"[material] {key} table needs 'first' (and optionally 'last')", "material", key)
        first = _number(text, "material", key, v["first"])
        last = _number(text, "material", key, v.get("last", v["first"]))
        return first, last
    if isinstance(v, list):
        vals = [_number(text, "material", key, x) for x in v]
        if len(vals) != ny:
            _fail(text, f"[material] {key} lists {len(vals)} values for n_y = {ny}", "material", key)
        return vals
    x = _number(text, "material", key, v)
    return x, x


def _surfaces(text, m) -> tuple[C.SurfaceParams, ...]:
    lists = [len(m[k]) for k in ("sigma_p", "H_kin", "H_iso") if isinstance(m.get(k), list)]
    ny = _number(text, "material", "n_y", m["n_y"], int) if "n_y" in m else (lists[0] if lists else 1)
    if ny < 1:
        _fail(text, "[material] n_y must be at least 1", "material", "n_y")
    vals = {k: _per_surface(text, k, m.get(k, 0.0), ny) for k in ("sigma_p", "H_kin", "H_iso")}
    cols = {k: v if isinstance(v, list) else C.linear_ramp(v[0], v[1], ny) for k, v in vals.items()}
    try:
        return tuple(C.SurfaceParams(a, b, c) for a, b, c in zip(cols["sigma_p"], cols["H_kin"], cols["H_iso"]))
    except ValueError as exc:
        key = "sigma_p" if "sigma_p" in str(exc) else "H_kin"
        _fail(text, f"[material] {exc}", "material", key)


def _elastic(text, m):
    has = {k for k in ("E", "nu", "K", "mu") if k in m}
    num = {k: _number(text, "material", k, m[k]) for k in has}
    uniaxial = m.get("uniaxial", False)
    if has == {"K", "mu"}:
        return num["K"], num["mu"]
    if has == {"E", "nu"} or (has == {"E"} and uniaxial):
        E, nu = num["E"], num.get("nu", 0.0)
    elif has == {"K", "nu"}:
        K, nu = num["K"], num["nu"]
        return K, 3.0 * K * (1.0 - 2.0 * nu) / (2.0 * (1.0 + nu))
    else:
        _fail(text, "[material] give elastic constants as (E, nu), (K, nu) or (K, mu)", "material",
              sorted(has)[0] if has else None)
    if not -1.0 < nu < 0.5:
        _fail(text, f"[material] nu must lie in (-1, 0.5), got {nu}", "material", "nu")
    return E / (3.0 * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))


def _material(text, m) -> C.MaterialSpec:
    for key in ("sigma_p", "w0"):
        if key not in m:
            _fail(text, f"[material] missing mandatory key {key!r}", "material", None)
    K, mu = _elastic(text, m)
    surfaces = _surfaces(text, m)
    g0 = m.get("gamma0", "inf")
    if isinstance(g0, str):
        if g0.strip().lower() not in ("inf", "infinite", "infinity"):
            _fail(text, f"[material] gamma0 must be a number or \"inf\", got {g0!r}", "material", "gamma0")
        g0 = math.inf
    else:
        g0 = _number(text, "material", "gamma0", g0)
    kw = dict(
        K=K, mu=mu, surfaces=surfaces, w0=_number(text, "material", "w0", m["w0"]), gamma0=g0,
        damage_model=m.get("damage_model", "AT1"), split=m.get("split", "voldev"),
        uniaxial=m.get("uniaxial", False), ratchet_correction=m.get("ratchet_correction", True),
    )
    for key in ("beta", "eta_p", "eta_d", "k"):
        if key in m:
            kw[key] = _number(text, "material", key, m[key])
    try:
        return C.MaterialSpec(**kw)
    except ValueError as exc:
        _fail(text, f"[material] {exc}", "material", _guess_key(str(exc), m))


def _guess_key(msg, table):
    for key in sorted(table, key=len, reverse=True):
        if re.search(r"\b" + re.escape(key) + r"\b", msg):
            return key
    return None


def _schedule(text, s) -> LoadSchedule:
    if "control" not in s:
        _fail(text, "[schedule] missing mandatory key 'control'", "schedule", None)
    kw = {"control": s["control"]}
    if "values" in s:
        if not isinstance(s["values"], list):
            _fail(text, "[schedule] values must be a list of numbers", "schedule", "values")
        kw["values"] = tuple(_number(text, "schedule", "values", v) for v in s["values"])
    else:
        for key in ("min", "max", "cycles"):
            if key not in s:
                _fail(text, f"[schedule] missing mandatory key {key!r}", "schedule", None)
    for key, name, kind in (("min", "vmin", float), ("max", "vmax", float), ("cycles", "cycles", int),
                            ("steps_per_cycle", "steps_per_cycle", int)):
        if key in s:
            kw[name] = _number(text, "schedule", key, s[key], kind)
    for key in ("first", "target", "direction"):
        if key in s:
            kw[key] = s[key]
    if "fixed" in s:
        fixed = s["fixed"]
        if not isinstance(fixed, dict):
            _fail(text, "[schedule] fixed must be a table of set = [components]", "schedule", "fixed")
        out = {}
        for name, comps in fixed.items():
            comps = [comps] if isinstance(comps, str) else comps
            if not isinstance(comps, list) or not comps or any(c not in ("x", "y") for c in comps):
                _fail(text, f"[schedule] fixed.{name} must list components from 'x', 'y'", "schedule.fixed", name)
            out[name] = tuple(comps)
        kw["fixed"] = out
    try:
        return LoadSchedule(**kw)
    except ValueError as exc:
        alias = {"vmin": "min", "vmax": "max", "min": "min"}
        key = _guess_key(str(exc), s) or alias.get((_guess_key(str(exc), {"vmin": 0, "vmax": 0}) or ""), None)
        _fail(text, f"[schedule] {exc}", "schedule", key)


def _simple(text, section, table, cls):
    kw = {}
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    for key, v in table.items():
        t = str(types[key])
        if key in _STRINGS or key in _BOOLS:
            kw[key] = v
        elif "int" in t:
            kw[key] = _number(text, section, key, v, int)
        else:
            kw[key] = _number(text, section, key, v)
    try:
        return cls(**kw)
    except ValueError as exc:
        _fail(text, f"[{section}] {exc}", section, _guess_key(str(exc), table))


def _mesh_source(text, m) -> MeshSource:
    params = m.get("params", {})
    if not isinstance(params, dict):
        _fail(text, "[mesh] params must be a table", "mesh", "params")
    gen = m.get("generator")
    if gen is not None and gen in GENERATORS:
        allowed = GENERATOR_PARAMS[gen]
        for key in params:
            if key not in allowed:
                _fail(text, f"[mesh.params] unknown key {key!r} for generator {gen!r}", "mesh.params", key)
    items = tuple(sorted((k, _number(text, "mesh.params", k, v)) for k, v in params.items()))
    try:
        return MeshSource(path=m.get("path"), generator=gen, params=items)
    except ValueError as exc:
        _fail(text, f"[mesh] {exc}", "mesh", "generator" if gen is not None else None)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration; unknown keys are errors."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise InputError(f"syntax error: {exc.msg}", line=exc.lineno) from exc
    for section, table in data.items():
        if section not in _SECTIONS:
            raise InputError(f"unknown section [{section}]", line=_line_of(text, section), key=section)
        if not isinstance(table, dict):
            raise InputError(f"{section} must be a section", line=None, key=section)
        for key in table:
            if key not in _SECTIONS[section]:
                _fail(text, f"[{section}] unknown key {key!r}", section, key)
        _check_types(text, section, table)
    for section in ("material", "schedule"):
        if section not in data:
            raise InputError(f"missing mandatory section [{section}]", key=section)
    return RunConfig(
        material=_material(text, data["material"]),
        schedule=_schedule(text, data["schedule"]),
        mesh=_mesh_source(text, data["mesh"]) if "mesh" in data else None,
        solver=_simple(text, "solver", data.get("solver", {}), SolverConfig),
        point=_simple(text, "point", data.get("point", {}), PointConfig),
        output=_simple(text, "output", data.get("output", {}), OutputConfig),
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical form: explicit per-surface lists, K and mu, every field set."""
    m = cfg.material
    material = {
        "K": m.K, "mu": m.mu, "n_y": m.ny,
        "sigma_p": [s.sigma_p for s in m.surfaces], "H_kin": [s.H_kin for s in m.surfaces],
        "H_iso": [s.H_iso for s in m.surfaces], "w0": m.w0, "damage_model": m.damage_model,
        "beta": m.beta, "eta_p": m.eta_p, "eta_d": m.eta_d,
        "gamma0": "inf" if math.isinf(m.gamma0) else m.gamma0, "k": m.k, "split": m.split,
        "uniaxial": m.uniaxial, "ratchet_correction": m.ratchet_correction,
    }
    s = cfg.schedule
    schedule = {"control": s.control, "target": s.target, "direction": s.direction}
    if s.values is not None:
        schedule["values"] = list(s.values)
    else:
        schedule.update({"min": s.vmin, "max": s.vmax, "cycles": s.cycles,
                         "steps_per_cycle": s.steps_per_cycle, "first": s.first})
    if s.fixed:
        schedule["fixed"] = {k: list(v) for k, v in s.fixed.items()}
    out = {"material": material, "schedule": schedule}
    if cfg.mesh is not None:
        mesh = {"path": cfg.mesh.path} if cfg.mesh.path is not None else {"generator": cfg.mesh.generator}
        if cfg.mesh.params:
            mesh["params"] = dict(cfg.mesh.params)
        out["mesh"] = mesh
    out["solver"] = dataclasses.asdict(cfg.solver)
    out["point"] = dataclasses.asdict(cfg.point)
    out["output"] = dataclasses.asdict(cfg.output)
    return out


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


# ---------------------------------------------------------------- meshes


def read_mesh(path: str) -> Mesh:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read mesh {path}: {exc.strerror}") from exc
    return parse_mesh(text)


def parse_mesh(text: str) -> Mesh:
    """Parse the ``$nodes`` / ``$elements`` / ``$nodeset`` / ``$edgeset`` grammar."""
    nodes, node_ids, node_line = [], [], {}
    elems, elem_ids, elem_lines = [], [], []
    node_sets, edge_sets, set_lines = {}, {}, {}
    section = name = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0].startswith("$"):
            head = tok[0]
            if head == "$end":
                if section is None:
                    raise InputError("'$end' without an open section", line=lineno)
                section = name = None
                continue
            if section is not None:
                raise InputError(f"section {section} not closed before {head}", line=lineno)
            if head in ("$nodes", "$elements") and len(tok) == 1:
                section = head
            elif head in ("$nodeset", "$edgeset") and len(tok) == 2:
                section, name = head, tok[1]
                target = node_sets if head == "$nodeset" else edge_sets
                if name in target:
                    raise InputError(f"duplicate {head[1:]} {name!r}", line=lineno)
                target[name] = []
                set_lines[(head, name)] = []
            else:
                raise InputError(f"malformed section header {line!r}", line=lineno)
            continue
        if section is None:
            raise InputError(f"data outside a section: {line!r}", line=lineno)
        try:
            if section == "$nodes":
                if len(tok) != 3:
                    raise ValueError
                nid = int(tok[0])
                if nid in node_line:
                    raise InputError(f"duplicate node id {nid}", line=lineno)
                node_line[nid] = lineno
                node_ids.append(nid)
                nodes.append((float(tok[1]), float(tok[2])))
            elif section == "$elements":
                if len(tok) != 5:
                    raise ValueError
                elem_ids.append(int(tok[0]))
                elems.append([int(t) for t in tok[1:]])
                elem_lines.append(lineno)
            elif section == "$nodeset":
                if len(tok) != 1:
                    raise ValueError
                node_sets[name].append(int(tok[0]))
                set_lines[(section, name)].append(lineno)
            else:
                if len(tok) != 2:
                    raise ValueError
                edge_sets[name].append([int(tok[0]), int(tok[1])])
                set_lines[(section, name)].append(lineno)
        except ValueError:
            raise InputError(f"malformed {section[1:]} entry {line!r}", line=lineno) from None
    if section is not None:
        raise InputError(f"section {section} not terminated by $end")
    if not nodes or not elems:
        raise InputError("mesh needs a $nodes and an $elements section")
    if len(set(elem_ids)) != len(elem_ids):
        raise InputError("duplicate element id")

    index = {nid: i for i, nid in enumerate(node_ids)}

    def lookup(nid, lineno):
        if nid not in index:
            raise InputError(f"reference to undefined node {nid}", line=lineno)
        return index[nid]

    conn = [[lookup(n, ln) for n in e] for e, ln in zip(elems, elem_lines)]
    nsets = {k: [lookup(n, ln) for n, ln in zip(v, set_lines[("$nodeset", k)])] for k, v in node_sets.items()}
    esets = {k: [[lookup(a, ln), lookup(b, ln)] for (a, b), ln in zip(v, set_lines[("$edgeset", k)])]
             for k, v in edge_sets.items()}
    return Mesh(np.array(nodes), np.array(conn), nsets, esets, np.array(node_ids), np.array(elem_ids))


def format_mesh(mesh: Mesh) -> str:
    out = ["$nodes"]
    out += [f"{nid} {x!r} {y!r}" for nid, (x, y) in zip(mesh.node_ids, mesh.nodes.tolist())]
    out += ["$end", "$elements"]
    ids = mesh.node_ids
    out += [f"{eid} " + " ".join(str(ids[n]) for n in e) for eid, e in zip(mesh.element_ids, mesh.elements)]
    out.append("$end")
    for name, nodes in mesh.node_sets.items():
        out += [f"$nodeset {name}"] + [str(ids[n]) for n in nodes] + ["$end"]
    for name, edges in mesh.edge_sets.items():
        out += [f"$edgeset {name}"] + [f"{ids[a]} {ids[b]}" for a, b in edges] + ["$end"]
    return "\n".join(out) + "\n"


def write_mesh(mesh: Mesh, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mesh(mesh))


def _divisions(length: float, h: float) -> int:
    return max(1, int(math.ceil(length / h - 1e-9)))


def _edges_along(ids: np.ndarray) -> np.ndarray:
    return np.stack([ids[:-1], ids[1:]], axis=1)


def rect_hole(width: float = 10.0, height: float = 10.0, radius: float = 2.0, h: float = 0.5,
              grading: float = 1.0) -> Mesh:
    """Quarter of a plate with a central hole; the hole centre is the origin.

    The region between the arc and the outer edges (right, then top) is
    mapped transfinitely, with radial spacing ``(j / n)**grading``.
    """
    if not 0.0 < radius < min(width, height):
        raise ValueError("radius must be positive and smaller than the plate")
    n_a, n_b = _divisions(height, h), _divisions(width, h)
    n_t = n_a + n_b
    n_r = _divisions(min(width, height) - radius, h)
    outer = np.concatenate([
        np.stack([np.full(n_a, width), np.linspace(0.0, height, n_a + 1)[:-1]], axis=1),
        np.stack([np.linspace(width, 0.0, n_b + 1), np.full(n_b + 1, height)], axis=1),
    ])
    corner = math.atan2(height, width)
    theta = np.concatenate([np.linspace(0.0, corner, n_a + 1)[:-1], np.linspace(corner, 0.5 * math.pi, n_b + 1)])
    arc = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    s = (np.arange(n_r + 1) / n_r) ** grading
    pts = (1.0 - s)[:, None, None] * arc[None] + s[:, None, None] * outer[None]  # (j, i, 2)
    pts[:, 0, 1] = 0.0
    pts[:, -1, 0] = 0.0
    nid = np.arange((n_r + 1) * (n_t + 1)).reshape(n_r + 1, n_t + 1)
    # counterclockwise in (x, y): i runs counterclockwise around the hole, j outward
    a = nid[:-1, :-1]
    b = nid[1:, :-1]
    c = nid[1:, 1:]
    d = nid[:-1, 1:]
    conn = np.stack([a, b, c, d], axis=-1).reshape(-1, 4)
    nodes = pts.reshape(-1, 2)
    right = nid[-1, :n_a + 1]
    top = nid[-1, n_a:][::-1]
    return Mesh(
        nodes, conn,
        node_sets={"top": top, "bottom": nid[:, 0], "left": nid[:, -1], "right": right, "hole": nid[0]},
        edge_sets={"top": _edges_along(top), "right": _edges_along(right), "bottom": _edges_along(nid[:, 0]),
                   "left": _edges_along(nid[:, -1])},
    )


def _axis(breaks, sizes):
    xs = [breaks[0]]
    for lo, hi, size in zip(breaks[:-1], breaks[1:], sizes):
        n = _divisions(hi - lo, size)
        xs.extend(np.linspace(lo, hi, n + 1)[1:].tolist())
    return np.array(xs)


def double_notch(width: float = 20.0, height: float = 40.0, notch_depth: float = 5.0, notch_width: float = 2.0,
                 offset: float = 8.0, h: float = 1.0, h_far: float | None = None) -> Mesh:
    """Rectangle with two rectangular side notches at different heights.

    The left notch is centred at ``height/2 - offset/2`` and the right one at
    ``height/2 + offset/2``. Elements of size ``h`` cover the band that spans
    both notches (plus one notch depth above and below); ``h_far`` (default
    ``h``) is used outside it.
    """
    h_far = h if h_far is None else h_far
    yl, yr = 0.5 * height - 0.5 * offset, 0.5 * height + 0.5 * offset
    hw = 0.5 * notch_width
    if not (0.0 < notch_depth < 0.5 * width and yl - hw > 0.0 and yr + hw < height):
        raise ValueError("notches do not fit in the specimen")
    band_lo = max(0.0, min(yl, yr) - hw - notch_depth)
    band_hi = min(height, max(yl, yr) + hw + notch_depth)
    ybreaks = sorted({0.0, band_lo, yl - hw, yl + hw, yr - hw, yr + hw, band_hi, height})
    ysizes = [h if band_lo <= 0.5 * (a + b) <= band_hi else h_far for a, b in zip(ybreaks[:-1], ybreaks[1:])]
    xs = _axis([0.0, notch_depth, width - notch_depth, width], [h, h, h])
    ys = _axis(ybreaks, ysizes)
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys)
    nid = np.arange((ny + 1) * (nx + 1)).reshape(ny + 1, nx + 1)
    conn = np.stack([nid[:-1, :-1], nid[:-1, 1:], nid[1:, 1:], nid[1:, :-1]], axis=-1).reshape(-1, 4)
    yc = (0.5 * (ys[:-1] + ys[1:]))[:, None].repeat(nx, axis=1).ravel()
    xc = np.tile(0.5 * (xs[:-1] + xs[1:]), ny)
    tol = 1e-12
    cut = ((xc < notch_depth) & (np.abs(yc - yl) < hw - tol)) | ((xc > width - notch_depth) & (np.abs(yc - yr) < hw - tol))
    conn = conn[~cut]
    used = np.unique(conn)
    remap = -np.ones((ny + 1) * (nx + 1), dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)[used]
    conn = remap[conn]
    top, bottom = remap[nid[-1]], remap[nid[0]]
    left = remap[nid[:, 0]]
    right = remap[nid[:, -1]]
    left, right = left[left >= 0], right[right >= 0]
    px, py = nodes[:, 0], nodes[:, 1]
    on_left = (px <= notch_depth + tol) & (np.abs(py - yl) <= hw + tol)
    on_right = (px >= width - notch_depth - tol) & (np.abs(py - yr) <= hw + tol)
    return Mesh(
        nodes, conn,
        node_sets={"top": top, "bottom": bottom, "left": left, "right": right,
                   "notch": np.flatnonzero(on_left | on_right), "notch_left": np.flatnonzero(on_left),
                   "notch_right": np.flatnonzero(on_right)},
        edge_sets={"top": _edges_along(top), "bottom": _edges_along(bottom)},
    )


def unit_square(n: int = 1, size: float = 1.0) -> Mesh:
    """``n x n`` grid on a square; handy for tests and examples."""
    xs = np.linspace(0.0, size, n + 1)
    X, Y = np.meshgrid(xs, xs)
    nid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    conn = np.stack([nid[:-1, :-1], nid[:-1, 1:], nid[1:, 1:], nid[1:, :-1]], axis=-1).reshape(-1, 4)
    return Mesh(
        np.stack([X.ravel(), Y.ravel()], axis=1), conn,
        node_sets={"top": nid[-1], "bottom": nid[0], "left": nid[:, 0], "right": nid[:, -1]},
        edge_sets={"top": _edges_along(nid[-1]), "bottom": _edges_along(nid[0]),
                   "left": _edges_along(nid[:, 0]), "right": _edges_along(nid[:, -1])},
    )


GENERATORS = {"rect_hole": rect_hole, "double_notch": double_notch, "unit_square": unit_square}
_INT_PARAMS = {"n"}
GENERATOR_PARAMS = {
    "rect_hole": {"width", "height", "radius", "h", "grading"},
    "double_notch": {"width", "height", "notch_depth", "notch_width", "offset", "h", "h_far"},
    "unit_square": {"n", "size"},
}


# ---------------------------------------------------------------- VTK


def snapshot_fields(fields: FieldSolution, mesh: Mesh, spec: C.MaterialSpec, geom: Geometry | None = None) -> dict:
    geom = geom or Geometry(mesh)
    eps_p = np.sum(fields.eps_p, axis=-2) + fields.eps_r
    eq = math.sqrt(2.0 / 3.0) * T.norm(eps_p)
    return {
        "u": fields.u.reshape(-1, 2),
        "alpha": fields.alpha,
        "kappa_eq": np.sum(fields.kappa, axis=0),
        "gamma": geom.project(fields.gamma),
        "eps_p_eq": geom.element_mean(eq),
    }


def write_vtk(fields: FieldSolution, mesh: Mesh, spec: C.MaterialSpec, path: str, geom: Geometry | None = None):
    """Legacy ASCII VTK 3.0 unstructured grid of quads (cell type 9)."""
    data = snapshot_fields(fields, mesh, spec, geom)
    n, ne = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", "fatigue_pf snapshot", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    lines.append(f"CELLS {ne} {5 * ne}")
    lines += ["4 " + " ".join(map(str, e)) for e in mesh.elements.tolist()]
    lines.append(f"CELL_TYPES {ne}")
    lines += ["9"] * ne
    lines += [f"POINT_DATA {n}", "VECTORS u double"]
    lines += [f"{a!r} {b!r} 0.0" for a, b in data["u"].tolist()]
    for name in ("alpha", "kappa_eq", "gamma"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(v) for v in data[name].tolist()]
    lines += [f"CELL_DATA {ne}", "SCALARS eps_p_eq double 1", "LOOKUP_TABLE default"]
    lines += [repr(v) for v in data["eps_p_eq"].tolist()]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path: str) -> dict:
    """Minimal reader for files produced by :func:`write_vtk`."""
    with open(path, encoding="ascii") as fh:
        tok = fh.read().split("\n")
    out = {"point_data": {}, "cell_data": {}}
    i = 4
    n = ne = 0
    where = None
    while i < len(tok):
        line = tok[i].split()
        i += 1
        if not line:
            continue
        key = line[0]
        if key == "POINTS":
            n = int(line[1])
            out["points"] = np.array([list(map(float, tok[i + k].split())) for k in range(n)])
            i += n
        elif key == "CELLS":
            ne = int(line[1])
            out["cells"] = np.array([list(map(int, tok[i + k].split()))[1:] for k in range(ne)])
            i += ne
        elif key == "CELL_TYPES":
            out["cell_types"] = np.array([int(tok[i + k]) for k in range(int(line[1]))])
            i += int(line[1])
        elif key == "POINT_DATA":
            where = "point_data"
        elif key == "CELL_DATA":
            where = "cell_data"
        elif key == "VECTORS":
            out[where][line[1]] = np.array([list(map(float, tok[i + k].split())) for k in range(n)])
            i += n
        elif key == "SCALARS":
            count = n if where == "point_data" else ne
            out[where][line[1]] = np.array([float(tok[i + 1 + k]) for k in range(count)])
            i += count + 1
    return out


# ---------------------------------------------------------------- traces


def read_trace(path: str) -> dict[str, np.ndarray]:
    """Read a numeric CSV trace into columns; malformed or empty files raise."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc.strerror}") from exc
    if len(rows) < 2:
        raise InputError(f"trace {path} has no data rows")
    header = rows[0]
    cols = {h: [] for h in header}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
        for h, v in zip(header, row):
            try:
                cols[h].append(float(v))
            except ValueError:
                raise InputError(f"non-numeric value {v!r} in column {h}", line=lineno, key=h) from None
    return {h: np.array(v) for h, v in cols.items()}
