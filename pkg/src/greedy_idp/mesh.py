"""Graph discretizations: lumped masses, stencils and ``c_ij`` coefficients.

A :class:`GraphMesh` stores the off-diagonal couplings once per undirected
edge ``(i, j)`` with ``i < j``, keeping both ``c_ij`` and ``c_ji`` because
they are only opposite for pairs that are not both on the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MeshError",
    "GraphMesh",
    "build_1d_uniform",
    "build_2d_p1",
    "structured_triangulation",
    "periodic_dof_map",
    "read_triangle_mesh",
    "write_triangle_mesh",
    "unit_normal",
]

# |c_ij| below this (relative to the largest coefficient) is treated as zero
ZERO_COEFF_RTOL = 1e-13


class MeshError(ValueError):
    """Invalid mesh input or configuration."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GraphMesh:
    coords: np.ndarray  # (N, d)
    lumped_mass: np.ndarray  # (N,)
    edges: np.ndarray  # (E, 2), i < j
    c_ij: np.ndarray  # (E, d)
    c_ji: np.ndarray  # (E, d)
    c_diag: np.ndarray  # (N, d)
    pinned: np.ndarray  # (N,) bool
    dropped_edges: int = 0
    _csr: tuple = field(default=None, repr=False, compare=False)
    _norms: tuple = field(default=None, repr=False, compare=False)
    _normals: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("coords", "lumped_mass", "edges", "c_ij", "c_ji", "c_diag", "pinned"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        # stencil in CSR form: for every dof, the neighbours j != i
        n = self.n_dofs
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        order = np.lexsort((cols, rows))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        object.__setattr__(self, "_csr", (np.cumsum(indptr), cols[order]))
        norms = (_freeze(np.linalg.norm(self.c_ij, axis=1)), _freeze(np.linalg.norm(self.c_ji, axis=1)))
        object.__setattr__(self, "_norms", norms)
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = (_freeze(self.c_ij / norms[0][:, None]), _freeze(self.c_ji / norms[1][:, None]))
        object.__setattr__(self, "_normals", normals)

    @property
    def n_dofs(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return ~self.pinned

    def stencil(self, i: int) -> list[int]:
        """Ordered stencil I(i), including ``i`` itself."""
        indptr, cols = self._csr
        return sorted([int(i), *cols[indptr[i]:indptr[i + 1]].tolist()])

    def c(self, i: int, j: int) -> np.ndarray:
        """The coefficient vector ``c_ij`` for ``j`` in I(i)."""
        if i == j:
            return self.c_diag[i].copy()
        lo, hi = (i, j) if i < j else (j, i)
        hit = np.flatnonzero((self.edges[:, 0] == lo) & (self.edges[:, 1] == hi))
        if hit.size == 0:
            raise KeyError(f"{j} is not in the stencil of {i}")
        return (self.c_ij if i < j else self.c_ji)[hit[0]].copy()

    def edge_norms(self) -> tuple[np.ndarray, np.ndarray]:
        """``|c_ij|`` and ``|c_ji|`` per undirected edge."""
        return self._norms

    def edge_normals(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors ``n_ij`` and ``n_ji`` per undirected edge."""
        return self._normals

    def stencil_min_max(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-dof min and max of ``values`` over I(i) (component-wise)."""
        lo = np.array(values, dtype=float, copy=True)
        hi = lo.copy()
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.minimum.at(lo, i, values[j])
        np.minimum.at(lo, j, values[i])
        np.maximum.at(hi, i, values[j])
        np.maximum.at(hi, j, values[i])
        return lo, hi

    def validate(self, atol_antisym: float = 1e-14, atol_rowsum: float = 1e-13) -> list[str]:
        """Return a list of violated invariants (empty when the mesh is sound)."""
        problems = []
        if np.any(self.lumped_mass <= 0):
            bad = np.flatnonzero(self.lumped_mass <= 0)
            problems.append(f"non-positive lumped mass at dofs {bad[:10].tolist()}")
        both_pinned = self.pinned[self.edges[:, 0]] & self.pinned[self.edges[:, 1]]
        asym = np.abs(self.c_ij + self.c_ji).max(axis=1) if self.n_edges else np.zeros(0)
        bad = np.flatnonzero((asym > atol_antisym) & ~both_pinned)
        if bad.size:
            problems.append(
                f"c_ij != -c_ji on {bad.size} edges (max {asym[bad].max():.3e}), "
                f"first {self.edges[bad[0]].tolist()}"
            )
        rowsum = self.c_diag.copy()
        np.add.at(rowsum, self.edges[:, 0], self.c_ij)
        np.add.at(rowsum, self.edges[:, 1], self.c_ji)
        worst = np.abs(rowsum).max(axis=1)
        bad = np.flatnonzero(worst > atol_rowsum)
        if bad.size:
            problems.append(
                f"row sum of c_ij nonzero at {bad.size} dofs (max {worst.max():.3e})"
            )
        return problems

    def report(self) -> str:
        problems = self.validate()
        lines = [
            f"dofs: {self.n_dofs}",
            f"dimension: {self.dim}",
            f"undirected edges: {self.n_edges}",
            f"pinned dofs: {int(self.pinned.sum())}",
            f"dropped zero-length edges: {self.dropped_edges}",
            f"total mass: {self.lumped_mass.sum():.15g}",
            f"min lumped mass: {self.lumped_mass.min():.6e}",
        ]
        lines.append("status: OK" if not problems else "status: INVALID")
        lines.extend(f"  - {p}" for p in problems)
        return "\n".join(lines)


def _assemble(coords, rows, cols, cvals, mass, pinned) -> GraphMesh:
    """Sum element contributions c[rows, cols] into a GraphMesh."""
    n, d = coords.shape
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    cvals = np.asarray(cvals, dtype=float).reshape(len(rows), d)

    diag = np.zeros((n, d))
    on_diag = rows == cols
    np.add.at(diag, rows[on_diag], cvals[on_diag])

    rows, cols, cvals = rows[~on_diag], cols[~on_diag], cvals[~on_diag]
    key = rows * n + cols
    uniq, inverse = np.unique(key, return_inverse=True)
    summed = np.zeros((uniq.size, d))
    np.add.at(summed, inverse, cvals)
    r, c = uniq // n, uniq % n

    # pair directed entries (i, j) and (j, i) into undirected edges
    reverse = c * n + r
    pos = np.minimum(np.searchsorted(uniq, reverse), uniq.size - 1)
    has_twin = uniq[pos] == reverse if uniq.size else np.zeros(0, dtype=bool)
    if not has_twin.all():
        raise MeshError("stencil is not symmetric: j in I(i) but i not in I(j)")
    lower = np.flatnonzero(r < c)
    i, j = r[lower], c[lower]
    cij = summed[lower]
    cji = summed[pos[lower]]

    scale = max(np.abs(summed).max(initial=0.0), np.abs(diag).max(initial=0.0), 1e-300)
    keep = (np.linalg.norm(cij, axis=1) > ZERO_COEFF_RTOL * scale) & (
        np.linalg.norm(cji, axis=1) > ZERO_COEFF_RTOL * scale
    )
    edges = np.stack([i[keep], j[keep]], axis=1) if keep.any() else np.zeros((0, 2), dtype=np.int64)
    return GraphMesh(
        coords=np.asarray(coords, dtype=float),
        lumped_mass=np.asarray(mass, dtype=float),
        edges=edges.astype(np.int64),
        c_ij=cij[keep],
        c_ji=cji[keep],
        c_diag=diag,
        pinned=np.asarray(pinned, dtype=bool),
        dropped_edges=int((~keep).sum()),
    )


def build_1d_uniform(n_cells: int, domain=(0.0, 1.0), bc: str = "pinned") -> GraphMesh:
    """Mass-lumped P1 discretization of a uniform 1D grid.

    ``bc`` is ``"periodic"`` (``n_cells`` dofs, indices wrap) or ``"pinned"``
    (``n_cells + 1`` dofs, both end dofs pinned).
    """
    a, b = float(domain[0]), float(domain[1])
    if not np.isfinite(a) or not np.isfinite(b) or b <= a:
        raise MeshError(f"degenerate interval ({a}, {b})")
    if int(n_cells) < 2:
        raise MeshError("need at least two cells")
    n_cells = int(n_cells)
    h = (b - a) / n_cells
    if bc == "periodic":
        n = n_cells
        coords = a + h * np.arange(n)
        left = np.arange(n_cells)
        right = (left + 1) % n
    elif bc in ("pinned", "pinned-ends"):
        n = n_cells + 1
        coords = np.linspace(a, b, n)
        left = np.arange(n_cells)
        right = left + 1
    else:
        raise MeshError(f"unknown boundary condition {bc!r}")

    # on [x_l, x_r]: int phi_a phi_b' = +-1/2
    rows = np.concatenate([left, left, right, right])
    cols = np.concatenate([left, right, left, right])
    vals = np.concatenate([
        np.full(n_cells, -0.5), np.full(n_cells, 0.5),
        np.full(n_cells, -0.5), np.full(n_cells, 0.5),
    ])
    mass = np.zeros(n)
    np.add.at(mass, left, h / 2)
    np.add.at(mass, right, h / 2)
    pinned = np.zeros(n, dtype=bool)
    if bc != "periodic":
        pinned[[0, -1]] = True
    return _assemble(coords[:, None], rows, cols, vals, mass, pinned)


def build_2d_p1(vertices, triangles, dof_map=None) -> GraphMesh:
    """Mass-lumped P1 assembly on a triangulation.

    ``c_ij = int phi_i grad phi_j`` and ``m_i = int phi_i``, computed exactly
    per triangle. ``dof_map`` (one entry per vertex) merges vertices into
    shared dofs, e.g. the two sides of a periodic box; geometry always uses
    the vertex positions. Boundary dofs (sides owned by a single triangle
    after merging) are pinned.
    """
    xy = np.asarray(vertices, dtype=float)
    tri = np.asarray(triangles, dtype=np.int64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise MeshError("vertices must be an (nv, 2) array")
    if tri.ndim != 2 or tri.shape[1] != 3:
        raise MeshError("triangles must be an (nt, 3) array")
    if tri.size and (tri.min() < 0 or tri.max() >= len(xy)):
        raise MeshError("triangle index out of range")

    p0, p1, p2 = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    ref = np.abs(det).max(initial=0.0)
    degenerate = np.abs(det) <= 1e-14 * max(ref, 1e-300)
    if degenerate.any():
        k = int(np.flatnonzero(degenerate)[0])
        raise MeshError(f"triangle {k} {tri[k].tolist()} has zero area")
    area = 0.5 * np.abs(det)

    grads = np.empty((len(tri), 3, 2))
    grads[:, 0] = np.stack([p1[:, 1] - p2[:, 1], p2[:, 0] - p1[:, 0]], axis=1) / det[:, None]
    grads[:, 1] = np.stack([p2[:, 1] - p0[:, 1], p0[:, 0] - p2[:, 0]], axis=1) / det[:, None]
    grads[:, 2] = np.stack([p0[:, 1] - p1[:, 1], p1[:, 0] - p0[:, 0]], axis=1) / det[:, None]

    coords = xy
    if dof_map is not None:
        dof_map = np.asarray(dof_map, dtype=np.int64)
        if dof_map.shape != (len(xy),):
            raise MeshError("dof_map needs one entry per vertex")
        n_dofs = int(dof_map.max()) + 1
        if np.unique(dof_map).size != n_dofs:
            raise MeshError("dof_map must cover 0 .. n_dofs-1")
        first = np.full(n_dofs, len(xy))
        np.minimum.at(first, dof_map, np.arange(len(xy)))
        coords = xy[first]
        tri = dof_map[tri]
        if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
            raise MeshError("dof_map merges two vertices of one triangle")

    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            rows.append(tri[:, a])
            cols.append(tri[:, b])
            vals.append(area[:, None] / 3.0 * grads[:, b])
    mass = np.zeros(len(coords))
    for a in range(3):
        np.add.at(mass, tri[:, a], area / 3.0)

    sides = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(sides, axis=0, return_counts=True)
    pinned = np.zeros(len(coords), dtype=bool)
    pinned[uniq[counts == 1].ravel()] = True
    return _assemble(coords, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), mass, pinned)


def periodic_dof_map(nx: int, ny: int) -> np.ndarray:
    """Merge opposite sides of a ``structured_triangulation`` grid (a torus)."""
    if nx < 4 or ny < 4:
        raise MeshError("periodic grids need at least 4 vertices per direction")
    r, c = np.divmod(np.arange(nx * ny), nx)
    return (r % (ny - 1)) * (nx - 1) + c % (nx - 1)


def structured_triangulation(nx: int, ny: int, xlim=(0.0, 1.0), ylim=(0.0, 1.0),
                             jitter: float = 0.0, seed: int = 0):
    """Vertices and triangles of a rectangle split into ``2 (nx-1)(ny-1)`` triangles.

    Interior vertices are displaced by up to ``jitter`` times the local
    spacing in each direction (fixed seed); boundary vertices stay put.
    """
    if nx < 2 or ny < 2:
        raise MeshError("need at least 2 vertices per direction")
    if not 0 <= jitter < 0.5:
        raise MeshError("jitter must lie in [0, 0.5)")
    x = np.linspace(*xlim, nx)
    y = np.linspace(*ylim, ny)
    X, Y = np.meshgrid(x, y, indexing="xy")
    xy = np.stack([X.ravel(), Y.ravel()], axis=1)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        hx, hy = x[1] - x[0], y[1] - y[0]
        inner = np.ones((ny, nx), dtype=bool)
        inner[[0, -1], :] = False
        inner[:, [0, -1]] = False
        inner = inner.ravel()
        shift = rng.uniform(-jitter, jitter, size=(inner.sum(), 2)) * [hx, hy]
        xy[inner] += shift
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tri = np.concatenate([np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)])
    return xy, tri


def read_triangle_mesh(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``nv nt`` / ``x y`` lines / ``i j k`` lines (0-based)."""
    tokens = Path(path).read_text().split()
    try:
        nv, nt = int(tokens[0]), int(tokens[1])
        body = tokens[2:]
        if len(body) != 2 * nv + 3 * nt:
            raise MeshError(
                f"expected {2 * nv + 3 * nt} numbers after the header, found {len(body)}"
            )
        xy = np.array(body[: 2 * nv], dtype=float).reshape(nv, 2)
        tri = np.array(body[2 * nv:], dtype=np.int64).reshape(nt, 3)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    return xy, tri


def write_triangle_mesh(path, vertices, triangles) -> None:
    xy = np.asarray(vertices, dtype=float)
    tri = np.asarray(triangles, dtype=np.int64)
    lines = [f"{len(xy)} {len(tri)}"]
    lines += [f"{x!r} {y!r}" for x, y in xy.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in tri.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def unit_normal(mesh: GraphMesh, i: int, j: int) -> np.ndarray | None:
    """``n_ij = c_ij / |c_ij|``; ``None`` if the pair carries no coefficient."""
    try:
        c = mesh.c(i, j)
    except KeyError:
        return None
    norm = np.linalg.norm(c)
    if norm == 0.0:
        return None
    return c / norm
