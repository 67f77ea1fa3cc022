"""Structured triangulations of the unit square with edge connectivity.

Cells are stored counterclockwise.  Edges are stored as vertex pairs with
the lower vertex index first; this global direction fixes the edge tangent
(low -> high) and the edge normal (tangent rotated by -90 degrees), which
is what makes normal-trace degrees of freedom well defined across cells.
"""

import numpy as np

BOUNDARY_SIDES = ("bottom", "right", "top", "left")


class Mesh:
    """Triangle mesh of a planar domain.

    Attributes
    ----------
    vertices : (V, 2) float array
    cells : (T, 3) int array, counterclockwise vertex triples
    edges : (E, 2) int array, lower vertex index first
    cell_edges : (T, 3) int array, edge index of local edge k (opposite
        local vertex k)
    cell_edge_signs : (T, 3) int array, +1 if the global edge direction
        agrees with the cell's counterclockwise traversal
    boundary_edges : (B,) int array of edge indices on the boundary
    boundary_cell : (B,) int array, the unique cell next to each boundary edge
    boundary_side : dict side label -> int array of edge indices
    boundary_outward : (B,) int array, +1 if the global edge normal points
        out of the domain on that edge
    """

    def __init__(self, vertices, cells):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be (V, 2)")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise ValueError("cells must be (T, 3)")
        self._build_geometry()
        self._build_edges()
        # filled by build_structured_mesh, None for imported meshes
        self.n = None
        self.diag = None

    def _build_geometry(self):
        v = self.vertices[self.cells]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            bad = int(np.argmax(det <= 0))
            raise ValueError(f"cell {bad} is not counterclockwise (signed area <= 0)")
        self.cell_areas = 0.5 * det

    def _build_edges(self):
        cells = self.cells
        # local edge k sits opposite local vertex k
        pairs = np.stack(
            [cells[:, [1, 2]], cells[:, [0, 2]], cells[:, [0, 1]]], axis=1
        )  # (T, 3, 2)
        lo = pairs.min(axis=2)
        hi = pairs.max(axis=2)
        keys = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        self.edges = edges
        self.cell_edges = inverse.reshape(-1, 3).astype(np.int64)

        # CCW traversal of cell (a,b,c) visits its local edges as b->c, c->a, a->b
        a, b, c = cells[:, 0], cells[:, 1], cells[:, 2]
        starts = np.stack([b, c, a], axis=1)
        self.cell_edge_signs = np.where(
            starts == self.edges[self.cell_edges, 0], 1, -1
        ).astype(np.int64)

        counts = np.bincount(self.cell_edges.ravel(), minlength=len(edges))
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: edge shared by more than 2 cells")
        self.boundary_edges = np.nonzero(counts == 1)[0]
        self.edge_is_boundary = counts == 1

        # adjacent cell of each boundary edge (single incidence, any write wins)
        owner = np.full(len(edges), -1, dtype=np.int64)
        t_idx = np.repeat(np.arange(len(cells)), 3)
        owner[self.cell_edges.ravel()] = t_idx
        self.boundary_cell = owner[self.boundary_edges]

        self._classify_boundary()
        self._orient_boundary()

    def _classify_boundary(self):
        self.boundary_side = {s: [] for s in BOUNDARY_SIDES}
        mids = self.edge_midpoints()[self.boundary_edges]
        v = self.vertices
        for e, mid in zip(self.boundary_edges, mids):
            p, q = v[self.edges[e]]
            if np.isclose(p[1], 0) and np.isclose(q[1], 0):
                self.boundary_side["bottom"].append(e)
            elif np.isclose(p[0], 1) and np.isclose(q[0], 1):
                self.boundary_side["right"].append(e)
            elif np.isclose(p[1], 1) and np.isclose(q[1], 1):
                self.boundary_side["top"].append(e)
            elif np.isclose(p[0], 0) and np.isclose(q[0], 0):
                self.boundary_side["left"].append(e)
            else:
                # imported meshes may have boundaries off the unit square
                self.boundary_side.setdefault("other", []).append(e)
        self.boundary_side = {
            k: np.asarray(v, dtype=np.int64) for k, v in self.boundary_side.items()
        }

    def _orient_boundary(self):
        normals = self.edge_normals()[self.boundary_edges]
        mids = self.edge_midpoints()[self.boundary_edges]
        cents = self.cell_centroids()[self.boundary_cell]
        dots = np.einsum("ei,ei->e", normals, mids - cents)
        self.boundary_outward = np.where(dots > 0, 1, -1).astype(np.int64)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_edges(self):
        return len(self.edges)

    def cell_centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    def edge_midpoints(self):
        return self.vertices[self.edges].mean(axis=1)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edge_tangents(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / self.edge_lengths()[:, None]

    def edge_normals(self):
        """Unit normals, the low->high tangent rotated by -90 degrees."""
        t = self.edge_tangents()
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def locate_points(self, x, y):
        """Containing cell of each point; only for structured meshes."""
        if self.n is None:
            raise ValueError("point location requires a structured mesh")
        n = self.n
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i = np.clip(np.floor(x * n).astype(np.int64), 0, n - 1)
        j = np.clip(np.floor(y * n).astype(np.int64), 0, n - 1)
        fx = x * n - i
        fy = y * n - j
        if self.diag == "right":
            upper = fy > fx
        else:
            upper = fy > 1.0 - fx
        return 2 * (j * n + i) + upper.astype(np.int64)


class BoundaryPartition:
    """Two partitions of the boundary edge set.

    gamma_d/gamma_t split the boundary for the displacement/traction data,
    gamma_p/gamma_f for the pressure/flux data.  Traction and flux parts
    carry essential conditions on the stress and flux spaces.
    """

    def __init__(self, mesh, gamma_t=(), gamma_f=()):
        all_bdry = set(mesh.boundary_edges.tolist())
        self.gamma_t = self._resolve(mesh, gamma_t)
        self.gamma_f = self._resolve(mesh, gamma_f)
        if not self.gamma_t <= all_bdry or not self.gamma_f <= all_bdry:
            raise ValueError("partition contains non-boundary edges")
        self.gamma_d = all_bdry - self.gamma_t
        self.gamma_p = all_bdry - self.gamma_f

    @staticmethod
    def _resolve(mesh, spec):
        edges = set()
        for item in spec:
            if isinstance(item, str):
                edges.update(mesh.boundary_side[item].tolist())
            else:
                edges.add(int(item))
        return edges

    def sorted(self, which):
        return np.asarray(sorted(getattr(self, which)), dtype=np.int64)


def build_structured_mesh(n, diag="right"):
    """Bisect an n x n grid of squares on [0,1]^2.

    diag="right" cuts each square from its lower-left to its upper-right
    corner, diag="left" from lower-right to upper-left.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if diag not in ("right", "left"):
        raise ValueError("diag must be 'right' or 'left'")
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i] at (i/n, j/n)
    xs, ys = np.meshgrid(np.linspace(0, 1, n + 1), np.linspace(0, 1, n + 1))
    vertices = np.stack([xs.ravel(), ys.ravel()], axis=1)

    ll = idx[:-1, :-1].ravel()
    lr = idx[:-1, 1:].ravel()
    ul = idx[1:, :-1].ravel()
    ur = idx[1:, 1:].ravel()
    if diag == "right":
        lower = np.stack([ll, lr, ur], axis=1)
        upper = np.stack([ll, ur, ul], axis=1)
    else:
        lower = np.stack([ll, lr, ul], axis=1)
        upper = np.stack([lr, ur, ul], axis=1)
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper

    mesh = Mesh(vertices, cells)
    mesh.n = n
    mesh.diag = diag
    return mesh


def read_mesh(path):
    """Read the plain-text format: header 'V E T', V vertex lines, T cell lines."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise ValueError("truncated mesh file")
    nv, ne, nt = (int(t) for t in tokens[:3])
    need = 3 + 2 * nv + 3 * nt
    if len(tokens) < need:
        raise ValueError("truncated mesh file")
    vals = tokens[3:]
    vertices = np.array(vals[: 2 * nv], dtype=float).reshape(nv, 2)
    cells = np.array(vals[2 * nv : 2 * nv + 3 * nt], dtype=np.int64).reshape(nt, 3)
    mesh = Mesh(vertices, cells)
    if mesh.num_edges != ne:
        raise ValueError(
            f"header declares {ne} edges, connectivity gives {mesh.num_edges}"
        )
    return mesh


def write_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_edges} {mesh.num_cells}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for a, b, c in mesh.cells:
            fh.write(f"{a} {b} {c}\n")
