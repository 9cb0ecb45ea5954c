"""Structured triangular meshes of axis-aligned rectangles with tagged
boundaries, plus the fluid/solid interface correspondence."""

from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    """Invalid mesh construction input or mismatched interface."""


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a rectangle.

    Each cell of the nx-by-ny grid is split along its bottom-left to
    top-right diagonal, so the triangulation is deterministic. Vertices
    are numbered row by row (x fastest); the structured metadata
    (origin, extent, nx, ny) is kept for O(1) point location.
    """

    vertices: np.ndarray        # (nv, 2) coordinates, cm
    triangles: np.ndarray       # (nt, 3) vertex indices, positive orientation
    boundary_edges: np.ndarray  # (ne, 2) vertex index pairs
    boundary_tags: tuple        # tag string per boundary edge
    domain_label: str
    h: float                    # nominal cell size extent_x / nx
    origin: tuple = field(default=(0.0, 0.0))
    extent: tuple = field(default=(1.0, 1.0))
    nx: int = 1
    ny: int = 1

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges_with_tag(self, tag):
        idx = [k for k, t in enumerate(self.boundary_tags) if t == tag]
        return np.asarray(idx, dtype=int)

    def boundary_edge_normals(self):
        """Outward unit normal per boundary edge."""
        p0 = self.vertices[self.boundary_edges[:, 0]]
        p1 = self.vertices[self.boundary_edges[:, 1]]
        t = p1 - p0
        n = np.column_stack([t[:, 1], -t[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        # orient away from the rectangle center
        cx = self.origin[0] + 0.5 * self.extent[0]
        cy = self.origin[1] + 0.5 * self.extent[1]
        mid = 0.5 * (p0 + p1)
        flip = (n * (mid - [cx, cy])).sum(axis=1) < 0
        n[flip] *= -1.0
        return n


def build_rect_mesh(origin, extent, nx, ny, layout, domain_label="fluid"):
    """Triangulate the rectangle origin + [0,extent] into 2*nx*ny triangles.

    ``layout`` maps each side in {'left','right','bottom','top'} to a
    boundary tag string.
    """
    ox, oy = float(origin[0]), float(origin[1])
    ex, ey = float(extent[0]), float(extent[1])
    if nx < 1 or ny < 1:
        raise MeshError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if ex <= 0 or ey <= 0:
        raise MeshError(f"extents must be positive, got {extent}")
    missing = [s for s in SIDES if s not in layout]
    if missing:
        raise MeshError(f"layout missing sides: {missing}")

    xs = ox + ex * np.arange(nx + 1) / nx
    ys = oy + ey * np.arange(ny + 1) / ny
    xx, yy = np.meshgrid(xs, ys)  # row j (y), col i (x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            tris.append((a, b, d))
            tris.append((b, c, d))
    triangles = np.asarray(tris, dtype=int)

    edges = []
    tags = []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append(layout["bottom"])
        edges.append((vid(i, ny), vid(i + 1, ny)))
        tags.append(layout["top"])
    for j in range(ny):
        edges.append((vid(0, j), vid(0, j + 1)))
        tags.append(layout["left"])
        edges.append((vid(nx, j), vid(nx, j + 1)))
        tags.append(layout["right"])

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=np.asarray(edges, dtype=int),
        boundary_tags=tuple(tags),
        domain_label=domain_label,
        h=ex / nx,
        origin=(ox, oy),
        extent=(ex, ey),
        nx=nx,
        ny=ny,
    )


@dataclass(frozen=True)
class InterfaceMap:
    """Bijective vertex/edge pairing along the shared interface."""

    fluid_vertices: np.ndarray  # (k,) vertex indices in the fluid mesh
    solid_vertices: np.ndarray  # (k,) matching vertex indices in the solid mesh
    fluid_edges: np.ndarray     # (m,) boundary-edge indices in the fluid mesh
    solid_edges: np.ndarray     # (m,) matching boundary-edge indices


def extract_interface(fluid_mesh, solid_mesh, tag="interface"):
    """Pair interface vertices and edges of two conforming meshes."""
    fe = fluid_mesh.edges_with_tag(tag)
    se = solid_mesh.edges_with_tag(tag)
    if len(fe) == 0 or len(se) == 0:
        raise MeshError(f"both meshes need edges tagged {tag!r}")

    def iface_vertices(mesh, eidx):
        verts = np.unique(mesh.boundary_edges[eidx].ravel())
        coords = mesh.vertices[verts]
        order = np.lexsort((coords[:, 1], coords[:, 0]))
        return verts[order], coords[order]

    fverts, fcoords = iface_vertices(fluid_mesh, fe)
    sverts, scoords = iface_vertices(solid_mesh, se)
    scale = max(1.0, np.abs(fcoords).max())
    if len(fverts) != len(sverts) or not np.allclose(
        fcoords, scoords, rtol=0.0, atol=1e-12 * scale
    ):
        raise MeshError("interface vertex sets do not match between meshes")

    f2s = dict(zip(fverts.tolist(), sverts.tolist()))
    skey = {
        tuple(sorted(solid_mesh.boundary_edges[k])): k for k in se
    }
    fedges, sedges = [], []
    for k in fe:
        a, b = fluid_mesh.boundary_edges[k]
        key = tuple(sorted((f2s[a], f2s[b])))
        if key not in skey:
            raise MeshError("interface edges do not match between meshes")
        fedges.append(k)
        sedges.append(skey[key])
    return InterfaceMap(
        fluid_vertices=fverts,
        solid_vertices=sverts,
        fluid_edges=np.asarray(fedges, dtype=int),
        solid_edges=np.asarray(sedges, dtype=int),
    )


def dump_mesh(mesh, path):
    """Plain-text mesh dump: `v x y`, `t i j k`, `e i j TAG` lines."""
    with open(path, "w", newline="\n") as f:
        for x, y in mesh.vertices:
            f.write(f"v {x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            f.write(f"t {i} {j} {k}\n")
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            f.write(f"e {i} {j} {tag}\n")
