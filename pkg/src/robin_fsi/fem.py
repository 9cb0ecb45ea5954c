"""P1/P2 finite-element spaces on triangles, form assembly, norms and
variational (consistent-flux) traction recovery.

Data callbacks follow one convention throughout: ``f(x, y, t)`` receives
1D coordinate arrays and returns shape (n,) for scalar data, (n, 2) for
vector data and (n, 2, 2) for stress tensors.

Vector dofs are blocked by component: x-component coefficients first,
then y-component; within a block, vertex dofs precede edge-midpoint dofs.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import segment_rule, tri_rule


def ref_basis(degree, pts):
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    if degree == 1:
        return np.column_stack([l0, l1, l2])
    return np.column_stack([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l0 * l1,
        4 * l1 * l2,
        4 * l2 * l0,
    ])


def ref_basis_grad(degree, pts):
    q = len(pts)
    x, y = pts[:, 0], pts[:, 1]
    l = np.column_stack([1.0 - x - y, x, y])
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return np.broadcast_to(dl, (q, 3, 2)).copy()
    g = np.empty((q, 6, 2))
    for i in range(3):
        g[:, i, :] = (4 * l[:, i] - 1)[:, None] * dl[i]
    pairs = [(0, 1), (1, 2), (2, 0)]
    for k, (i, j) in enumerate(pairs):
        g[:, 3 + k, :] = 4 * (l[:, i][:, None] * dl[j] + l[:, j][:, None] * dl[i])
    return g


def edge_trace_basis(degree, s):
    if degree == 1:
        return np.column_stack([1.0 - s, s])
    return np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])


class Space:
    """Scalar or 2-vector Lagrange space of degree 1 or 2 on a Mesh."""

    def __init__(self, mesh, degree, ncomp=1):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if ncomp not in (1, 2):
            raise ValueError("ncomp must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.ncomp = ncomp

        tris = mesh.triangles
        raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        raw.sort(axis=1)
        edges, inv = np.unique(raw, axis=0, return_inverse=True)
        self.edges = edges
        self.edge_lookup = {tuple(e): k for k, e in enumerate(edges)}
        nv = mesh.num_vertices

        if degree == 1:
            self.nsdof = nv
            self.cell_sdofs = tris.copy()
            self.dof_coords = mesh.vertices.copy()
        else:
            self.nsdof = nv + len(edges)
            tri_edges = inv.reshape(3, -1).T  # columns: (v0v1, v1v2, v2v0)
            self.cell_sdofs = np.column_stack([tris, nv + tri_edges])
            mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
            self.dof_coords = np.vstack([mesh.vertices, mids])

        self.ndof = ncomp * self.nsdof
        self.nlocal = 3 if degree == 1 else 6

        p = mesh.vertices[tris]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (nt,2,2)
        self.det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        self.Jinv = np.empty_like(J)
        self.Jinv[:, 0, 0] = J[:, 1, 1]
        self.Jinv[:, 0, 1] = -J[:, 0, 1]
        self.Jinv[:, 1, 0] = -J[:, 1, 0]
        self.Jinv[:, 1, 1] = J[:, 0, 0]
        self.Jinv /= self.det[:, None, None]

        self._boundary_sdofs = {}
        self._cache = {}

    def edge_sdofs(self, v0, v1):
        """Scalar dofs on the mesh edge (v0, v1): endpoints then midpoint."""
        if self.degree == 1:
            return np.array([v0, v1])
        mid = self.mesh.num_vertices + self.edge_lookup[tuple(sorted((v0, v1)))]
        return np.array([v0, v1, mid])

    def boundary_sdofs(self, tag):
        if tag not in self._boundary_sdofs:
            idx = self.mesh.edges_with_tag(tag)
            if len(idx) == 0:
                raise ValueError(f"unknown boundary tag {tag!r}")
            dofs = set()
            for k in idx:
                dofs.update(self.edge_sdofs(*self.mesh.boundary_edges[k]).tolist())
            self._boundary_sdofs[tag] = np.array(sorted(dofs), dtype=int)
        return self._boundary_sdofs[tag]

    def boundary_dofs(self, tag, comp=None):
        """Vector dofs on a tagged boundary (all components by default)."""
        s = self.boundary_sdofs(tag)
        if self.ncomp == 1:
            return s
        comps = range(self.ncomp) if comp is None else [comp]
        return np.concatenate([c * self.nsdof + s for c in comps])

    def vdofs(self, comp, sdofs):
        return comp * self.nsdof + np.asarray(sdofs)

    def phys_quad(self, degree):
        """Physical quadrature points/weights and basis data per element.

        Returns (xq, yq, w, N, G): coordinates (nt, q), weights including
        the Jacobian (nt, q), reference basis values (q, nl) and physical
        basis gradients (nt, q, nl, 2).
        """
        key = ("quad", degree)
        if key not in self._cache:
            pts, wts = tri_rule(degree)
            N = ref_basis(self.degree, pts)
            Gref = ref_basis_grad(self.degree, pts)
            G = np.einsum("qad,edk->eqak", Gref, self.Jinv)
            p = self.mesh.vertices[self.mesh.triangles]
            # x = p0 + J [xi, eta]
            xq = (
                p[:, 0, 0][:, None]
                + np.outer(p[:, 1, 0] - p[:, 0, 0], pts[:, 0])
                + np.outer(p[:, 2, 0] - p[:, 0, 0], pts[:, 1])
            )
            yq = (
                p[:, 0, 1][:, None]
                + np.outer(p[:, 1, 1] - p[:, 0, 1], pts[:, 0])
                + np.outer(p[:, 2, 1] - p[:, 0, 1], pts[:, 1])
            )
            w = np.outer(self.det, wts)
            self._cache[key] = (xq, yq, w, N, G)
        return self._cache[key]


@dataclass
class FieldCoeffs:
    """Coefficient array of a discrete field at a given time."""

    space: Space
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.ndof,):
            raise ValueError(
                f"expected {self.space.ndof} coefficients, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite coefficients")

    def copy(self, t=None):
        return FieldCoeffs(self.space, self.values.copy(), self.t if t is None else t)


@dataclass
class TraceField:
    """Interface data: values at the interface dofs of `space`."""

    space: Space
    indices: np.ndarray
    values: np.ndarray

    def scatter(self):
        full = np.zeros(self.space.ndof)
        full[self.indices] = self.values
        return full


def zero_field(space, t=0.0):
    return FieldCoeffs(space, np.zeros(space.ndof), t)


# ---------------------------------------------------------------------------
# operator assembly


def _triplets_block(space_rows, space_cols, elem, rows_sdofs, cols_sdofs, crow, ccol):
    nt, nr, nc = elem.shape
    rows = (crow * space_rows.nsdof + rows_sdofs)[:, :, None]
    cols = (ccol * space_cols.nsdof + cols_sdofs)[:, None, :]
    rows = np.broadcast_to(rows, elem.shape).ravel()
    cols = np.broadcast_to(cols, elem.shape).ravel()
    return rows, cols, elem.ravel()


def assemble_operator(trial, test, kernel, *, rho=1.0, mu=1.0, lam=0.0, tag=None):
    """Assemble a bilinear form into a CSR matrix (test rows, trial cols).

    Kernels: ``mass`` rho*(u, v); ``sym_grad`` 2*mu*(D(u), D(v));
    ``elasticity`` 2*mu*(D(u), D(v)) + lam*(div u, div v);
    ``divergence`` (q, div u) with scalar test q; ``boundary_mass``
    (u, v) over the edges carrying ``tag``.
    """
    if trial.mesh is not test.mesh:
        raise ValueError("trial and test spaces must share a mesh")
    if kernel == "mass":
        return _assemble_mass(trial, rho)
    if kernel == "sym_grad":
        return _assemble_elastic(trial, mu, 0.0)
    if kernel == "elasticity":
        return _assemble_elastic(trial, mu, lam)
    if kernel == "divergence":
        return _assemble_divergence(trial, test)
    if kernel == "boundary_mass":
        if tag is None:
            raise ValueError("boundary_mass needs a tag")
        return _assemble_boundary_mass(trial, tag, rho)
    raise ValueError(f"unknown kernel {kernel!r}")


def _assemble_mass(space, rho):
    pts, wts = tri_rule(2 * space.degree)
    N = ref_basis(space.degree, pts)
    ref_mm = np.einsum("q,qa,qb->ab", wts, N, N)
    elem = rho * space.det[:, None, None] * ref_mm
    data = []
    for c in range(space.ncomp):
        data.append(
            _triplets_block(space, space, elem, space.cell_sdofs, space.cell_sdofs, c, c)
        )
    return _to_csr(space.ndof, space.ndof, data)


def _assemble_elastic(space, mu, lam):
    if space.ncomp != 2:
        raise ValueError("elastic kernels need a 2-vector space")
    pts, wts = tri_rule(2 * (space.degree - 1) + 2)
    Gref = ref_basis_grad(space.degree, pts)
    G = np.einsum("qad,edk->eqak", Gref, space.Jinv)
    w = np.outer(space.det, wts)  # (nt, q)
    GG = np.einsum("eq,eqad,eqbd->eab", w, G, G)
    Gd = np.einsum("eq,eqac,eqbd->eacbd", w, G, G)  # indices: a, d(a), b, d(b)
    data = []
    for c1 in range(2):
        for c2 in range(2):
            elem = mu * Gd[:, :, c2, :, c1] + lam * Gd[:, :, c1, :, c2]
            if c1 == c2:
                elem = elem + mu * GG
            data.append(
                _triplets_block(
                    space, space, elem, space.cell_sdofs, space.cell_sdofs, c1, c2
                )
            )
    return _to_csr(space.ndof, space.ndof, data)


def _assemble_divergence(trial, test):
    if trial.ncomp != 2 or test.ncomp != 1:
        raise ValueError("divergence maps a vector trial space to scalar tests")
    pts, wts = tri_rule(trial.degree + test.degree)
    Nq = ref_basis(test.degree, pts)
    Gref = ref_basis_grad(trial.degree, pts)
    G = np.einsum("qad,edk->eqak", Gref, trial.Jinv)
    w = np.outer(trial.det, wts)
    data = []
    for c in range(2):
        elem = np.einsum("eq,qa,eqb->eab", w, Nq, G[:, :, :, c])
        data.append(
            _triplets_block(test, trial, elem, test.cell_sdofs, trial.cell_sdofs, 0, c)
        )
    return _to_csr(test.ndof, trial.ndof, data)


def _assemble_boundary_mass(space, tag, rho):
    idx = space.mesh.edges_with_tag(tag)
    if len(idx) == 0:
        raise ValueError(f"unknown boundary tag {tag!r}")
    s, w1 = segment_rule(space.degree + 1)
    Ne = edge_trace_basis(space.degree, s)
    ref = np.einsum("q,qa,qb->ab", w1, Ne, Ne)
    verts = space.mesh.vertices
    rows, cols, vals = [], [], []
    for k in idx:
        v0, v1 = space.mesh.boundary_edges[k]
        L = float(np.linalg.norm(verts[v1] - verts[v0]))
        sd = space.edge_sdofs(v0, v1)
        elem = rho * L * ref
        for c in range(space.ncomp):
            d = c * space.nsdof + sd
            rows.append(np.repeat(d, len(sd)))
            cols.append(np.tile(d, len(sd)))
            vals.append(elem.ravel())
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.ndof, space.ndof),
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _to_csr(nrows, ncols, blocks):
    rows = np.concatenate([b[0] for b in blocks])
    cols = np.concatenate([b[1] for b in blocks])
    vals = np.concatenate([b[2] for b in blocks])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


# ---------------------------------------------------------------------------
# functionals and interpolation


def assemble_functional(test, data, *, region="domain", t=0.0, quad_degree=8):
    """Right-hand-side vector of (data, v) over the domain or a boundary tag."""
    out = np.zeros(test.ndof)
    if callable(data) is False:
        raise TypeError("data must be callable (x, y, t)")
    if region == "domain":
        xq, yq, w, N, _ = test.phys_quad(quad_degree)
        vals = np.asarray(data(xq.ravel(), yq.ravel(), t), dtype=float)
        if test.ncomp == 1:
            vals = vals.reshape(xq.shape)
            out += np.einsum("eq,eq,qa->ea", w, vals, N).ravel() @ _scatter_matrix(test)
        else:
            vals = vals.reshape(xq.shape + (2,))
            for c in range(test.ncomp):
                contrib = np.einsum("eq,eq,qa->ea", w, vals[:, :, c], N)
                np.add.at(out, c * test.nsdof + test.cell_sdofs, contrib)
        return out
    # boundary tag
    idx = test.mesh.edges_with_tag(region)
    if len(idx) == 0:
        raise ValueError(f"unknown boundary tag {region!r}")
    s, w1 = segment_rule(max(3, (quad_degree + 2) // 2))
    Ne = edge_trace_basis(test.degree, s)
    verts = test.mesh.vertices
    for k in idx:
        v0, v1 = test.mesh.boundary_edges[k]
        p0, p1 = verts[v0], verts[v1]
        L = float(np.linalg.norm(p1 - p0))
        xs = p0[0] + s * (p1[0] - p0[0])
        ys = p0[1] + s * (p1[1] - p0[1])
        vals = np.asarray(data(xs, ys, t), dtype=float)
        sd = test.edge_sdofs(v0, v1)
        if test.ncomp == 1:
            out[sd] += L * np.einsum("q,q,qa->a", w1, vals, Ne)
        else:
            for c in range(test.ncomp):
                out[c * test.nsdof + sd] += L * np.einsum(
                    "q,q,qa->a", w1, vals[:, c], Ne
                )
    return out


def _scatter_matrix(space):
    # (nt*nl) -> ndof accumulation for scalar spaces
    key = "scatter"
    if key not in space._cache:
        nt, nl = space.cell_sdofs.shape
        rows = np.arange(nt * nl)
        cols = space.cell_sdofs.ravel()
        space._cache[key] = sp.coo_matrix(
            (np.ones(nt * nl), (rows, cols)), shape=(nt * nl, space.nsdof)
        ).tocsr()
    return space._cache[key]


def interpolate(f, space, t=0.0):
    """Nodal interpolant of f(x, y, t) on the space."""
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = np.asarray(f(x, y, t), dtype=float)
    if space.ncomp == 1:
        coeffs = vals
    else:
        coeffs = np.concatenate([vals[:, 0], vals[:, 1]])
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("interpolated data is not finite")
    return FieldCoeffs(space, coeffs, t)


# ---------------------------------------------------------------------------
# norms and errors


def mass_norm(M, v):
    return float(np.sqrt(max(0.0, v @ (M @ v))))


def s_norm(eta, mu_s, lam_s):
    """Structure elastic-energy norm sqrt(2 mu ||D||^2 + lam ||div||^2)."""
    A = _cached_elasticity(eta.space, mu_s, lam_s)
    return mass_norm(A, eta.values)


def _cached_elasticity(space, mu, lam):
    key = ("elas", float(mu), float(lam))
    if key not in space._cache:
        space._cache[key] = _assemble_elastic(space, mu, lam)
    return space._cache[key]


def eval_on_cells(field, quad_degree=8):
    """Field values at quadrature points: (nt, q, ncomp) or (nt, q)."""
    sp_ = field.space
    _, _, _, N, _ = sp_.phys_quad(quad_degree)
    if sp_.ncomp == 1:
        return np.einsum("qa,ea->eq", N, field.values[sp_.cell_sdofs])
    out = np.empty(sp_.cell_sdofs.shape[:1] + (N.shape[0], 2))
    for c in range(2):
        out[:, :, c] = np.einsum(
            "qa,ea->eq", N, field.values[c * sp_.nsdof + sp_.cell_sdofs]
        )
    return out


def grad_on_cells(field, quad_degree=8):
    """Field gradients at quadrature points: (nt, q, ncomp, 2)."""
    sp_ = field.space
    _, _, _, _, G = sp_.phys_quad(quad_degree)
    nt, q = G.shape[:2]
    out = np.empty((nt, q, sp_.ncomp, 2))
    for c in range(sp_.ncomp):
        coeff = field.values[c * sp_.nsdof + sp_.cell_sdofs] if sp_.ncomp > 1 else \
            field.values[sp_.cell_sdofs]
        out[:, :, c, :] = np.einsum("eqad,ea->eqd", G, coeff)
    return out


def l2_norm_exact(space, f, t, quad_degree=10):
    xq, yq, w, _, _ = space.phys_quad(quad_degree)
    vals = np.asarray(f(xq.ravel(), yq.ravel(), t), dtype=float)
    if space.ncomp == 1:
        sq = vals.reshape(xq.shape) ** 2
    else:
        sq = (vals.reshape(xq.shape + (2,)) ** 2).sum(axis=-1)
    return float(np.sqrt((w * sq).sum()))


def l2_error(field, exact, t, quad_degree=10):
    """L2 norm of field - exact, with exact evaluated at quadrature points."""
    sp_ = field.space
    xq, yq, w, _, _ = sp_.phys_quad(quad_degree)
    num = eval_on_cells(field, quad_degree)
    vals = np.asarray(exact(xq.ravel(), yq.ravel(), t), dtype=float)
    if sp_.ncomp == 1:
        diff = num - vals.reshape(xq.shape)
        sq = diff**2
    else:
        diff = num - vals.reshape(xq.shape + (2,))
        sq = (diff**2).sum(axis=-1)
    return float(np.sqrt((w * sq).sum()))


def s_norm_error(field, exact_grad, t, mu_s, lam_s, quad_degree=10):
    """S-norm of field - exact, using the analytic gradient of the exact field."""
    sp_ = field.space
    xq, yq, w, _, _ = sp_.phys_quad(quad_degree)
    gh = grad_on_cells(field, quad_degree)
    ge = np.asarray(exact_grad(xq.ravel(), yq.ravel(), t), dtype=float)
    diff = gh - ge.reshape(xq.shape + (2, 2))
    D = 0.5 * (diff + np.swapaxes(diff, -1, -2))
    dd = (D**2).sum(axis=(-1, -2))
    dv = (diff[..., 0, 0] + diff[..., 1, 1]) ** 2
    return float(np.sqrt((w * (2 * mu_s * dd + lam_s * dv)).sum()))


def s_norm_exact(space, exact_grad, t, mu_s, lam_s, quad_degree=10):
    zero = FieldCoeffs(space, np.zeros(space.ndof), t)
    return s_norm_error(zero, exact_grad, t, mu_s, lam_s, quad_degree)


# ---------------------------------------------------------------------------
# traction recovery and point evaluation


class TraceSystem:
    """Factorized interface boundary-mass system for one tagged boundary."""

    def __init__(self, space, tag):
        from .linalg import DirectSolver

        self.space = space
        self.tag = tag
        self.dofs = space.boundary_dofs(tag)
        M = _assemble_boundary_mass(space, tag, 1.0)
        self.mass_full = M
        self.mass = M[np.ix_(self.dofs, self.dofs)].tocsr()
        self.solver = DirectSolver(self.mass)

    def project_residual(self, residual):
        vals = self.solver.solve(np.asarray(residual)[self.dofs])
        return TraceField(self.space, self.dofs, vals)

    def l2_norm(self, values):
        return float(np.sqrt(max(0.0, values @ (self.mass @ values))))


def recover_traction(space, tag, raw_residual, trace_system=None):
    """Variational traction on a tagged boundary.

    ``raw_residual`` is A_raw @ x - b_raw of the step with all known
    loads subtracted, so that its interface entries equal the pairing of
    the unknown boundary stress with the interface test traces.
    """
    ts = trace_system or TraceSystem(space, tag)
    return ts.project_residual(raw_residual)


def eval_field(field, points):
    """Evaluate a field at arbitrary points of its structured mesh."""
    sp_ = field.space
    mesh = sp_.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ox, oy = mesh.origin
    hx = mesh.extent[0] / mesh.nx
    hy = mesh.extent[1] / mesh.ny
    fx = (pts[:, 0] - ox) / hx
    fy = (pts[:, 1] - oy) / hy
    i = np.clip(np.floor(fx).astype(int), 0, mesh.nx - 1)
    j = np.clip(np.floor(fy).astype(int), 0, mesh.ny - 1)
    xi = fx - i
    eta = fy - j
    lower = xi + eta <= 1 + 1e-14
    cell = 2 * (j * mesh.nx + i)
    tri = np.where(lower, cell, cell + 1)
    # lower tri (a,b,d): a=(0,0) b=(1,0) d=(0,1) -> ref coords (xi, eta)
    # upper tri (b,c,d): b=(1,0) c=(1,1) d=(0,1): x = 1 - l2, y = l1 + l2
    #   -> l2 = 1 - xi, l1 = xi + eta - 1
    rx = np.where(lower, xi, xi + eta - 1)
    ry = np.where(lower, eta, 1 - xi)
    ref = np.column_stack([rx, ry])
    N = np.empty((len(pts), sp_.nlocal))
    for k in range(len(pts)):
        N[k] = ref_basis(sp_.degree, ref[k : k + 1])[0]
    sd = sp_.cell_sdofs[tri]
    if sp_.ncomp == 1:
        return np.einsum("ka,ka->k", N, field.values[sd])
    out = np.empty((len(pts), 2))
    for c in range(2):
        out[:, c] = np.einsum("ka,ka->k", N, field.values[c * sp_.nsdof + sd])
    return out


def dump_field(field, path):
    """CSV dump: dof_index,x,y,value (vector fields list both components)."""
    sp_ = field.space
    with open(path, "w", newline="\n") as f:
        f.write("dof_index,x,y,value\n")
        for d in range(sp_.ndof):
            x, y = sp_.dof_coords[d % sp_.nsdof]
            f.write(f"{d},{x:.10g},{y:.10g},{field.values[d]:.10g}\n")
