"""First-order finite elements for Schroedinger operators on metric graphs.

Every edge carries a uniform mesh. Kirchhoff and delta vertices own a single
degree of freedom shared by their edge ends, decoupled Neumann vertices own one
per edge end, and Dirichlet vertices own none. The pencil ``K psi = lam M psi``
uses the exact mass matrix; piecewise-constant potentials are integrated
exactly against products of hat functions.

Besides the sparse pencil the operator keeps a "chain" layout (padded arrays
of every edge's interior tridiagonal block plus the small vertex block) which
the inertia counter in :mod:`qgraph_wegner.counting` works on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .alloy import AlloyModel, Configuration, PiecewiseConstant, edge_potential
from .conditions import VertexCondition
from .errors import AccuracyError, CapabilityError, InputError, ResourceError
from .graph import InducedSubgraph

KAPPA = 0.04
DOF_CAP = 5_000_000
DENSE_THRESHOLD = 1500
SUPPORTED_KINDS = ("dirichlet", "neumann_decoupled", "kirchhoff", "delta")


def cells_for(length: float, h: float) -> int:
    return max(2, math.ceil(length / h - 1e-9))


def lambda_max_for(h: float) -> float:
    """Largest energy trusted on a mesh of size h."""
    return KAPPA / h**2


def mesh_for_energy(lambda0: float, lengths=(1.0,)) -> float:
    """Mesh size giving lambda_max(h) >= 4 (lambda0 + 1)."""
    return math.sqrt(KAPPA / (4.0 * (max(lambda0, 0.0) + 1.0)))


def hat_products(nodes: np.ndarray, profile: PiecewiseConstant | None):
    """Exact integrals of V phi_i phi_j on a 1-D mesh for piecewise-constant V.

    Returns ``(diag, off)`` with ``diag[i] = int V phi_i^2`` and
    ``off[i] = int V phi_i phi_{i+1}``.
    """
    n = nodes.size - 1
    diag = np.zeros(n + 1)
    off = np.zeros(n)
    if profile is None:
        return diag, off
    x0, h = nodes[:-1], np.diff(nodes)
    for p0, p1, val in zip(profile.breaks[:-1], profile.breaks[1:], profile.values):
        if val == 0 or p1 <= p0:
            continue
        t0 = np.clip((p0 - x0) / h, 0.0, 1.0)
        t1 = np.clip((p1 - x0) / h, 0.0, 1.0)
        if not np.any(t1 > t0):
            continue
        # antiderivatives of (1-t)^2, t(1-t), t^2 on [0, 1]
        ll = ((1 - t0) ** 3 - (1 - t1) ** 3) / 3
        lr = (t1**2 - t0**2) / 2 - (t1**3 - t0**3) / 3
        rr = (t1**3 - t0**3) / 3
        diag[:-1] += val * h * ll
        diag[1:] += val * h * rr
        off += val * h * lr
    return diag, off


@dataclass
class EdgeMesh:
    edge: int
    length: float
    cells: int
    left_dof: int
    right_dof: int
    interior_start: int

    @property
    def h(self) -> float:
        return self.length / self.cells

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.cells + 1)

    @property
    def node_dofs(self) -> np.ndarray:
        """Global dof per mesh node, -1 at Dirichlet ends."""
        inner = np.arange(self.interior_start, self.interior_start + self.cells - 1)
        return np.concatenate([[self.left_dof], inner, [self.right_dof]])


@dataclass
class DofLayout:
    """Degree-of-freedom map of a discretized subgraph; independent of the potential."""

    sub: InducedSubgraph
    family: Mapping[int, VertexCondition]
    h_target: float
    meshes: list[EdgeMesh]
    vertex_dofs: list[tuple[int, int | None]]
    alpha: np.ndarray
    n_vertex: int
    n_dofs: int

    @property
    def h(self) -> float:
        return max(m.h for m in self.meshes) if self.meshes else self.h_target

    @property
    def lambda_max(self) -> float:
        return lambda_max_for(self.h)

    def mesh(self, e: int) -> EdgeMesh:
        return self._by_edge[e]

    @cached_property
    def _by_edge(self):
        return {m.edge: m for m in self.meshes}


def build_layout(sub: InducedSubgraph, family: Mapping[int, VertexCondition], h: float,
                 dof_cap: int = DOF_CAP) -> DofLayout:
    if not h > 0:
        raise InputError("mesh size h must be positive")
    for v in sub.vertices:
        if v not in family:
            raise InputError(f"no condition for vertex {v}")
        c = family[v]
        if c.kind not in SUPPORTED_KINDS:
            raise CapabilityError(f"vertex {v}: condition kind {c.kind!r} is not supported by the solver")
        if c.degree != sub.degree(v):
            raise InputError(f"vertex {v}: condition degree {c.degree} != subgraph degree {sub.degree(v)}")
    edges = sub.sorted_edges()
    total = sum(cells_for(sub.parent.edge(e).length, h) - 1 for e in edges)
    if total + 2 * len(edges) > dof_cap:
        raise ResourceError(f"mesh h={h} needs more than {dof_cap} dofs")

    end_dof: dict[tuple[int, int], int] = {}
    vertex_dofs: list[tuple[int, int | None]] = []
    alpha = []
    for v in sorted(sub.vertices):
        c = family[v]
        inc = sub.incidences(v)
        if c.kind == "dirichlet":
            for end in inc:
                end_dof[end] = -1
        elif c.kind == "neumann_decoupled":
            for end in inc:
                end_dof[end] = len(vertex_dofs)
                vertex_dofs.append((v, end[0]))
                alpha.append(0.0)
        else:
            k = len(vertex_dofs)
            vertex_dofs.append((v, None))
            alpha.append(c.alpha if c.kind == "delta" else 0.0)
            for end in inc:
                end_dof[end] = k
    nv = len(vertex_dofs)
    meshes = []
    nxt = nv
    for e in edges:
        edge = sub.parent.edge(e)
        n = cells_for(edge.length, h)
        meshes.append(EdgeMesh(e, edge.length, n, end_dof[(e, 0)], end_dof[(e, 1)], nxt))
        nxt += n - 1
    return DofLayout(sub, family, h, meshes, vertex_dofs, np.array(alpha), nv, nxt)


@dataclass
class ChainData:
    """Padded per-edge tridiagonal blocks (rows follow ``layout.meshes``)."""

    m: np.ndarray          # interior node count per edge
    Kd: np.ndarray         # (E, mmax) interior diagonal; padding 1
    Md: np.ndarray         # padding 0
    Ko: np.ndarray         # (E, mmax-1) interior off-diagonal; padding 0
    Mo: np.ndarray
    left: np.ndarray       # end dof per edge, -1 for Dirichlet
    right: np.ndarray
    K_left: np.ndarray     # coupling end node -> first/last interior node
    M_left: np.ndarray
    K_right: np.ndarray
    M_right: np.ndarray
    KV: np.ndarray         # dense vertex block
    MV: np.ndarray


@dataclass
class SpectrumResult:
    values: np.ndarray
    vectors: np.ndarray | None = None
    upto: float | None = None

    def __len__(self):
        return self.values.size


@dataclass
class DiscretizedOperator:
    layout: DofLayout
    chains: ChainData
    edge_potentials: dict
    provenance: dict = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.layout.n_dofs

    @property
    def h(self) -> float:
        return self.layout.h

    @property
    def lambda_max(self) -> float:
        return self.layout.lambda_max

    @cached_property
    def _pencil(self):
        ch, lay = self.chains, self.layout
        vr, vc = np.nonzero((ch.KV != 0) | (ch.MV != 0))
        rows, cols = [vr], [vc]
        kv, mv = [ch.KV[vr, vc]], [ch.MV[vr, vc]]
        for r, mesh in enumerate(lay.meshes):
            m = int(ch.m[r])
            idx = np.arange(mesh.interior_start, mesh.interior_start + m)
            rows += [idx, idx[:-1], idx[1:]]
            cols += [idx, idx[1:], idx[:-1]]
            kv += [ch.Kd[r, :m], ch.Ko[r, : m - 1], ch.Ko[r, : m - 1]]
            mv += [ch.Md[r, :m], ch.Mo[r, : m - 1], ch.Mo[r, : m - 1]]
            for end, first, kc, mc in ((ch.left[r], idx[0], ch.K_left[r], ch.M_left[r]),
                                       (ch.right[r], idx[-1], ch.K_right[r], ch.M_right[r])):
                if end >= 0:
                    rows.append(np.array([end, first]))
                    cols.append(np.array([first, end]))
                    kv.append(np.array([kc, kc]))
                    mv.append(np.array([mc, mc]))
        R, C = np.concatenate(rows), np.concatenate(cols)
        shape = (lay.n_dofs, lay.n_dofs)
        K = scipy.sparse.coo_matrix((np.concatenate(kv), (R, C)), shape=shape).tocsr()
        M = scipy.sparse.coo_matrix((np.concatenate(mv), (R, C)), shape=shape).tocsr()
        return K, M

    @property
    def K(self) -> scipy.sparse.csr_matrix:
        return self._pencil[0]

    @property
    def M(self) -> scipy.sparse.csr_matrix:
        return self._pencil[1]

    def _check_energy(self, lam: float):
        if lam > self.lambda_max * (1 + 1e-12):
            raise AccuracyError(
                f"energy {lam:g} exceeds lambda_max(h)={self.lambda_max:g} for h={self.h:g}; refine the mesh"
            )

    def count_below(self, lam: float) -> int:
        from .counting import count_below

        return count_below(self, lam)

    def eigenvalues(self, upto: float | None = None, count: int | None = None,
                    vectors: bool = False) -> SpectrumResult:
        return eigenvalues(self, upto=upto, count=count, vectors=vectors)

    def spectrum_lower_bound(self) -> float:
        """A shift strictly below every pencil eigenvalue."""
        vmin = min((float(np.min(p.values)) for p in self.edge_potentials.values() if p.values.size), default=0.0)
        neg = np.abs(self.layout.alpha[self.layout.alpha < 0])
        lmin = min((m.length for m in self.layout.meshes), default=1.0)
        # trace inequality |psi(v)|^2 <= (2/t) ||psi||^2 + t ||psi'||^2 with t = min(l, 1/|alpha|)
        return min(vmin, 0.0) - 1.0 - float(np.sum(2 * neg * np.maximum(1 / lmin, neg)))

    def edge_values(self, vec: np.ndarray, e: int) -> np.ndarray:
        """Nodal values of a dof vector along edge e (0 at Dirichlet ends)."""
        dofs = self.layout.mesh(e).node_dofs
        out = np.zeros(dofs.size, dtype=vec.dtype)
        ok = dofs >= 0
        out[ok] = vec[dofs[ok]]
        return out

    def weighted_norm2(self, vec: np.ndarray, e: int, profile: PiecewiseConstant | None = None,
                       interval: tuple[float, float] | None = None) -> float:
        """int_e w |psi|^2 for w = profile (or the indicator of ``interval``, or 1)."""
        mesh = self.layout.mesh(e)
        if profile is None:
            a, b = interval if interval is not None else (0.0, mesh.length)
            profile = PiecewiseConstant.indicator(mesh.length, a, b)
        d, o = hat_products(mesh.nodes, profile)
        f = self.edge_values(vec, e)
        return float(np.real(np.sum(d * np.abs(f) ** 2) + 2 * np.sum(o * np.real(np.conj(f[:-1]) * f[1:]))))

    def dump_coo(self) -> str:
        """``K``/``M`` entries as ``K row col value`` lines."""
        lines = []
        for name, A in (("K", self.K), ("M", self.M)):
            c = A.tocoo()
            for i, j, v in zip(c.row, c.col, c.data):
                lines.append(f"{name} {i} {j} {v!r}")
        return "\n".join(lines) + "\n"


def assemble_potentials(layout: DofLayout, potentials: Mapping[int, PiecewiseConstant],
                        provenance: dict | None = None) -> DiscretizedOperator:
    """Operator ``-Laplace + V`` with ``V`` given per edge."""
    meshes = layout.meshes
    E = len(meshes)
    m = np.array([mesh.cells - 1 for mesh in meshes], dtype=int)
    mmax = int(m.max()) if E else 1
    Kd = np.ones((E, mmax))
    Md = np.zeros((E, mmax))
    Ko = np.zeros((E, max(mmax - 1, 0)))
    Mo = np.zeros_like(Ko)
    KL, ML, KR, MR = (np.zeros(E) for _ in range(4))
    nv = layout.n_vertex
    KV = np.diag(layout.alpha.astype(float)) if nv else np.zeros((0, 0))
    MV = np.zeros((nv, nv))
    left = np.array([mesh.left_dof for mesh in meshes], dtype=int)
    right = np.array([mesh.right_dof for mesh in meshes], dtype=int)
    pots = {}
    for r, mesh in enumerate(meshes):
        n, h = mesh.cells, mesh.h
        prof = potentials.get(mesh.edge)
        pots[mesh.edge] = prof if prof is not None else PiecewiseConstant.constant(mesh.length)
        vd, vo = hat_products(mesh.nodes, prof)
        kdiag = np.full(n + 1, 2.0 / h)
        kdiag[[0, -1]] = 1.0 / h
        mdiag = np.full(n + 1, 2.0 * h / 3.0)
        mdiag[[0, -1]] = h / 3.0
        kdiag = kdiag + vd
        koff = -1.0 / h + vo
        moff = np.full(n, h / 6.0)
        k = n - 1
        Kd[r, :k] = kdiag[1:n]
        Md[r, :k] = mdiag[1:n]
        if k > 1:
            Ko[r, : k - 1] = koff[1 : n - 1]
            Mo[r, : k - 1] = moff[1 : n - 1]
        KL[r], ML[r] = koff[0], moff[0]
        KR[r], MR[r] = koff[n - 1], moff[n - 1]
        if left[r] >= 0:
            KV[left[r], left[r]] += kdiag[0]
            MV[left[r], left[r]] += mdiag[0]
        if right[r] >= 0:
            KV[right[r], right[r]] += kdiag[n]
            MV[right[r], right[r]] += mdiag[n]
    chains = ChainData(m, Kd, Md, Ko, Mo, left, right, KL, ML, KR, MR, KV, MV)
    return DiscretizedOperator(layout, chains, pots, dict(provenance or {}))


def assemble(sub: InducedSubgraph, family: Mapping[int, VertexCondition], model: AlloyModel | None,
             config: Configuration | None, h: float, extra: Mapping[int, PiecewiseConstant] | None = None,
             layout: DofLayout | None = None) -> DiscretizedOperator:
    """Discretize ``H = -Laplace_Lambda + V_omega`` on the subgraph with the given conditions.

    ``extra`` adds a deterministic potential per edge; ``layout`` reuses a
    previously built dof map for the same subgraph, conditions and mesh.
    """
    if layout is None:
        layout = build_layout(sub, family, h)
    pots = {}
    for e in sub.sorted_edges():
        p = None
        if model is not None and config is not None and e in model.potentials:
            p = edge_potential(model, config, e)
        if extra is not None and e in extra:
            p = extra[e] if p is None else p + extra[e]
        if p is not None:
            pots[e] = p
    prov = {"h": layout.h, "edges": sub.edge_count}
    if config is not None:
        prov.update(seed=config.seed, trial=config.trial)
    return assemble_potentials(layout, pots, prov)


# ---------------------------------------------------------------------------
# eigenvalues


def eigenvalues(op: DiscretizedOperator, upto: float | None = None, count: int | None = None,
                vectors: bool = False) -> SpectrumResult:
    """Pencil eigenvalues ``<= upto`` or the lowest ``count`` ones, ascending."""
    if (upto is None) == (count is None):
        raise InputError("give exactly one of upto or count")
    if upto is not None:
        op._check_energy(upto)
        k = op.count_below(upto)
    else:
        k = int(count)
        if k < 0:
            raise InputError("count must be >= 0")
        k = min(k, op.n_dofs)
    n = op.n_dofs
    if k == 0:
        return SpectrumResult(np.zeros(0), np.zeros((n, 0)) if vectors else None, upto)
    if n <= DENSE_THRESHOLD or k >= n - 1:
        K, M = op.K.toarray(), op.M.toarray()
        if vectors:
            w, v = scipy.linalg.eigh(K, M, subset_by_index=[0, k - 1])
        else:
            w = scipy.linalg.eigh(K, M, subset_by_index=[0, k - 1], eigvals_only=True)
            v = None
    else:
        sigma = op.spectrum_lower_bound()
        while op.count_below(sigma) > 0:
            sigma = 2 * sigma - 1
        w, v = scipy.sparse.linalg.eigsh(op.K.tocsc(), k=k, M=op.M.tocsc(), sigma=sigma, which="LM")
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if not vectors:
            v = None
    if count is not None and w.size and w[-1] > op.lambda_max * (1 + 1e-12):
        raise AccuracyError(
            f"requested {count} eigenvalues reach {w[-1]:g} > lambda_max(h)={op.lambda_max:g}; refine the mesh"
        )
    return SpectrumResult(np.asarray(w), v, upto)


def residual_norm(op: DiscretizedOperator, lam: float, vec: np.ndarray) -> float:
    """||K psi - lam M psi|| / ||psi||_M."""
    r = op.K @ vec - lam * (op.M @ vec)
    return float(np.linalg.norm(r) / math.sqrt(abs(vec @ (op.M @ vec))))
