"""Self-adjoint vertex conditions and the Dirichlet restriction.

A condition at a vertex of degree ``d`` is the subspace
``S_v = {(f, f') : A f + B f' = 0}`` of C^{2d}. Boundary values are ordered by
incident edge id (ascending, a loop contributes its initial end first), and
``f'`` holds outgoing derivatives: ``f_e'(0)`` at an initial end and
``-f_e'(l_e)`` at a terminal end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import InputError
from .graph import InducedSubgraph, MetricGraph

KINDS = ("dirichlet", "neumann_decoupled", "kirchhoff", "delta", "general")
RANK_RTOL = 1e-10
HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class VertexCondition:
    vertex: int
    degree: int
    A: np.ndarray
    B: np.ndarray
    kind: str = "general"
    alpha: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = np.atleast_2d(np.asarray(self.B, dtype=complex))
        if A.shape != (self.degree, self.degree) or B.shape != A.shape:
            raise InputError(f"condition at vertex {self.vertex}: matrices must be {self.degree}x{self.degree}")
        if self.kind not in KINDS:
            raise InputError(f"unknown condition kind {self.kind!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def subspace(self) -> np.ndarray:
        """Orthonormal basis (columns) of S_v = ker [A B]."""
        return scipy.linalg.null_space(np.hstack([self.A, self.B]), rcond=RANK_RTOL)

    def same_subspace(self, other: "VertexCondition", tol: float = 1e-8) -> bool:
        return same_subspace(self.A, self.B, other.A, other.B, tol)

    def with_vertex(self, vertex: int) -> "VertexCondition":
        return VertexCondition(vertex, self.degree, self.A, self.B, self.kind, self.alpha)


def is_lagrangian(A, B) -> bool:
    """True iff rank [A B] = d and A B* is Hermitian."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise InputError(f"A and B must be square of equal size, got {A.shape} and {B.shape}")
    d = A.shape[0]
    sv = np.linalg.svd(np.hstack([A, B]), compute_uv=False)
    if sv[0] == 0 or np.sum(sv > RANK_RTOL * sv[0]) != d:
        return False
    P = A @ B.conj().T
    scale = max(np.linalg.norm(A) * np.linalg.norm(B), np.finfo(float).tiny)
    return bool(np.max(np.abs(P - P.conj().T)) <= HERMITIAN_RTOL * scale)


def same_subspace(A1, B1, A2, B2, tol: float = 1e-8) -> bool:
    """Compare ker [A1 B1] and ker [A2 B2] through principal angles."""
    K1 = scipy.linalg.null_space(np.hstack([A1, B1]), rcond=RANK_RTOL)
    K2 = scipy.linalg.null_space(np.hstack([A2, B2]), rcond=RANK_RTOL)
    if K1.shape != K2.shape:
        return False
    if K1.shape[1] == 0:
        return True
    return bool(np.max(scipy.linalg.subspace_angles(K1, K2)) <= tol)


def standard_condition(kind: str, degree: int, alpha: float = 0.0, vertex: int = -1) -> VertexCondition:
    """Dirichlet, decoupled Neumann, Kirchhoff, or delta coupling ``sum f' = alpha f(v)``."""
    d = int(degree)
    if d < 1:
        raise InputError("degree must be >= 1")
    if kind == "dirichlet":
        return VertexCondition(vertex, d, np.eye(d), np.zeros((d, d)), "dirichlet")
    if kind == "neumann_decoupled":
        return VertexCondition(vertex, d, np.zeros((d, d)), np.eye(d), "neumann_decoupled")
    if kind in ("kirchhoff", "delta"):
        alpha = float(alpha) if kind == "delta" else 0.0
        A = np.zeros((d, d))
        B = np.zeros((d, d))
        for i in range(d - 1):
            A[i, i], A[i, i + 1] = 1.0, -1.0
        A[d - 1, 0] = -alpha
        B[d - 1, :] = 1.0
        return VertexCondition(vertex, d, A, B, kind, alpha)
    raise InputError(f"no standard condition of kind {kind!r}")


class ConditionFamily(dict):
    """Mapping vertex id -> VertexCondition for every vertex of a (sub)graph."""

    def check(self, graph: MetricGraph | InducedSubgraph) -> "ConditionFamily":
        verts = set(graph.vertices)
        if set(self) != verts:
            missing = sorted(verts - set(self))[:5]
            extra = sorted(set(self) - verts)[:5]
            raise InputError(f"condition family mismatch: missing {missing}, extra {extra}")
        for v, c in self.items():
            if c.degree != graph.degree(v):
                raise InputError(f"vertex {v}: condition degree {c.degree} != vertex degree {graph.degree(v)}")
        return self


def uniform_family(graph: MetricGraph | InducedSubgraph, kind: str, alpha: float = 0.0) -> ConditionFamily:
    return ConditionFamily(
        {v: standard_condition(kind, graph.degree(v), alpha, vertex=v) for v in graph.vertices}
    )


def dirichlet_restriction(
    family: Mapping[int, VertexCondition],
    sub: InducedSubgraph,
    boundary_kind: str = "dirichlet",
    boundary_alpha: float = 0.0,
) -> ConditionFamily:
    """Conditions for ``G_Lambda``: interior vertices keep theirs, boundary vertices get Dirichlet.

    ``boundary_kind`` generalizes the boundary replacement to any standard kind
    of degree ``deg_{G_Lambda}(v)``; the default is the Dirichlet restriction.
    """
    missing = [v for v in sub.parent.vertices if v not in family]
    if missing:
        raise InputError(f"family does not cover vertices {missing[:5]}")
    out = ConditionFamily()
    for v in sub.interior:
        out[v] = family[v]
    for v in sub.boundary:
        out[v] = standard_condition(boundary_kind, sub.degree(v), boundary_alpha, vertex=v)
    return out


# ---------------------------------------------------------------------------
# text format


def dumps_family(family: Mapping[int, VertexCondition]) -> str:
    """``cond <vertex> <kind> [alpha]`` lines; ``general`` appends A then B row-major."""
    lines = []
    for v in sorted(family):
        c = family[v]
        if c.kind == "delta":
            lines.append(f"cond {v} delta {c.alpha!r}")
        elif c.kind == "general":
            nums = " ".join(_cplx(z) for z in np.concatenate([c.A.ravel(), c.B.ravel()]))
            lines.append(f"cond {v} general {nums}")
        else:
            lines.append(f"cond {v} {c.kind}")
    return "\n".join(lines) + "\n"


def loads_family(text: str, graph: MetricGraph | InducedSubgraph) -> ConditionFamily:
    """Parse condition lines; vertex degrees come from ``graph``."""
    out = ConditionFamily()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] != "cond":
                raise ValueError
            v, kind = int(tok[1]), tok[2]
            d = graph.degree(v)
            if kind == "general":
                vals = np.array([complex(t) for t in tok[3:]])
                if vals.size != 2 * d * d:
                    raise ValueError
                out[v] = VertexCondition(v, d, vals[: d * d].reshape(d, d), vals[d * d :].reshape(d, d))
            elif kind == "delta":
                out[v] = standard_condition("delta", d, float(tok[3]), vertex=v)
            else:
                out[v] = standard_condition(kind, d, vertex=v)
        except (ValueError, IndexError, KeyError, InputError):
            raise InputError(f"line {lineno}: cannot parse {raw!r}") from None
    return out.check(graph)


def _cplx(z: complex) -> str:
    return repr(complex(z)).strip("()")
