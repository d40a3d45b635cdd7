"""Linearization of a factor graph and the sparse least-squares solve.

``linearize`` evaluates every factor's whitened residual and Jacobian blocks
at a linearization point; ``solve_linear`` minimizes ||J delta + r||^2 plus a
Marquardt damping term on the normal equations. Column layout follows a
fill-reducing minimum-degree ordering by default; a natural ordering is kept
selectable so dense oracles can be compared against a fixed layout.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .graph import FactorGraph
from .variables import Values, VariableKey, sort_key


class LinearizationError(RuntimeError):
    pass


class SingularSystemError(RuntimeError):
    pass


def compute_ordering(graph: FactorGraph, method: str = "amd") -> list[VariableKey]:
    """Elimination ordering over all graph variables.

    ``amd`` runs a greedy minimum-degree pass on the variable connectivity
    graph (neighbors of an eliminated variable are connected into a clique),
    with ties broken by the natural key order so repeated calls are
    identical. ``natural`` sorts by (timestep, kind).
    """
    variables = sorted(graph.variables, key=sort_key)
    if method == "natural":
        return variables
    if method != "amd":
        raise ValueError(f"unknown ordering method {method!r}")

    adj: dict[VariableKey, set[VariableKey]] = {v: set() for v in variables}
    for _, factor in graph.items():
        ks = factor.keys
        for a in ks:
            for b in ks:
                if a != b:
                    adj[a].add(b)

    # lazy-deletion heap keyed by (degree, natural rank)
    rank = {v: i for i, v in enumerate(variables)}
    heap = [(len(adj[v]), rank[v], v) for v in variables]
    heapq.heapify(heap)
    order: list[VariableKey] = []
    remaining = set(variables)
    while remaining:
        deg, _, best = heapq.heappop(heap)
        if best not in remaining or deg != len(adj[best]):
            continue
        order.append(best)
        remaining.discard(best)
        neighbors = adj.pop(best)
        for n in neighbors:
            adj[n].discard(best)
        for a in neighbors:
            others = neighbors - adj[a]
            others.discard(a)
            if others:
                adj[a] |= others
            heapq.heappush(heap, (len(adj[a]), rank[a], a))
    return order


@dataclass
class BlockRow:
    factor_id: int
    row_offset: int
    keys: tuple[VariableKey, ...]
    jacobians: list[np.ndarray]  # whitened, one per key
    residual: np.ndarray  # whitened


@dataclass
class LinearSystem:
    ordering: list[VariableKey]
    offsets: dict[VariableKey, int]
    dim: int
    rows: int
    blocks: list[BlockRow]
    _sparse: tuple = None
    _normal: tuple = None

    def to_sparse(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Assemble (once) the global whitened Jacobian and residual vector."""
        if self._sparse is not None:
            return self._sparse
        data, rows_idx, cols_idx = [], [], []
        r = np.zeros(self.rows)
        for blk in self.blocks:
            m = blk.residual.shape[0]
            r[blk.row_offset : blk.row_offset + m] = blk.residual
            row_span = np.arange(blk.row_offset, blk.row_offset + m)
            for key, jac in zip(blk.keys, blk.jacobians):
                c0 = self.offsets[key]
                d = key.dim
                data.append(jac.ravel())
                rows_idx.append(np.repeat(row_span, d))
                cols_idx.append(
                    np.broadcast_to(np.arange(c0, c0 + d), (m, d)).ravel()
                )
        if data:
            data = np.concatenate(data)
            rows_idx = np.concatenate(rows_idx)
            cols_idx = np.concatenate(cols_idx)
        jmat = sp.csr_matrix(
            (data, (rows_idx, cols_idx)), shape=(self.rows, self.dim)
        )
        self._sparse = (jmat, r)
        return self._sparse

    def normal_equations(self) -> tuple[sp.csc_matrix, np.ndarray, np.ndarray]:
        """Cached (J^T J, J^T r, diag) of the undamped normal system."""
        if self._normal is None:
            jmat, r = self.to_sparse()
            h = (jmat.T @ jmat).tocsc()
            self._normal = (h, jmat.T @ r, h.diagonal())
        return self._normal

    def gradient_inf_norm(self) -> float:
        _, g, _ = self.normal_equations()
        return float(np.max(np.abs(g), initial=0.0))

    def unpack(self, flat: np.ndarray) -> dict[VariableKey, np.ndarray]:
        return {
            key: flat[off : off + key.dim] for key, off in self.offsets.items()
        }


def linearize(
    graph: FactorGraph,
    lin_point: Values,
    ordering: list[VariableKey] | None = None,
) -> LinearSystem:
    """Whitened block Jacobian/residual of the graph about ``lin_point``."""
    if ordering is None:
        ordering = compute_ordering(graph)
    offsets: dict[VariableKey, int] = {}
    dim = 0
    for key in ordering:
        offsets[key] = dim
        dim += key.dim

    blocks: list[BlockRow] = []
    rows = 0
    for fid, factor in graph.items():
        r, jacs = factor.whitened(lin_point)
        if not np.all(np.isfinite(r)) or any(
            not np.all(np.isfinite(j)) for j in jacs
        ):
            raise LinearizationError(
                f"non-finite residual or Jacobian in factor {fid} ({factor.tag})"
            )
        blocks.append(BlockRow(fid, rows, factor.keys, jacs, r))
        rows += r.shape[0]
    return LinearSystem(ordering, offsets, dim, rows, blocks)


def solve_linear(
    system: LinearSystem, damping: float = 0.0
) -> dict[VariableKey, np.ndarray]:
    """Increment minimizing ||J delta + r||^2 (+ Marquardt damping).

    Damping adds ``damping * diag(J^T J)`` to the normal matrix; zero diagonal
    entries (variables untouched by any active Jacobian) are floored to one so
    disconnected variables stay frozen instead of making the system singular.

    The damped system is Jacobi-scaled before factorization and polished with
    one iterative-refinement step: whitening spreads row scales over several
    orders of magnitude, and the raw normal equations would otherwise lose
    most of the increment's accuracy.
    """
    h, g, d = system.normal_equations()
    if damping > 0.0:
        hd = h + sp.diags(damping * np.where(d > 0.0, d, 1.0))
    elif np.any(d == 0.0):
        # keep zero-degree variables solvable at zero increment
        hd = h + sp.diags(np.where(d > 0.0, 0.0, 1.0))
    else:
        hd = h
    diag = hd.diagonal()
    if np.any(diag <= 0.0):
        raise SingularSystemError("normal matrix has a nonpositive diagonal")
    s = 1.0 / np.sqrt(diag)
    scaled = sp.diags(s) @ hd @ sp.diags(s)
    try:
        lu = splu(scaled.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc
    delta = s * lu.solve(-(s * g))
    resid = -g - hd @ delta
    delta = delta + s * lu.solve(s * resid)
    if not np.all(np.isfinite(delta)):
        raise SingularSystemError("normal equations singular even after damping")
    return system.unpack(delta)
