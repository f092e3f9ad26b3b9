"""Independent dense-matrix oracles for cross-checking the sparse engine.

Everything here builds explicit matrices the slow, obvious way: reflections
as -I plus rank-one polygon projectors, and the coined walk on the torus as
a flip-flop shift times a Grover coin.  The sparse engine must agree with
these on small instances; keep the two routes independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolve import localized_clique_state, uniform_state
from .graph import GridSpec, Tessellation, TessellatedGraph, make_grid_of_cliques
from .search import partial_cover

#: Refuse to build dense matrices beyond this dimension.
MAX_DENSE_DIM = 4096
_UNITARY_TOL = 1e-10

#: Direction slots of the coined torus walk: 0 -> +x, 1 -> +y, 2 -> -x, 3 -> -y.
_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))
_FLIP = (2, 3, 0, 1)


@dataclass(frozen=True, eq=False)
class DenseUnitary:
    """A dense matrix checked for unitarity on construction."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ValueError("expected a non-empty square matrix")
        if mat.shape[0] > MAX_DENSE_DIM:
            raise ValueError(f"dense dimension {mat.shape[0]} exceeds {MAX_DENSE_DIM}")
        gram = mat.conj().T @ mat
        dev = float(np.max(np.abs(gram - np.eye(mat.shape[0]))))
        if dev > _UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])


def _dense_reflection(tess: Tessellation, num_vertices: int) -> np.ndarray:
    mat = -np.eye(num_vertices, dtype=np.complex128)
    for poly in tess.polygons:
        verts = poly.vertices
        mat[np.ix_(verts, verts)] += 2.0 * np.outer(poly.amplitudes, np.conj(poly.amplitudes))
    return mat


def dense_step_matrix(tg: TessellatedGraph) -> DenseUnitary:
    """The full step operator as an explicit matrix (product of reflections,
    tessellation 0 applied first)."""
    num = tg.num_vertices
    if num > MAX_DENSE_DIM:
        raise ValueError(f"graph with {num} vertices exceeds dense limit {MAX_DENSE_DIM}")
    mat = np.eye(num, dtype=np.complex128)
    for tess in tg.tessellations:
        mat = _dense_reflection(tess, num) @ mat
    return DenseUnitary(mat)


def shift_matrix(n: int) -> np.ndarray:
    """Flip-flop shift of the coined torus walk: |cell, d> -> |cell + d, -d>."""
    dim = 4 * n * n
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dimension {dim} exceeds dense limit {MAX_DENSE_DIM}")
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for x in range(n):
        for y in range(n):
            for d, (dx, dy) in enumerate(_DIRS):
                src = (x * n + y) * 4 + d
                dst = (((x + dx) % n) * n + ((y + dy) % n)) * 4 + _FLIP[d]
                mat[dst, src] = 1.0
    return mat


def coin_matrix(n: int, marked: tuple[int, int] | None = None) -> np.ndarray:
    """Block-diagonal Grover coin; the marked cell's block (if any) is -I."""
    grover = 0.5 * np.ones((4, 4)) - np.eye(4)
    mat = np.kron(np.eye(n * n), grover).astype(np.complex128)
    if marked is not None:
        x, y = marked
        j = (x % n) * n + (y % n)
        block = slice(4 * j, 4 * j + 4)
        mat[block, block] = -np.eye(4)
    return mat


def fcqw_grid_step(n: int, marked: tuple[int, int] | None = None) -> DenseUnitary:
    """One step of the flip-flop coined walk on the n-by-n torus with a
    Grover coin, optionally with the coin replaced by -I at a marked cell."""
    return DenseUnitary(shift_matrix(n) @ coin_matrix(n, marked))


@dataclass(frozen=True, eq=False)
class CoinedBasisMap:
    """Relabeling between grid-of-cliques vertices and coined (cell, direction) states."""

    to_coined: np.ndarray
    from_coined: np.ndarray


def coined_basis_map(n: int) -> CoinedBasisMap:
    """Identify clique vertex (x, y, k) with coined state (cell (x, y), direction k)."""
    spec = GridSpec(n, 1)
    to_coined = np.empty(spec.num_vertices, dtype=np.int64)
    for x in range(n):
        for y in range(n):
            for k in range(4):
                to_coined[spec.vertex_index(x, y, k)] = (x * n + y) * 4 + k
    from_coined = np.empty_like(to_coined)
    from_coined[to_coined] = np.arange(to_coined.size)
    return CoinedBasisMap(to_coined=to_coined, from_coined=from_coined)


def verify_equivalence(n: int, steps: int, marked: tuple[int, int] | None = None) -> float:
    """Largest deviation between the staggered walk on the grid of cliques
    (q = 1) and the coined torus walk under the basis relabeling.

    Compares the relabeled step operators entrywise, then evolves a
    localized state and the uniform state for ``steps`` steps through both
    routes.  With ``marked`` set, the staggered side drops the marked cell's
    polygon and the coined side uses the -I coin there.
    """
    spec = GridSpec(n, 1)
    tg = make_grid_of_cliques(spec)
    if marked is not None:
        tg = partial_cover(tg, marked)
    u_stag = dense_step_matrix(tg).entries
    u_coin = fcqw_grid_step(n, marked).entries
    bm = coined_basis_map(n)

    relabeled = u_coin[np.ix_(bm.to_coined, bm.to_coined)]
    dev = float(np.max(np.abs(relabeled - u_stag)))

    starts = [
        localized_clique_state(spec, 0, 0).amplitudes,
        uniform_state(spec.num_vertices).amplitudes,
    ]
    for psi in starts:
        psi_s = psi.copy()
        psi_c = np.empty_like(psi_s)
        psi_c[bm.to_coined] = psi_s
        for _ in range(steps):
            psi_s = u_stag @ psi_s
            psi_c = u_coin @ psi_c
            dev = max(dev, float(np.max(np.abs(psi_c[bm.to_coined] - psi_s))))
    return dev
