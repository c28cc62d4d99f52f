"""Block-tridiagonal operators on grid vectors and a block Thomas solver.

Grid vectors have shape ``(n_nodes, m)``: node-major, component-minor.  Every
operator here covers all ``N + 1`` nodes; the Dirichlet rows at nodes 0 and N
are identity rows with zero off-diagonal blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


class SolverError(RuntimeError):
    """Singular or non-finite pivot block met during block elimination."""

    def __init__(self, node: int):
        super().__init__(f"singular pivot block at node {node}")
        self.node = node


@njit(cache=True, nogil=True)
def _lu_inplace(a, piv):
    """Row-pivoted LU of a small square block; returns False on a zero pivot."""
    m = a.shape[0]
    for k in range(m):
        p = k
        big = abs(a[k, k])
        for r in range(k + 1, m):
            if abs(a[r, k]) > big:
                big = abs(a[r, k])
                p = r
        if big == 0.0 or not np.isfinite(big):
            return False
        piv[k] = p
        if p != k:
            for c in range(m):
                tmp = a[k, c]
                a[k, c] = a[p, c]
                a[p, c] = tmp
        inv = 1.0 / a[k, k]
        for r in range(k + 1, m):
            a[r, k] *= inv
            f = a[r, k]
            for c in range(k + 1, m):
                a[r, c] -= f * a[k, c]
    return True


@njit(cache=True, nogil=True)
def _lu_solve_inplace(lu, piv, b):
    m = lu.shape[0]
    for k in range(m):
        p = piv[k]
        if p != k:
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
    for r in range(1, m):
        s = b[r]
        for c in range(r):
            s -= lu[r, c] * b[c]
        b[r] = s
    for r in range(m - 1, -1, -1):
        s = b[r]
        for c in range(r + 1, m):
            s -= lu[r, c] * b[c]
        b[r] = s / lu[r, r]


@njit(cache=True, nogil=True)
def _factor(sub, diag, sup, lu, piv, upper):
    """Forward elimination of the matrix; returns the failing node or -1."""
    n, m = diag.shape[0], diag.shape[1]
    col = np.empty(m)
    for i in range(n):
        for r in range(m):
            for c in range(m):
                s = diag[i, r, c]
                if i > 0:
                    for k in range(m):
                        s -= sub[i, r, k] * upper[i - 1, k, c]
                lu[i, r, c] = s
        if not _lu_inplace(lu[i], piv[i]):
            return i
        if i < n - 1:
            for c in range(m):
                for r in range(m):
                    col[r] = sup[i, r, c]
                _lu_solve_inplace(lu[i], piv[i], col)
                for r in range(m):
                    if not np.isfinite(col[r]):
                        return i
                    upper[i, r, c] = col[r]
    return -1


@njit(cache=True, nogil=True)
def _solve(sub, lu, piv, upper, rhs, out):
    n, m = rhs.shape[0], rhs.shape[1]
    for i in range(n):
        for r in range(m):
            s = rhs[i, r]
            if i > 0:
                for k in range(m):
                    s -= sub[i, r, k] * out[i - 1, k]
            out[i, r] = s
        _lu_solve_inplace(lu[i], piv[i], out[i])
    for i in range(n - 2, -1, -1):
        for r in range(m):
            s = out[i, r]
            for k in range(m):
                s -= upper[i, r, k] * out[i + 1, k]
            out[i, r] = s


@dataclass(frozen=True, eq=False)
class BlockTridiagonal:
    """Blocks ``sub[i]``, ``diag[i]``, ``sup[i]`` of block row ``i``.

    ``sub[0]`` and ``sup[-1]`` are unused and kept at zero.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        if not (self.sub.shape == self.diag.shape == self.sup.shape):
            raise ValueError("sub, diag and sup must share one shape")
        if self.diag.ndim != 3 or self.diag.shape[1] != self.diag.shape[2]:
            raise ValueError("blocks must be stacked square matrices")

    @property
    def m(self) -> int:
        return self.diag.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.diag.shape[0]

    @property
    def n_interior(self) -> int:
        return self.n_nodes - 2

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(self.n_nodes, self.m)
        out = np.einsum("nij,nj->ni", self.diag, v)
        out[1:] += np.einsum("nij,nj->ni", self.sub[1:], v[:-1])
        out[:-1] += np.einsum("nij,nj->ni", self.sup[:-1], v[1:])
        return out

    def to_dense(self) -> np.ndarray:
        n, m = self.n_nodes, self.m
        a = np.zeros((n * m, n * m))
        for i in range(n):
            rows = slice(i * m, (i + 1) * m)
            a[rows, i * m:(i + 1) * m] = self.diag[i]
            if i > 0:
                a[rows, (i - 1) * m:i * m] = self.sub[i]
            if i < n - 1:
                a[rows, (i + 1) * m:(i + 2) * m] = self.sup[i]
        return a

    def entries(self):
        """Yield ``(row, col, value)`` for every nonzero scalar entry, row-major."""
        n, m = self.n_nodes, self.m
        for i in range(n):
            for r in range(m):
                row = i * m + r
                for j, blk in ((i - 1, self.sub), (i, self.diag), (i + 1, self.sup)):
                    if 0 <= j < n:
                        for c in range(m):
                            val = blk[i, r, c]
                            if val != 0.0:
                                yield row, j * m + c, float(val)

    def factorize(self) -> "BlockThomasFactor":
        return BlockThomasFactor(self)


class BlockThomasFactor:
    """Block LU factors of a :class:`BlockTridiagonal`, reusable across solves."""

    def __init__(self, op: BlockTridiagonal):
        n, m = op.n_nodes, op.m
        self._sub = np.ascontiguousarray(op.sub, dtype=float)
        self._lu = np.empty((n, m, m))
        self._piv = np.empty((n, m), dtype=np.int64)
        self._upper = np.zeros((n, m, m))
        bad = _factor(
            self._sub,
            np.ascontiguousarray(op.diag, dtype=float),
            np.ascontiguousarray(op.sup, dtype=float),
            self._lu,
            self._piv,
            self._upper,
        )
        if bad >= 0:
            raise SolverError(int(bad))
        self.shape = (n, m)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.ascontiguousarray(rhs, dtype=float).reshape(self.shape)
        out = np.empty(self.shape)
        _solve(self._sub, self._lu, self._piv, self._upper, rhs, out)
        return out


def block_thomas_solve(op: BlockTridiagonal, rhs: np.ndarray) -> np.ndarray:
    """Solve ``op @ z = rhs`` by block forward elimination and back substitution."""
    return BlockThomasFactor(op).solve(rhs)
