"""
Wave-vector representation of response tensors on regular lattices.

The transform is the unitary DFT over lattice positions,
``U[q, j] = exp(-i k_q . r_j) / sqrt(J)``, applied per force type and acting
as the identity on the component index.  With this sign a plane-wave probe
``exp(+i k_q . r)`` maps to the ``q``-th k-domain basis vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LatticeError
from .tensor import BlockResponseMatrix, SampleGrid, force_array, full_matrix


@dataclass(frozen=True, eq=False)
class KGrid:
    """Reciprocal-lattice wavevectors and the unitary transform for a grid."""

    kvectors: np.ndarray
    transform: np.ndarray
    convention: str = "unitary-dft,exp(-ik.r)"

    @property
    def size(self) -> int:
        return self.kvectors.shape[0]


def _force_transform(grid: SampleGrid, m: int):
    lat = grid.require_lattice()
    pts = grid.points_of(m)
    if pts.shape[0] != lat.size:
        raise LatticeError(f"domain {m} has {pts.shape[0]} points but the lattice has {lat.size} nodes")
    idx = lat.multi_index(pts)
    if np.unique(np.ravel_multi_index(idx.T, lat.shape)).size != lat.size:
        raise LatticeError(f"domain {m} does not cover every lattice node exactly once")
    ks = lat.kvectors()
    U = np.exp(-1j * ks @ pts.T) / np.sqrt(lat.size)
    c = grid.components[m]
    if c > 1:
        U = np.kron(U, np.eye(c))
    return ks, U


def kgrid(grid: SampleGrid, force_type: int = 1) -> KGrid:
    ks, U = _force_transform(grid, force_type)
    return KGrid(ks, U)


def transform_matrix(grid: SampleGrid) -> np.ndarray:
    """Block-diagonal unitary transform over all force types of the grid."""
    n = grid.total_dim
    U = np.zeros((n, n), dtype=complex)
    for m in grid.force_types:
        _, Um = _force_transform(grid, m)
        sl = grid.slice(m)
        U[sl, sl] = Um
    return U


def to_kdomain(D) -> BlockResponseMatrix:
    """``D_k = U D U^H`` on the same grid (k-index replaces position index)."""
    if not isinstance(D, BlockResponseMatrix):
        raise LatticeError("k-domain transform needs a tensor on a lattice grid")
    U = transform_matrix(D.grid)
    Dk = U @ D.full @ U.conj().T
    return BlockResponseMatrix.from_full(D.grid, 0.5 * (Dk + Dk.conj().T), D.omega0)


def from_kdomain(Dk) -> BlockResponseMatrix:
    """Inverse of :func:`to_kdomain`."""
    if not isinstance(Dk, BlockResponseMatrix):
        raise LatticeError("k-domain transform needs a tensor on a lattice grid")
    U = transform_matrix(Dk.grid)
    D = U.conj().T @ Dk.full @ U
    return BlockResponseMatrix.from_full(Dk.grid, 0.5 * (D + D.conj().T), Dk.omega0)


def to_kdomain_force(grid: SampleGrid, f) -> np.ndarray:
    """Force spectrum ``U f`` of a full-state force vector."""
    return transform_matrix(grid) @ force_array(f, grid.total_dim)


def diagonality(Dk) -> float:
    """Fraction of Frobenius energy off the diagonal; NaN for a zero matrix."""
    a = full_matrix(Dk)
    total = float(np.sum(np.abs(a) ** 2))
    if total == 0:
        return float("nan")
    off = a - np.diag(np.diag(a))
    return float(np.sum(np.abs(off) ** 2)) / total


def kdomain_power(Dk, Fk, omega0: float | None = None) -> float:
    """Absorbed power ``2 w0 F_k^H D_k F_k`` evaluated in the k-domain."""
    a = full_matrix(Dk)
    v = np.asarray(Fk, dtype=complex).reshape(-1)
    if v.shape[0] != a.shape[0]:
        raise DimensionError(f"force spectrum has length {v.shape[0]}, tensor has {a.shape[0]}")
    w = getattr(Dk, "omega0", 1.0) if omega0 is None else float(omega0)
    return float(2 * w * np.vdot(v, a @ v).real)


def circulant_ring(n: int, kernel, spacing: float = 1.0, omega0: float = 1.0) -> BlockResponseMatrix:
    """Shift-invariant tensor ``D_ij = kernel(ring distance)`` on an ``n``-point ring."""
    grid = SampleGrid.line(n, spacing)
    i = np.arange(n)
    d = np.abs(i[:, None] - i[None, :])
    d = np.minimum(d, n - d) * spacing
    D = np.asarray(kernel(d), dtype=complex)
    return BlockResponseMatrix(grid, {(1, 1): 0.5 * (D + D.conj().T)}, omega0)
