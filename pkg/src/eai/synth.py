"""
Synthetic response tensors with known ground-truth modes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, PreconditionError
from .tensor import TAU_HERM, TAU_PSD, BlockResponseMatrix, SampleGrid

GRAM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ModeSpec:
    """One self mode ``alpha d d^H`` or, if ``partner`` is set, one cross pair
    ``alpha d partner^H`` linking domain 1 to domain 2."""

    alpha: float
    vector: np.ndarray
    partner: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=complex).reshape(-1))
        if self.partner is not None:
            object.__setattr__(self, "partner", np.asarray(self.partner, dtype=complex).reshape(-1))


def _as_columns(modes):
    alphas = np.array([float(m.alpha) for m in modes])
    if np.any(alphas < 0):
        raise PreconditionError("responsivities must be non-negative")
    return alphas


def from_self_modes(grid: SampleGrid, modes: Sequence[ModeSpec], force_type: int = 1) -> np.ndarray:
    """Self block ``sum_i alpha_i d_i d_i^H`` from orthonormal mode vectors."""
    n = grid.dim(force_type)
    if n == 0:
        raise DimensionError(f"grid has no domain for force type {force_type}")
    if not modes:
        return np.zeros((n, n), dtype=complex)
    alphas = _as_columns(modes)
    V = np.column_stack([m.vector for m in modes])
    if V.shape[0] != n:
        raise DimensionError(f"mode vectors have length {V.shape[0]}, domain needs {n}")
    gram = V.conj().T @ V
    if np.max(np.abs(gram - np.eye(len(modes)))) > GRAM_TOL:
        raise PreconditionError("self-mode vectors are not orthonormal")
    D = (V * alphas) @ V.conj().T
    return 0.5 * (D + D.conj().T)


def from_cross_pairs(grid: SampleGrid, pairs: Sequence[ModeSpec]):
    """Cross blocks ``D12 = sum_i alpha_i d1_i d2_i^H`` and ``D21 = D12^H``."""
    n1, n2 = grid.dim(1), grid.dim(2)
    D12 = np.zeros((n1, n2), dtype=complex)
    alphas = _as_columns(pairs) if pairs else []
    for a, p in zip(alphas, pairs):
        if p.partner is None:
            raise PreconditionError("cross mode needs a partner vector in domain 2")
        if p.vector.shape[0] != n1 or p.partner.shape[0] != n2:
            raise DimensionError(
                f"cross pair dimensions ({p.vector.shape[0]}, {p.partner.shape[0]}) do not match grid ({n1}, {n2})"
            )
        for v in (p.vector, p.partner):
            if abs(np.linalg.norm(v) - 1) > GRAM_TOL:
                raise PreconditionError("cross-pair vectors must be unit norm")
        D12 += a * np.outer(p.vector, p.partner.conj())
    return D12, D12.conj().T.copy()


@dataclass
class Assembly:
    """Result of :func:`assemble_full`.

    ``lambda_star`` is 1 when the requested assembly is PSD; otherwise it is
    the largest cross-block scale (to within ``1e-6``) that keeps it PSD.
    """

    tensor: BlockResponseMatrix
    scale: float
    is_psd: bool
    min_eigenvalue: float
    lambda_star: float


def _min_eig(full):
    return float(np.linalg.eigvalsh(full).min())


def assemble_full(
    grid: SampleGrid,
    self_blocks: Mapping[int, np.ndarray],
    cross_block: np.ndarray | None = None,
    scale: float = 1.0,
    omega0: float = 1.0,
    cross_block_21: np.ndarray | None = None,
    tau_psd: float = TAU_PSD,
    tol: float = 1e-6,
) -> Assembly:
    """Assemble self blocks and a scaled cross block into one tensor.

    If the assembly at ``scale`` is indefinite, the largest PSD-preserving
    scale is found by bisection and reported; the tensor returned is still
    the one requested.
    """
    if not 0 <= scale <= 1:
        raise PreconditionError("cross-block scale must lie in [0, 1]")
    blocks = {}
    for m, a in self_blocks.items():
        blocks[(int(m), int(m))] = a
    if cross_block is not None:
        D12 = np.asarray(cross_block, dtype=complex)
        if cross_block_21 is not None:
            D21 = np.asarray(cross_block_21, dtype=complex)
            if D21.shape != D12.conj().T.shape or np.max(np.abs(D21 - D12.conj().T)) > TAU_HERM * max(
                np.linalg.norm(D12), 1e-300
            ):
                raise PreconditionError("cross blocks violate reciprocity (D21 != D12^H)")
        blocks[(1, 2)] = scale * D12
        blocks[(2, 1)] = scale * D12.conj().T
    D = BlockResponseMatrix(grid, blocks, omega0)

    base = BlockResponseMatrix(grid, {k: v for k, v in blocks.items() if k[0] == k[1]}).full
    cross = np.zeros_like(base)
    if cross_block is not None:
        s1, s2 = grid.slice(1), grid.slice(2)
        cross[s1, s2] = D12
        cross[s2, s1] = D12.conj().T

    def psd_at(lam):
        eig = np.linalg.eigvalsh(base + lam * cross)
        return eig.min() >= -tau_psd * max(np.abs(eig).max(), 1e-300)

    ok = psd_at(scale)
    if psd_at(1.0):
        lam_star = 1.0
    elif not psd_at(0.0):
        lam_star = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if psd_at(mid) else (lo, mid)
        lam_star = lo
    lam_min_eig = _min_eig(D.full)
    return Assembly(D, scale, bool(ok), lam_min_eig, float(lam_star))


def local_absorber(grid: SampleGrid, pointwise, force_type: int = 1, omega0: float = 1.0) -> BlockResponseMatrix:
    """Point-diagonal tensor: one ``c x c`` Hermitian PSD block per sample point.

    ``pointwise`` is a scalar, a single ``c x c`` matrix shared by all points,
    or an array of shape ``(J, c, c)``.
    """
    c = grid.components[force_type]
    J = grid.n_points(force_type)
    p = np.asarray(pointwise, dtype=complex)
    if p.ndim == 0:
        p = np.broadcast_to(p * np.eye(c), (J, c, c))
    elif p.ndim == 2:
        p = np.broadcast_to(p, (J, c, c))
    if p.shape != (J, c, c):
        raise DimensionError(f"pointwise response has shape {p.shape}, expected {(J, c, c)}")
    for j, b in enumerate(p):
        if np.max(np.abs(b - b.conj().T)) > TAU_HERM * max(np.linalg.norm(b), 1e-300):
            raise PreconditionError(f"pointwise response at point {j} is not Hermitian")
        ev = np.linalg.eigvalsh(b)
        if ev.min() < -TAU_PSD * max(np.abs(ev).max(), 1e-300):
            raise PreconditionError(f"pointwise response at point {j} is not PSD")
    n = J * c
    D = np.zeros((n, n), dtype=complex)
    for j in range(J):
        D[j * c:(j + 1) * c, j * c:(j + 1) * c] = p[j]
    return BlockResponseMatrix(grid, {(force_type, force_type): D}, omega0)


def smooth_random_fields(grid: SampleGrid, n_fields: int, coherence_length: float, rng, force_type=None):
    """Complex Gaussian fields convolved with a Gaussian envelope of width ``l``.

    With ``force_type=None`` the fields span the whole assembled state space;
    otherwise only the domain of that force type.
    """
    types = grid.force_types if force_type is None else (force_type,)
    cols = []
    for m in types:
        pts = grid.points_of(m)
        c = grid.components[m]
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        K = np.exp(-d2 / (2 * coherence_length**2))
        white = rng.standard_normal((len(pts), c, n_fields)) + 1j * rng.standard_normal((len(pts), c, n_fields))
        smooth = np.einsum("jk,ksn->jsn", K, white)
        cols.append(smooth.reshape(len(pts) * c, n_fields))
    return np.vstack(cols)


def random_psd_system(
    grid: SampleGrid,
    spectrum: Sequence[float],
    coherence_length: float = 1.0,
    seed: int = 0,
    force_type: int | None = 1,
    omega0: float = 1.0,
    return_modes: bool = False,
):
    """Random PSD tensor with prescribed responsivities and smooth modes.

    Modes are orthonormalised Gaussian-correlated random fields.  With
    ``force_type=None`` they span both domains and the result has cross
    blocks; otherwise only the ``force_type`` self block is populated.
    """
    alphas = np.asarray(spectrum, dtype=float).reshape(-1)
    if np.any(alphas < 0):
        raise PreconditionError("non-PSD spectrum: responsivities must be non-negative")
    if np.any(np.diff(alphas) > 0):
        raise PreconditionError("spectrum must be non-increasing")
    if not coherence_length > 0:
        raise PreconditionError("coherence length must be positive")
    n = grid.total_dim if force_type is None else grid.dim(force_type)
    k = alphas.size
    if k > n:
        raise DimensionError(f"{k} modes requested but the state dimension is {n}")
    rng = np.random.default_rng(seed)
    if k == 0:
        V = np.zeros((n, 0), dtype=complex)
    else:
        X = smooth_random_fields(grid, k, coherence_length, rng, force_type)
        V, R = np.linalg.qr(X)
        # QR is unique up to column phases; pin them for determinism across LAPACKs
        ph = np.diag(R)
        V = V * np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    D = (V * alphas) @ V.conj().T
    D = 0.5 * (D + D.conj().T)
    if force_type is None:
        T = BlockResponseMatrix.from_full(grid, D, omega0)
    else:
        T = BlockResponseMatrix(grid, {(force_type, force_type): D}, omega0)
    if return_modes:
        return T, alphas, V
    return T
