"""
Natural-mode decompositions of response tensors and coupled-mode power.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .errors import DimensionError, PreconditionError
from .tensor import TAU_HERM, BlockResponseMatrix, full_matrix

DEGENERACY_GAP = 1e-8
DEFAULT_ETA = 0.999


@dataclass
class ModeSet:
    """Decomposition of a tensor block into weighted modes.

    For ``kind`` ``"self-eigen"`` and ``"joint"``, ``vectors`` holds
    orthonormal eigenvectors as columns.  For ``"cross-svd"``, ``vectors``
    holds the domain-1 partners and ``right_vectors`` the domain-2 partners,
    so that the block is ``vectors @ diag(spectrum) @ right_vectors^H``.
    ``splits`` gives the row counts of each domain for joint sets.
    """

    kind: str
    spectrum: np.ndarray
    vectors: np.ndarray
    right_vectors: np.ndarray | None = None
    clusters: list = field(default_factory=list)
    splits: tuple = ()

    def __len__(self):
        return int(self.spectrum.size)

    def top(self, k):
        if k > len(self):
            raise PreconditionError(f"{k} modes requested, only {len(self)} available")
        return self.vectors[:, :k]

    def part(self, m):
        """Rows of the mode vectors belonging to domain ``m`` (joint sets)."""
        if not self.splits:
            return self.vectors
        o = sum(self.splits[: m - 1])
        return self.vectors[o:o + self.splits[m - 1]]

    def to_matrix(self) -> np.ndarray:
        right = self.vectors if self.right_vectors is None else self.right_vectors
        return (self.vectors * self.spectrum) @ right.conj().T


def _fix_phase(V):
    """Rotate each column so that its largest-modulus entry is real positive."""
    if V.size == 0:
        return V, np.ones(V.shape[1], dtype=complex)
    idx = np.argmax(np.abs(V), axis=0)
    piv = V[idx, np.arange(V.shape[1])]
    ph = np.where(np.abs(piv) > 0, np.abs(piv) / np.where(piv == 0, 1, piv), 1.0)
    return V * ph[None, :], ph


def _clusters(spectrum, gap=DEGENERACY_GAP):
    if spectrum.size < 2:
        return []
    scale = max(float(np.max(np.abs(spectrum))), 1e-300)
    out, cur = [], [0]
    for i in range(1, spectrum.size):
        if abs(spectrum[i - 1] - spectrum[i]) <= gap * scale:
            cur.append(i)
        else:
            if len(cur) > 1:
                out.append(cur)
            cur = [i]
    if len(cur) > 1:
        out.append(cur)
    return out


def _hermitian_or_raise(a, tau):
    r = np.max(np.abs(a - a.conj().T), initial=0.0)
    if r > tau * max(np.linalg.norm(a), 1e-300):
        raise PreconditionError(f"block is not Hermitian (residual {r:.3e})")


def _eigen(a, kind, tau_herm, splits=()):
    _hermitian_or_raise(a, tau_herm)
    w, V = np.linalg.eigh(0.5 * (a + a.conj().T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    V, _ = _fix_phase(V)
    return ModeSet(kind, w, V, None, _clusters(w), splits)


def natural_modes(D, force_type: int = 1, tau_herm: float = TAU_HERM) -> ModeSet:
    """Eigen-decomposition of a self block, responsivities in descending order.

    ``D`` is a square array (the self block itself) or a
    :class:`BlockResponseMatrix`, in which case block ``(m, m)`` is used.
    """
    a = D.block(force_type, force_type) if isinstance(D, BlockResponseMatrix) else full_matrix(D)
    return _eigen(np.asarray(a, dtype=complex), "self-eigen", tau_herm)


def cross_modes(block, rtol: float = 1e-10) -> ModeSet:
    """Singular-value decomposition of a cross block into coherent field pairs.

    Pairs with weight below ``rtol`` times the largest are dropped; a zero
    block yields an empty set.
    """
    if isinstance(block, BlockResponseMatrix):
        block = block.block(1, 2)
    a = np.asarray(block, dtype=complex)
    if a.ndim != 2:
        raise DimensionError("cross block must be 2-d")
    if a.size == 0:
        s = np.zeros(0)
        return ModeSet("cross-svd", s, np.zeros((a.shape[0], 0), complex), np.zeros((a.shape[1], 0), complex))
    U, s, Vh = np.linalg.svd(a, full_matrices=False)
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros(s.shape, bool)
    U, s, V = U[:, keep], s[keep], Vh[keep].conj().T
    U, ph = _fix_phase(U)
    V = V * ph[None, :]
    return ModeSet("cross-svd", s, U, V, _clusters(s))


def joint_modes(D, tau_herm: float = TAU_HERM) -> ModeSet:
    """Eigen-decomposition of the assembled tensor over both domains."""
    if isinstance(D, BlockResponseMatrix):
        splits = tuple(D.grid.dim(m) for m in D.grid.force_types)
        a = D.full
    else:
        a = full_matrix(D)
        splits = (a.shape[0],)
    return _eigen(np.asarray(a, dtype=complex), "joint", tau_herm, splits)


def coupling_matrix(system: ModeSet, force: ModeSet, splits=None):
    """Mode-overlap matrices ``S^m_ij = sum_{r in V_m} d_i(r) conj(f_j(r))``.

    Returns ``(S, t)`` where ``S`` is the stack of per-domain overlaps with
    shape ``(n_domains, n_system, n_force)`` and
    ``t_ij = |sum_m S^m_ij|^2``.
    """
    if system.vectors.shape[0] != force.vectors.shape[0]:
        raise DimensionError("system and force modes live on different state spaces")
    splits = tuple(splits or system.splits or force.splits or (system.vectors.shape[0],))
    if sum(splits) != system.vectors.shape[0]:
        raise DimensionError("domain splits do not add up to the state dimension")
    S = []
    o = 0
    for n in splits:
        d = system.vectors[o:o + n]
        f = force.vectors[o:o + n]
        S.append(d.T @ f.conj())
        o += n
    S = np.stack(S)
    tot = S.sum(axis=0)
    t = (tot * tot.conj()).real
    return S, t


def modal_power(alpha, beta, t, omega0: float = 1.0) -> float:
    """Coupled-mode power ``2 w sum_ij alpha_i beta_j t_ij``.

    ``t`` is either the joint scattering matrix or ``|S|^2`` for one force.
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    t = np.asarray(t)
    if t.shape != (alpha.size, beta.size):
        raise DimensionError(f"scattering matrix shape {t.shape} does not match ({alpha.size}, {beta.size})")
    return float(2 * omega0 * np.real(alpha @ t @ beta))


def wrap_scattering(D, G, grid=None):
    """Whole-sample response ``K = G^H D G``.

    Returns a :class:`BlockResponseMatrix` when ``grid`` is given (or when
    ``D`` is one and ``G`` is square), otherwise an array.
    """
    a = full_matrix(D)
    G = np.asarray(G, dtype=complex)
    if G.ndim != 2 or G.shape[0] != a.shape[0]:
        raise DimensionError(f"scattering matrix rows {G.shape[0]} do not match tensor dimension {a.shape[0]}")
    K = G.conj().T @ a @ G
    K = 0.5 * (K + K.conj().T)
    if grid is None and isinstance(D, BlockResponseMatrix) and G.shape[0] == G.shape[1]:
        grid = D.grid
    if grid is not None:
        return BlockResponseMatrix.from_full(grid, K, getattr(D, "omega0", 1.0))
    return K


@dataclass
class CrossProjection:
    coefficients: dict
    captured: dict

    def captured_fraction(self, m):
        return self.captured[m]


def project_cross_onto_self(cross: ModeSet, self_1: ModeSet, self_2: ModeSet, rtol: float = 1e-10) -> CrossProjection:
    """Expand the cross-mode partners in the self-mode bases of each domain.

    ``coefficients[m][i, k] = <d_k^m, d'_i^m>`` and ``captured[m][i]`` is the
    fraction of cross mode ``i`` lying in the span of the retained self modes
    (those with responsivity above ``rtol`` times the largest; ``rtol=0``
    keeps all of them).
    """
    if cross.kind != "cross-svd":
        raise PreconditionError("first argument must be a cross-svd mode set")
    coeffs, caps = {}, {}
    for m, parts, base in ((1, cross.vectors, self_1), (2, cross.right_vectors, self_2)):
        if base.vectors.shape[0] != parts.shape[0]:
            raise DimensionError(f"domain {m}: self modes and cross modes have different lengths")
        if rtol > 0 and len(base):
            keep = base.spectrum > rtol * max(float(np.max(np.abs(base.spectrum))), 1e-300)
        else:
            keep = np.ones(len(base), bool)
        B = base.vectors[:, keep]
        c = parts.T @ B.conj()  # c[i, k] = B_k^H d'_i
        coeffs[m] = c
        caps[m] = np.sum(np.abs(c) ** 2, axis=1)
    return CrossProjection(coeffs, caps)


def range_inclusion(self_block, cross_block, rtol: float = 1e-10, side: str = "left") -> float:
    """Fraction of the cross block's energy outside the range of the self block.

    ``side="left"`` tests the columns of ``D12`` against ``range(D11)``;
    ``"right"`` tests the rows against ``range(D22)``.  Zero means the
    cross block is fully spanned.
    """
    X = np.asarray(cross_block, dtype=complex)
    if side == "right":
        X = X.conj().T
    w, V = np.linalg.eigh(np.asarray(self_block, dtype=complex))
    keep = w > rtol * max(float(np.max(np.abs(w))), 1e-300)
    B = V[:, keep]
    total = np.linalg.norm(X) ** 2
    if total == 0:
        return 0.0
    resid = X - B @ (B.conj().T @ X)
    return float(np.linalg.norm(resid) ** 2 / total)


def mode_count(spectrum, eta: float = DEFAULT_ETA) -> int:
    """Smallest ``I`` whose leading ``sum alpha_i^2`` reaches ``eta`` of the total."""
    if not 0 < eta <= 1:
        raise PreconditionError("energy fraction must lie in (0, 1]")
    a = np.asarray(spectrum, dtype=float).reshape(-1)
    e = np.cumsum(a**2)
    if a.size == 0 or e[-1] == 0:
        return 0
    target = eta * e[-1] * (1 - 1e-12)
    return int(np.searchsorted(e, target, side="left") + 1)


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (radians, descending) between the column spans of A and B."""
    return subspace_angles(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))
