"""
Response-tensor recovery from measured matrix elements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MaskError, PreconditionError
from .interferometer import FOUR_PHASES, MeasuredMatrix
from .modes import ModeSet, principal_angles
from .sources import TAU_SVD, DualBasis, SourceCatalog, dual_basis
from .tensor import BlockResponseMatrix, SampleGrid, full_matrix


@dataclass
class ReconstructionResult:
    """Recovered tensor ``D' = F~ M F~^H`` and its diagnostics."""

    tensor: BlockResponseMatrix
    projector: np.ndarray
    rank: int
    singular_values: np.ndarray
    min_eigenvalue: float
    psd_violation: float
    noise_estimate: float | None = None
    clipped: bool = False
    residuals: dict = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return self.tensor.full

    def diagnostics(self) -> dict:
        out = {
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
            "filter_spectrum": np.linalg.eigvalsh(self.projector)[::-1].tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "psd_violation": self.psd_violation,
            "noise_estimate": self.noise_estimate,
            "clipped": self.clipped,
        }
        out.update(self.residuals)
        return out


def measurement_filter(F, tol: float = TAU_SVD):
    """Projector ``U_r U_r^H`` onto the span of the retained source fields.

    Returns ``(P, s)`` with ``s`` the full singular spectrum of ``F``.
    """
    duals = F if isinstance(F, DualBasis) else dual_basis(F, tol)
    P = duals.projector()
    return 0.5 * (P + P.conj().T), duals.s


def propagated_noise(measured: MeasuredMatrix, duals: DualBasis) -> float:
    """First-order standard deviation (Frobenius) of ``D'`` due to power noise.

    Each reading ``P`` carries variance ``(sigma P)^2``.  The four-phase
    extraction maps these onto ``Var Re M_ab`` and ``Var Im M_ab``; the linear
    map ``M -> F~ M F~^H`` then carries the entry variances to ``D'``.
    """
    sigma = measured.noise
    n = measured.n
    if sigma == 0:
        return 0.0
    w = measured.omega0
    var = np.zeros((n, n))
    var[np.arange(n), np.arange(n)] = (sigma * measured.singles / (2 * w)) ** 2
    for rec in measured.fringes:
        i, j = rec.pair
        p = {k: rec.power_at(ph) for k, ph in enumerate(FOUR_PHASES)}
        v_re = sigma**2 * (p[0] ** 2 + p[2] ** 2) / (8 * w) ** 2
        v_im = sigma**2 * (p[1] ** 2 + p[3] ** 2) / (8 * w) ** 2
        var[i, j] = v_re + v_im
        if measured.strategy != "ordered-pairs":
            var[j, i] = var[i, j]
    A = np.abs(duals.matrix) ** 2
    # Var D'_pq ~ sum_ab |F~_pa|^2 |F~_qb|^2 Var M_ab (entries treated as independent)
    vD = A @ var @ A.T
    return float(np.sqrt(vD.sum()))


def reconstruct_response(
    measured,
    duals: DualBasis,
    grid: SampleGrid | None = None,
    omega0: float | None = None,
    clip_psd: bool = False,
    ground_truth=None,
) -> ReconstructionResult:
    """Deconvolve the source patterns: ``D' = F~ M F~^H``, Hermitian-symmetrised.

    The measurement mask must be complete; partial campaigns feed
    :func:`eai.interferometer.visibility_map` instead.  ``clip_psd`` zeroes
    negative eigenvalues of the result.  With ``ground_truth`` the residuals
    against ``D`` and against ``P D P`` are reported.
    """
    if isinstance(measured, MeasuredMatrix):
        if not measured.complete:
            raise MaskError(f"measured matrix has {int((~measured.mask).sum())} unmeasured entries")
        M = measured.M
        w = measured.omega0 if omega0 is None else omega0
    else:
        M = np.asarray(measured, dtype=complex)
        w = 1.0 if omega0 is None else omega0
    Ft = duals.matrix
    if M.shape != (Ft.shape[1], Ft.shape[1]):
        raise DimensionError(f"measured matrix {M.shape} does not match {Ft.shape[1]} dual vectors")
    Dr = Ft @ M @ Ft.conj().T
    Dr = 0.5 * (Dr + Dr.conj().T)
    eig, vecs = np.linalg.eigh(Dr)
    lam_min = float(eig.min())
    violation = max(0.0, -lam_min)
    if clip_psd and lam_min < 0:
        Dr = (vecs * np.clip(eig, 0, None)) @ vecs.conj().T
        Dr = 0.5 * (Dr + Dr.conj().T)
    if grid is None:
        grid = ground_truth.grid if isinstance(ground_truth, BlockResponseMatrix) else SampleGrid.line(Dr.shape[0])
    tensor = BlockResponseMatrix.from_full(grid, Dr, w)
    P = duals.projector()
    result = ReconstructionResult(tensor, P, duals.rank, duals.s, lam_min, violation, clipped=clip_psd and lam_min < 0)
    if isinstance(measured, MeasuredMatrix) and measured.noise > 0 and measured.fringes:
        result.noise_estimate = propagated_noise(measured, duals)
    if ground_truth is not None:
        D = full_matrix(ground_truth)
        nD = max(np.linalg.norm(D), 1e-300)
        result.residuals = {
            "relative_error": float(np.linalg.norm(Dr - D) / nD),
            "filter_residual": float(np.linalg.norm(Dr - P @ D @ P) / nD),
        }
    return result


class IncrementalDualBasis:
    """Thin SVD of a growing source matrix, updated one column at a time.

    Each :meth:`add` is a rank-one column append (Brand's update); every
    ``reorth_every`` updates the factors are re-orthogonalised by QR.
    """

    def __init__(self, dim: int, tol: float = TAU_SVD, reorth_every: int = 32):
        self.dim = int(dim)
        self.tol = tol
        self.reorth_every = reorth_every
        self.U = np.zeros((self.dim, 0), dtype=complex)
        self.s = np.zeros(0)
        self.V = np.zeros((0, 0), dtype=complex)
        self.ids = []
        self.last_residual = 0.0
        self._updates = 0

    @property
    def n_sources(self) -> int:
        return len(self.ids)

    @property
    def rank(self) -> int:
        if self.s.size == 0 or self.s[0] == 0:
            return 0
        return int(np.count_nonzero(self.s >= self.tol * self.s[0]))

    @property
    def duals(self) -> DualBasis:
        return DualBasis.from_factors(self.U, self.s, self.V.conj().T, self.tol)

    def matrix(self) -> np.ndarray:
        """Source matrix reassembled from the factors."""
        return (self.U * self.s) @ self.V.conj().T

    @classmethod
    def from_catalog(cls, catalog: SourceCatalog, tol: float = TAU_SVD, reorth_every: int = 32):
        inc = cls(catalog.grid.total_dim, tol, reorth_every)
        for e in catalog:
            inc.add(e.vector.embed(), e.source_id)
        return inc

    def add(self, column, source_id=None) -> list:
        """Append one source column and return the new measurements it needs.

        The plan lists ``(new, j)`` fringes against every existing column
        followed by the ``(new, new)`` single-source reading.  The norm of the
        component orthogonal to the current span is kept in
        ``last_residual``; a column inside the span leaves the factors at
        their current rank.
        """
        c = np.asarray(getattr(column, "embed", lambda: column)(), dtype=complex).reshape(-1)
        if c.shape[0] != self.dim:
            raise DimensionError(f"column has length {c.shape[0]}, state dimension is {self.dim}")
        sid = len(self.ids) if source_id is None else source_id
        if sid in self.ids:
            raise PreconditionError(f"duplicate source id {sid}")
        if not np.any(c):
            raise PreconditionError("cannot add an all-zero source column")
        new = len(self.ids)
        k = self.V.shape[0]
        if self.s.size == 0:
            nc = np.linalg.norm(c)
            self.last_residual = float(nc)
            self.U = (c / nc)[:, None]
            self.s = np.array([nc])
            self.V = np.ones((1, 1), dtype=complex)
        else:
            p = self.U.conj().T @ c
            r = c - self.U @ p
            dp = self.U.conj().T @ r  # second Gram-Schmidt pass
            r -= self.U @ dp
            p += dp
            rho = np.linalg.norm(r)
            # singular value the new direction would contribute on its own
            self.last_residual = float(rho)
            r_dim = self.s.size
            Vext = np.zeros((k + 1, r_dim + 1), dtype=complex)
            Vext[:k, :r_dim] = self.V
            Vext[k, r_dim] = 1.0
            scale = max(np.linalg.norm(c), self.s[0])
            if rho > 1e-12 * scale and r_dim < self.dim:
                K = np.zeros((r_dim + 1, r_dim + 1), dtype=complex)
                K[:r_dim, :r_dim] = np.diag(self.s)
                K[:r_dim, r_dim] = p
                K[r_dim, r_dim] = rho
                Uk, sk, Vkh = np.linalg.svd(K)
                self.U = np.column_stack([self.U, r / rho]) @ Uk
                self.V = Vext @ Vkh.conj().T
            else:
                K = np.column_stack([np.diag(self.s), p]).astype(complex)
                Uk, sk, Vkh = np.linalg.svd(K, full_matrices=False)
                self.U = self.U @ Uk
                self.V = Vext @ Vkh.conj().T
            self.s = sk
        self.ids.append(sid)
        self._updates += 1
        if self.reorth_every and self._updates % self.reorth_every == 0:
            self._reorthogonalize()
        return [(new, j) for j in range(new)] + [(new, new)]

    def _reorthogonalize(self):
        Qu, Ru = np.linalg.qr(self.U)
        Qv, Rv = np.linalg.qr(self.V)
        Us, s, Vsh = np.linalg.svd((Ru * self.s) @ Rv.conj().T)
        self.U = Qu @ Us
        self.V = Qv @ Vsh.conj().T
        self.s = s


def extend_measured(M_old: np.ndarray, measurements: dict, plan: list) -> np.ndarray:
    """Grow an ``N x N`` measured matrix by one source using the entries of ``plan``.

    ``measurements`` maps each planned pair ``(new, j)`` to ``M_new,j``.
    """
    n = M_old.shape[0]
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[:n, :n] = M_old
    for pair in plan:
        i, j = pair
        v = measurements[pair]
        M[i, j] = v
        M[j, i] = np.conj(v)
    return M


def convergence_metric(previous: ModeSet, current: ModeSet, k: int) -> float:
    """Distance between two top-``k`` mode estimates, 0 when converged.

    The largest principal angle between the top-``k`` subspaces, normalised
    by ``pi/2``, plus the relative change of the leading ``k`` responsivities;
    clipped to ``[0, 1]``.
    """
    if k < 1 or k > len(previous) or k > len(current):
        raise PreconditionError(f"top-{k} comparison needs at least {k} modes in both sets")
    if previous.vectors.shape[0] != current.vectors.shape[0]:
        raise DimensionError("mode sets live on different grids")
    ang = principal_angles(previous.top(k), current.top(k))
    a0, a1 = previous.spectrum[:k], current.spectrum[:k]
    den = np.linalg.norm(a1)
    dspec = float(np.linalg.norm(a1 - a0) / den) if den > 0 else float(np.linalg.norm(a0) > 0)
    val = float(np.max(ang)) / (np.pi / 2) + dspec
    return float(min(1.0, max(0.0, val)))
