"""
Sample grids, force vectors and block-Hermitian response tensors.

The state space for force type ``m`` is the concatenation of ``c_m``
components at each of the ``J_m`` points of domain ``m``; the component
``s`` of point ``j`` lives at index ``j * c_m + s``.  When two force types
are present, the assembled tensor is ordered ``[type 1 | type 2]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DimensionError, LatticeError, PreconditionError

TAU_HERM = 1e-10
TAU_PSD = 1e-10

BLOCK_ORDER = ((1, 1), (1, 2), (2, 1), (2, 2))


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_finite(a, what="array"):
    if not np.all(np.isfinite(a)):
        raise DataError(f"{what} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Regular lattice with nodes at ``origin + n * spacing``, ``0 <= n < shape``."""

    origin: np.ndarray
    spacing: np.ndarray
    shape: tuple

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        spacing = np.asarray(self.spacing, dtype=float).reshape(3)
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or min(shape) < 1:
            raise LatticeError(f"lattice shape must be three positive ints, got {shape}")
        if np.any(spacing <= 0):
            raise LatticeError("lattice spacing must be positive")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "shape", shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def nodes(self) -> np.ndarray:
        """Node positions in C order, shape ``(size, 3)``."""
        idx = np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=1)
        return self.origin + idx * self.spacing

    def multi_index(self, points, rtol=1e-9) -> np.ndarray:
        """Integer lattice coordinates of ``points``; raises if any is off-lattice."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        rel = (pts - self.origin) / self.spacing
        idx = np.rint(rel)
        if np.any(np.abs(rel - idx) > rtol) or np.any(idx < 0) or np.any(idx >= np.array(self.shape)):
            raise LatticeError("grid point does not coincide with a lattice node")
        return idx.astype(int)

    def kvectors(self) -> np.ndarray:
        """Reciprocal wavevectors ``2 pi n / (N spacing)`` in C order over ``n``."""
        idx = np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=1)
        extent = np.array(self.shape) * self.spacing
        return 2 * np.pi * idx / extent

    def reciprocal_period(self) -> np.ndarray:
        return 2 * np.pi / self.spacing

    def to_dict(self):
        return {"origin": self.origin.tolist(), "spacing": self.spacing.tolist(), "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["origin"], d["spacing"], tuple(d["shape"]))


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Discretisation of one or two force domains.

    Parameters
    ----------
    points : array_like, shape (P, 3)
        Positions of every sample point, both domains together.
    domain_ids : array_like of int, shape (P,)
        1 or 2 for each point.  Overlapping domains are expressed by listing
        the shared position once per domain.
    components : mapping
        ``{force_type: c}`` with ``c`` in {1, 3}.
    lattice : Lattice, optional
        Required by the k-domain operations and plane-wave probes.
    """

    points: np.ndarray
    domain_ids: np.ndarray
    components: Mapping[int, int] = field(default_factory=lambda: {1: 1})
    lattice: Lattice | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionError("points must have shape (P, 3)")
        _check_finite(pts, "points")
        ids = np.asarray(self.domain_ids, dtype=int).reshape(-1)
        if ids.shape[0] != pts.shape[0]:
            raise DimensionError("one domain id per point is required")
        if not set(np.unique(ids)) <= {1, 2}:
            raise DimensionError("domain ids must be 1 or 2")
        comps = {int(m): int(c) for m, c in dict(self.components).items()}
        for m in np.unique(ids):
            comps.setdefault(int(m), 1)
        for m, c in comps.items():
            if c not in (1, 3):
                raise DimensionError(f"components per point must be 1 or 3, got {c}")
        present = sorted(int(m) for m in np.unique(ids))
        if not present:
            raise DimensionError("grid has no points")
        pts.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain_ids", ids)
        object.__setattr__(self, "components", {m: comps[m] for m in present})
        if self.lattice is not None:
            self.lattice.multi_index(pts)

    # --- constructors -------------------------------------------------

    @classmethod
    def line(cls, n, spacing=1.0, components=1, domain=1):
        """``n`` points along x forming a 1D lattice (periodic for DFT purposes)."""
        lat = Lattice((0, 0, 0), (spacing, 1, 1), (n, 1, 1))
        return cls(lat.nodes(), np.full(n, domain), {domain: components}, lat)

    @classmethod
    def from_lattice(cls, lattice, components=1, domain=1):
        n = lattice.size
        return cls(lattice.nodes(), np.full(n, domain), {domain: components}, lattice)

    @classmethod
    def two_domain(cls, n1, n2, components=(1, 1), spacing=1.0, gap=0.0):
        """Two disjoint collinear domains; domain 2 starts ``gap`` after domain 1."""
        x1 = np.arange(n1) * spacing
        x2 = x1[-1] + spacing + gap + np.arange(n2) * spacing if n1 else np.arange(n2) * spacing
        pts = np.zeros((n1 + n2, 3))
        pts[:n1, 0] = x1
        pts[n1:, 0] = x2
        ids = np.r_[np.ones(n1, int), np.full(n2, 2)]
        return cls(pts, ids, {1: components[0], 2: components[1]})

    # --- layout --------------------------------------------------------

    @property
    def force_types(self) -> tuple:
        return tuple(self.components)

    def n_points(self, m=1) -> int:
        return int(np.count_nonzero(self.domain_ids == m))

    def points_of(self, m=1) -> np.ndarray:
        return self.points[self.domain_ids == m]

    def dim(self, m=1) -> int:
        return self.components.get(m, 0) * self.n_points(m)

    @property
    def total_dim(self) -> int:
        return sum(self.dim(m) for m in self.force_types)

    def offset(self, m) -> int:
        return sum(self.dim(k) for k in self.force_types if k < m)

    def slice(self, m) -> slice:
        o = self.offset(m)
        return slice(o, o + self.dim(m))

    def state_index(self, j, s=0, m=1) -> int:
        """Index of component ``s`` of point ``j`` (within domain ``m``) in the full vector."""
        c = self.components.get(m)
        if c is None:
            raise DimensionError(f"grid has no force type {m}")
        if not 0 <= j < self.n_points(m):
            raise DimensionError(f"point index {j} out of range for domain {m}")
        if not 0 <= s < c:
            raise DimensionError(f"axis {s} out of range for {c} components")
        return self.offset(m) + j * c + s

    def require_lattice(self) -> Lattice:
        if self.lattice is None:
            raise LatticeError("operation requires a grid with a regular lattice")
        return self.lattice

    def same_layout(self, other) -> bool:
        return other is self or (
            self.components == other.components
            and np.array_equal(self.domain_ids, other.domain_ids)
            and np.array_equal(self.points, other.points)
        )

    def to_dict(self):
        return {
            "points": self.points.tolist(),
            "domain_ids": self.domain_ids.tolist(),
            "components": {str(m): c for m, c in self.components.items()},
            "lattice": None if self.lattice is None else self.lattice.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        lat = d.get("lattice")
        return cls(
            np.asarray(d["points"], dtype=float).reshape(-1, 3),
            d["domain_ids"],
            {int(m): int(c) for m, c in d["components"].items()},
            None if lat is None else Lattice.from_dict(lat),
        )


@dataclass(frozen=True, eq=False)
class ForceVector:
    """Complex force amplitudes of one force type over its domain."""

    grid: SampleGrid
    amplitudes: np.ndarray
    force_type: int = 1
    omega0: float | None = None

    def __post_init__(self):
        a = _readonly(np.asarray(self.amplitudes).reshape(-1))
        if a.shape[0] != self.grid.dim(self.force_type):
            raise DimensionError(
                f"force vector has length {a.shape[0]}, domain {self.force_type} needs {self.grid.dim(self.force_type)}"
            )
        _check_finite(a, "force vector")
        object.__setattr__(self, "amplitudes", a)

    def embed(self) -> np.ndarray:
        """The vector placed in the full (all force types) state space."""
        out = np.zeros(self.grid.total_dim, dtype=complex)
        out[self.grid.slice(self.force_type)] = self.amplitudes
        return out

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


class BlockResponseMatrix:
    """Hermitian block response tensor ``[[D11, D12], [D21, D22]]`` on a grid.

    Blocks are stored read-only.  Absent blocks (``None``) are treated as zero
    in the assembled matrix; Hermiticity and PSD are checked by
    :func:`validate`, not enforced here.
    """

    def __init__(self, grid: SampleGrid, blocks: Mapping, omega0: float = 1.0):
        self.grid = grid
        self.omega0 = float(omega0)
        types = grid.force_types
        stored = {}
        for key, value in blocks.items():
            m, n = _block_key(key)
            if m not in types or n not in types:
                raise DimensionError(f"block {m}{n} refers to a force type absent from the grid")
            if value is None:
                continue
            a = _readonly(value)
            if a.shape != (grid.dim(m), grid.dim(n)):
                raise DimensionError(f"block {m}{n} has shape {a.shape}, expected {(grid.dim(m), grid.dim(n))}")
            _check_finite(a, f"block {m}{n}")
            stored[(m, n)] = a
        self._blocks = stored
        self._full = None

    @classmethod
    def from_full(cls, grid, full, omega0=1.0):
        full = np.asarray(full)
        n = grid.total_dim
        if full.shape != (n, n):
            raise DimensionError(f"full matrix has shape {full.shape}, grid needs {(n, n)}")
        blocks = {}
        types = grid.force_types
        for m in types:
            for k in types:
                blocks[(m, k)] = full[grid.slice(m), grid.slice(k)]
        return cls(grid, blocks, omega0)

    def has_block(self, m, n) -> bool:
        return (m, n) in self._blocks

    def block(self, m, n) -> np.ndarray:
        if (m, n) in self._blocks:
            return self._blocks[(m, n)]
        return np.zeros((self.grid.dim(m), self.grid.dim(n)), dtype=complex)

    @property
    def blocks(self) -> dict:
        return dict(self._blocks)

    @property
    def full(self) -> np.ndarray:
        if self._full is None:
            g = self.grid
            out = np.zeros((g.total_dim, g.total_dim), dtype=complex)
            for (m, n), a in self._blocks.items():
                out[g.slice(m), g.slice(n)] = a
            out.setflags(write=False)
            self._full = out
        return self._full

    @property
    def shape(self):
        return self.full.shape

    def norm(self) -> float:
        return float(np.linalg.norm(self.full))

    def with_full(self, full):
        """A new tensor on the same grid and frequency."""
        return BlockResponseMatrix.from_full(self.grid, full, self.omega0)

    def __repr__(self):
        present = ",".join(f"{m}{n}" for m, n in BLOCK_ORDER if (m, n) in self._blocks)
        return f"BlockResponseMatrix(dim={self.grid.total_dim}, blocks=[{present}], omega0={self.omega0})"


def _block_key(key):
    if isinstance(key, str):
        return int(key[0]), int(key[1])
    m, n = key
    return int(m), int(n)


def full_matrix(D) -> np.ndarray:
    """Assembled matrix of a tensor, coherence matrix or plain array."""
    if isinstance(D, (BlockResponseMatrix, CoherenceMatrix)):
        return D.full
    a = np.asarray(D, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def force_array(f, dim=None) -> np.ndarray:
    """Full-state vector from a ForceVector, a sequence of them, or an array."""
    if isinstance(f, ForceVector):
        v = f.embed()
    elif isinstance(f, (list, tuple)) and f and all(isinstance(x, ForceVector) for x in f):
        v = sum(x.embed() for x in f)
    else:
        v = np.asarray(f, dtype=complex).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"force has dimension {v.shape[0]}, tensor has {dim}")
    _check_finite(v, "force")
    return v


class CoherenceMatrix:
    """Second-order correlation matrix ``<f f^H>`` of the applied forces."""

    def __init__(self, grid: SampleGrid, full, tau_herm=TAU_HERM, tau_psd=TAU_PSD):
        a = _readonly(full)
        n = grid.total_dim
        if a.shape != (n, n):
            raise DimensionError(f"coherence matrix has shape {a.shape}, grid needs {(n, n)}")
        _check_finite(a, "coherence matrix")
        scale = np.linalg.norm(a)
        if np.max(np.abs(a - a.conj().T), initial=0.0) > tau_herm * max(scale, 1e-300):
            raise PreconditionError("coherence matrix is not Hermitian")
        if n and np.linalg.eigvalsh(a).min() < -tau_psd * scale:
            raise PreconditionError("coherence matrix is not positive semidefinite")
        self.grid = grid
        self.full = a

    @classmethod
    def from_forces(cls, grid, forces, weights=None):
        """Incoherent superposition ``sum_j w_j f_j f_j^H`` of coherent forces."""
        vecs = [force_array(f, grid.total_dim) for f in forces]
        w = np.ones(len(vecs)) if weights is None else np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise PreconditionError("ensemble weights must be non-negative")
        n = grid.total_dim
        full = np.zeros((n, n), dtype=complex)
        for wj, v in zip(w, vecs):
            full += wj * np.outer(v, v.conj())
        return cls(grid, full)

    def block(self, m, n):
        return self.full[self.grid.slice(m), self.grid.slice(n)]


def anti_hermitian_part(chi, grid: SampleGrid | None = None, omega0: float = 1.0) -> BlockResponseMatrix:
    """Dissipative part ``(chi - chi^H) / 2i`` of a full susceptibility matrix.

    ``chi`` may be the assembled matrix or a mapping of blocks ``{(m, n): chi_mn}``.
    Blockwise this is ``D_mn = (chi_mn - chi_nm^H) / 2i``.  Without a grid a
    scalar line grid of matching size is used.
    """
    if isinstance(chi, Mapping):
        if grid is None:
            raise DimensionError("a grid is required when chi is given as blocks")
        n = grid.total_dim
        full = np.zeros((n, n), dtype=complex)
        for key, value in chi.items():
            m, k = _block_key(key)
            value = np.asarray(value, dtype=complex)
            if value.shape != (grid.dim(m), grid.dim(k)):
                raise DimensionError(f"chi block {m}{k} has shape {value.shape}")
            full[grid.slice(m), grid.slice(k)] = value
    else:
        full = np.asarray(chi, dtype=complex)
        if full.ndim != 2 or full.shape[0] != full.shape[1]:
            raise DimensionError(f"chi must be square, got shape {full.shape}")
        if grid is None:
            grid = SampleGrid.line(full.shape[0])
        elif full.shape[0] != grid.total_dim:
            raise DimensionError(f"chi has dimension {full.shape[0]}, grid needs {grid.total_dim}")
    _check_finite(full, "chi")
    D = (full - full.conj().T) / 2j
    # exact Hermiticity regardless of rounding in the subtraction
    D = 0.5 * (D + D.conj().T)
    return BlockResponseMatrix.from_full(grid, D, omega0)


@dataclass
class ValidationReport:
    hermiticity_residual: float
    onsager_residual: float
    min_eigenvalue: float
    norm: float
    hermitian_ok: bool
    onsager_ok: bool
    psd_ok: bool
    tau_herm: float
    tau_psd: float

    @property
    def passed(self) -> bool:
        return self.hermitian_ok and self.onsager_ok and self.psd_ok

    def to_dict(self):
        return {
            "hermiticity_residual": self.hermiticity_residual,
            "onsager_residual": self.onsager_residual,
            "min_eigenvalue": self.min_eigenvalue,
            "norm": self.norm,
            "hermitian_ok": self.hermitian_ok,
            "onsager_ok": self.onsager_ok,
            "psd_ok": self.psd_ok,
            "passed": self.passed,
            "tau_herm": self.tau_herm,
            "tau_psd": self.tau_psd,
        }

    def summary(self) -> str:
        flag = lambda ok: "ok" if ok else "FAIL"  # noqa: E731
        return (
            f"hermiticity residual {self.hermiticity_residual:.3e} [{flag(self.hermitian_ok)}]\n"
            f"onsager residual     {self.onsager_residual:.3e} [{flag(self.onsager_ok)}]\n"
            f"min eigenvalue       {self.min_eigenvalue:.6e} [{flag(self.psd_ok)}]"
        )


def validate(D, tau_herm=TAU_HERM, tau_psd=TAU_PSD) -> ValidationReport:
    """Check Hermiticity of the self blocks, Onsager reciprocity and PSD.

    Never raises; every finding goes into the report.
    """
    if not isinstance(D, BlockResponseMatrix):
        D = BlockResponseMatrix.from_full(SampleGrid.line(full_matrix(D).shape[0]), full_matrix(D))
    herm = 0.0
    herm_ok = True
    for m in D.grid.force_types:
        a = D.block(m, m)
        r = float(np.max(np.abs(a - a.conj().T), initial=0.0))
        herm = max(herm, r)
        herm_ok &= r <= tau_herm * np.linalg.norm(a)
    full = D.full
    scale = float(np.linalg.norm(full))
    ons = 0.0
    if len(D.grid.force_types) == 2:
        ons = float(np.linalg.norm(D.block(2, 1) - D.block(1, 2).conj().T))
    ons_ok = ons <= tau_herm * scale
    eig = np.linalg.eigvalsh(0.5 * (full + full.conj().T))
    lam_min = float(eig.min())
    spec = float(np.max(np.abs(eig)))
    psd_ok = lam_min >= -tau_psd * spec
    return ValidationReport(herm, ons, lam_min, scale, bool(herm_ok), bool(ons_ok), bool(psd_ok), tau_herm, tau_psd)


def hs_norm(D) -> float:
    """Hilbert-Schmidt norm squared: the sum of squared moduli of all entries."""
    a = full_matrix(D)
    _check_finite(a, "tensor")
    return float(np.sum(a.real**2 + a.imag**2))


def _omega(D, omega0):
    w = getattr(D, "omega0", 1.0) if omega0 is None else float(omega0)
    if not w > 0:
        raise PreconditionError("angular frequency must be positive")
    return w


def absorbed_power_coherent(D, f, omega0: float | None = None) -> float:
    """Time-averaged power ``2 w0 f^H D f`` absorbed from a coherent force.

    ``f`` is a full-state array, a :class:`ForceVector`, or a sequence of
    ForceVectors of different types applied together.
    """
    a = full_matrix(D)
    w = _omega(D, omega0)
    v = force_array(f, a.shape[0])
    return float(2 * w * np.vdot(v, a @ v).real)


def absorbed_power_ensemble(D, N, omega0: float | None = None) -> float:
    """Power ``2 w0 Tr[D N^H]`` absorbed from a partially coherent force."""
    a = full_matrix(D)
    n = full_matrix(N)
    if a.shape != n.shape:
        raise DimensionError(f"tensor {a.shape} and coherence matrix {n.shape} differ in shape")
    w = _omega(D, omega0)
    # Tr[A B^H] = sum_ij A_ij conj(B_ij)
    return float(2 * w * np.vdot(n, a).real)
