"""
Probe force fields, source catalogs and dual bases.

Every catalog column is stored embedded in the full (all force types)
state space, so a single catalog can feed self- and cross-force campaigns.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, PreconditionError, RankError
from .tensor import ForceVector, SampleGrid

TAU_SVD = 1e-10


def point_probe(grid: SampleGrid, j: int, s: int = 0, amplitude: complex = 1.0, force_type: int = 1) -> ForceVector:
    """Force ``amplitude`` on component ``s`` of point ``j`` of domain ``force_type``, zero elsewhere."""
    idx = grid.state_index(j, s, force_type) - grid.offset(force_type)
    a = np.zeros(grid.dim(force_type), dtype=complex)
    a[idx] = amplitude
    return ForceVector(grid, a, force_type)


def uniform_probe(grid: SampleGrid, s: int = 0, amplitude: complex = 1.0, force_type: int = 1) -> ForceVector:
    """Spatially uniform force along axis ``s`` over the whole domain."""
    c = grid.components[force_type]
    if not 0 <= s < c:
        raise DimensionError(f"axis {s} out of range for {c} components")
    a = np.zeros((grid.n_points(force_type), c), dtype=complex)
    a[:, s] = amplitude
    return ForceVector(grid, a.reshape(-1), force_type)


def plane_wave_probe(grid: SampleGrid, k, polarization=None, amplitude: complex = 1.0, force_type: int = 1) -> ForceVector:
    """Plane wave ``a p_s exp(i k . r_j)`` sampled on a lattice grid."""
    grid.require_lattice()
    c = grid.components[force_type]
    p = np.ones(1) if polarization is None and c == 1 else np.asarray(polarization, dtype=complex).reshape(-1)
    if p.shape[0] != c:
        raise DimensionError(f"polarization has {p.shape[0]} components, force has {c}")
    if abs(np.linalg.norm(p) - 1) > 1e-12:
        raise PreconditionError("polarization must be a unit vector")
    kv = np.zeros(3)
    kk = np.asarray(k, dtype=float).reshape(-1)
    kv[: kk.size] = kk
    phase = np.exp(1j * grid.points_of(force_type) @ kv)
    return ForceVector(grid, (amplitude * phase[:, None] * p[None, :]).reshape(-1), force_type)


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    source_id: tuple
    force_type: int
    vector: ForceVector
    descriptor: dict = field(default_factory=dict)


class SourceCatalog:
    """Ordered collection of probe fields forming the columns of ``F^src``."""

    def __init__(self, grid: SampleGrid, entries: Sequence[CatalogEntry] = ()):
        self.grid = grid
        self._entries = []
        self._ids = set()
        for e in entries:
            self._append(e)
        if not self._entries:
            raise PreconditionError("a source catalog needs at least one column")

    def _append(self, e):
        if e.source_id in self._ids:
            raise PreconditionError(f"duplicate source id {e.source_id}")
        if not e.vector.grid.same_layout(self.grid):
            raise DimensionError("catalog entry lives on a different grid")
        if e.vector.force_type != e.force_type:
            raise PreconditionError("entry force type does not match its vector")
        if not np.any(e.vector.amplitudes):
            raise PreconditionError(f"source {e.source_id} has an all-zero field")
        self._entries.append(e)
        self._ids.add(e.source_id)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    @property
    def ids(self) -> list:
        return [e.source_id for e in self._entries]

    @property
    def force_types(self) -> np.ndarray:
        return np.array([e.force_type for e in self._entries])

    def matrix(self) -> np.ndarray:
        """``F^src`` with rows over the full state space, one column per source."""
        return np.column_stack([e.vector.embed() for e in self._entries])

    def matrix_for(self, m: int) -> np.ndarray:
        """Rows of domain ``m`` for the columns of force type ``m``."""
        cols = [e.vector.amplitudes for e in self._entries if e.force_type == m]
        if not cols:
            return np.zeros((self.grid.dim(m), 0), dtype=complex)
        return np.column_stack(cols)

    def extended(self, entries: Sequence[CatalogEntry]) -> "SourceCatalog":
        return SourceCatalog(self.grid, list(self._entries) + list(entries))

    def subset(self, indices) -> "SourceCatalog":
        return SourceCatalog(self.grid, [self._entries[i] for i in indices])

    # --- builders ------------------------------------------------------

    @classmethod
    def point_probes(cls, grid, force_types=None, amplitude=1.0):
        """Every (point, axis) of the requested domains, ids ``(m, j, s)`` in lexicographic order."""
        types = grid.force_types if force_types is None else tuple(force_types)
        entries = []
        for m in sorted(types):
            for j in range(grid.n_points(m)):
                for s in range(grid.components[m]):
                    entries.append(point_entry(grid, j, s, amplitude, m))
        return cls(grid, entries)

    @classmethod
    def plane_waves(cls, grid, polarization=None, amplitude=None, force_type=1):
        """The full DFT set of plane waves on the grid lattice.

        The default amplitude ``1/sqrt(J)`` makes the catalog unitary.
        """
        lat = grid.require_lattice()
        ks = lat.kvectors()
        a = 1 / np.sqrt(lat.size) if amplitude is None else amplitude
        entries = [plane_wave_entry(grid, q, k, polarization, a, force_type) for q, k in enumerate(ks)]
        return cls(grid, entries)

    @classmethod
    def from_columns(cls, grid, columns, force_type=1, amplitudes=None, ids=None):
        """Explicit Green's columns (rows = domain of ``force_type``) scaled by amplitudes."""
        G = np.asarray(columns, dtype=complex)
        if G.ndim == 1:
            G = G[:, None]
        F = source_matrix(G, amplitudes)
        entries = []
        for n in range(F.shape[1]):
            sid = ("explicit", force_type, n) if ids is None else tuple(ids[n])
            vec = ForceVector(grid, F[:, n], force_type)
            entries.append(
                CatalogEntry(sid, force_type, vec, {"kind": "explicit", "force_type": force_type,
                                                    "vector": _pairs(F[:, n]), "id": list(sid)})
            )
        return cls(grid, entries)

    def to_descriptors(self) -> list:
        return [dict(e.descriptor) for e in self._entries]

    @classmethod
    def from_descriptors(cls, grid, descriptors):
        return cls(grid, [entry_from_descriptor(grid, d) for d in descriptors])


def _pairs(v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in v]


def _complex(a):
    if isinstance(a, (list, tuple)):
        return complex(a[0], a[1])
    return complex(a)


def point_entry(grid, j, s=0, amplitude=1.0, force_type=1) -> CatalogEntry:
    amplitude = complex(amplitude)
    desc = {"kind": "point", "force_type": force_type, "index": int(j), "axis": int(s),
            "amplitude": [amplitude.real, amplitude.imag]}
    return CatalogEntry((force_type, int(j), int(s)), force_type, point_probe(grid, j, s, amplitude, force_type), desc)


def uniform_entry(grid, s=0, amplitude=1.0, force_type=1) -> CatalogEntry:
    amplitude = complex(amplitude)
    desc = {"kind": "uniform", "force_type": force_type, "axis": int(s), "amplitude": [amplitude.real, amplitude.imag]}
    return CatalogEntry(("uniform", force_type, int(s)), force_type, uniform_probe(grid, s, amplitude, force_type), desc)


def plane_wave_entry(grid, q, k, polarization=None, amplitude=1.0, force_type=1) -> CatalogEntry:
    amplitude = complex(amplitude)
    pol = None if polarization is None else _pairs(polarization)
    desc = {"kind": "plane", "force_type": force_type, "k": [float(x) for x in np.ravel(k)],
            "polarization": pol, "amplitude": [amplitude.real, amplitude.imag], "id": ["k", force_type, int(q)]}
    vec = plane_wave_probe(grid, k, polarization, amplitude, force_type)
    return CatalogEntry(("k", force_type, int(q)), force_type, vec, desc)


def entry_from_descriptor(grid, d) -> CatalogEntry:
    kind = d["kind"]
    m = int(d.get("force_type", 1))
    amp = _complex(d.get("amplitude", 1.0))
    if kind == "point":
        return point_entry(grid, int(d["index"]), int(d.get("axis", 0)), amp, m)
    if kind == "uniform":
        return uniform_entry(grid, int(d.get("axis", 0)), amp, m)
    if kind == "plane":
        pol = d.get("polarization")
        pol = None if pol is None else [_complex(p) for p in pol]
        q = d.get("id", ["k", m, 0])[2]
        return plane_wave_entry(grid, int(q), d["k"], pol, amp, m)
    if kind == "explicit":
        vec = np.array([_complex(z) for z in d["vector"]])
        sid = tuple(d.get("id", ("explicit", m, 0)))
        return CatalogEntry(sid, m, ForceVector(grid, vec, m), dict(d))
    raise PreconditionError(f"unknown source kind {kind!r}")


def source_matrix(G, L=None) -> np.ndarray:
    """``F^src = G^src L^src`` for Green's columns ``G`` and diagonal amplitudes ``L``.

    ``L`` may be a vector of diagonal entries or a diagonal matrix.  Columns
    with zero amplitude are reported with a warning.
    """
    G = np.asarray(G, dtype=complex)
    if G.ndim != 2:
        raise DimensionError("Green's columns must form a 2-d array")
    if L is None:
        diag = np.ones(G.shape[1], dtype=complex)
    else:
        L = np.asarray(L, dtype=complex)
        if L.ndim == 2:
            if L.shape[0] != L.shape[1] or np.any(L - np.diag(np.diag(L))):
                raise PreconditionError("L^src must be diagonal")
            diag = np.diag(L)
        else:
            diag = L.reshape(-1)
    if diag.shape[0] != G.shape[1]:
        raise DimensionError(f"{G.shape[1]} Green's columns but {diag.shape[0]} amplitudes")
    F = G * diag[None, :]
    zero = np.flatnonzero(~np.any(F, axis=0))
    if zero.size:
        warnings.warn(f"source columns {zero.tolist()} have zero amplitude", stacklevel=2)
    return F


@dataclass
class DualBasis:
    """Truncated-SVD dual ``F~ = U S^-1 V^H`` of a source matrix ``F = U S V^H``.

    ``U``, ``s`` and ``Vh`` are the thin factors of ``F`` with every singular
    value kept; ``rank`` counts those above ``tol * s[0]``.
    """

    matrix: np.ndarray
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray
    rank: int
    tol: float

    @property
    def singular_values(self) -> np.ndarray:
        return self.s

    @property
    def n_sources(self) -> int:
        return self.matrix.shape[1]

    def projector(self) -> np.ndarray:
        """Measurement filter ``F F~^H = U_r U_r^H``."""
        Ur = self.U[:, : self.rank]
        return Ur @ Ur.conj().T

    @classmethod
    def from_factors(cls, U, s, Vh, tol=TAU_SVD):
        if s.size == 0 or not s[0] > 0:
            raise RankError("source matrix has no non-zero singular values")
        r = int(np.count_nonzero(s >= tol * s[0]))
        Ur, sr, Vr = U[:, :r], s[:r], Vh[:r].conj().T
        mat = (Ur / sr) @ Vr.conj().T
        return cls(mat, U, s, Vh, r, tol)


def dual_basis(F, tol: float = TAU_SVD) -> DualBasis:
    """Dual vectors of the columns of ``F`` via truncated SVD.

    Singular values below ``tol`` times the largest are discarded.
    """
    if isinstance(F, SourceCatalog):
        F = F.matrix()
    F = np.asarray(F, dtype=complex)
    if F.ndim != 2 or F.size == 0:
        raise RankError("source matrix is empty")
    U, s, Vh = np.linalg.svd(F, full_matrices=False)
    return DualBasis.from_factors(U, s, Vh, tol)
