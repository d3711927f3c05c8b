"""
Two-source fringe simulation, visibility extraction and measurement campaigns.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import DimensionError, PreconditionError, ProtocolError
from .sources import SourceCatalog
from .tensor import force_array, full_matrix, validate

FOUR_PHASES = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)
TWO_PHASES = (0.0, 0.5 * np.pi)
_SINGLE_KEY = 255


def _omega(D, omega0):
    w = getattr(D, "omega0", 1.0) if omega0 is None else float(omega0)
    if not w > 0:
        raise PreconditionError("angular frequency must be positive")
    return w


def fringe_power(D, f_a, f_b, phi, omega0=None):
    """Absorbed power ``2 w0 (f_a + f_b e^{i phi})^H D (f_a + f_b e^{i phi})``.

    ``phi`` may be an array.  The forces can be of different types, in which
    case the cross blocks of ``D`` produce the fringe.
    """
    a = full_matrix(D)
    w = _omega(D, omega0)
    fa = force_array(f_a, a.shape[0])
    fb = force_array(f_b, a.shape[0])
    phi = np.asarray(phi, dtype=float)
    e = np.exp(1j * np.atleast_1d(phi))
    V = fa[:, None] + fb[:, None] * e[None, :]
    out = 2 * w * np.einsum("ik,ik->k", V.conj(), a @ V).real
    out = out.reshape(phi.shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class FringeRecord:
    pair: tuple
    phases: np.ndarray
    powers: np.ndarray
    noise: float = 0.0

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float).reshape(-1)
        self.powers = np.asarray(self.powers, dtype=float).reshape(-1)
        if self.phases.shape != self.powers.shape:
            raise DimensionError("one power reading per phase is required")
        if not np.all(np.isfinite(self.powers)):
            raise ProtocolError("fringe powers must be finite")

    def power_at(self, phi, atol=1e-9):
        d = np.abs(np.angle(np.exp(1j * (self.phases - phi))))
        hit = np.flatnonzero(d < atol)
        if hit.size == 0:
            raise ProtocolError(f"fringe for pair {self.pair} has no sample at phase {phi:.6g}")
        return float(np.mean(self.powers[hit]))


def extract_visibility(record: FringeRecord, omega0: float = 1.0, singles=None):
    """Cross element ``M_ab`` and ``M_aa + M_bb`` from a phase-stepped fringe.

    With the four canonical phases the extraction is self-contained.  With
    only ``0`` and ``pi/2`` the single-source powers (as matrix elements
    ``(M_aa, M_bb)``) must be supplied.
    """
    w = float(omega0)
    have = {round(float(np.mod(p, 2 * np.pi)), 9) for p in record.phases}
    four = all(round(p, 9) in have for p in FOUR_PHASES)
    if four:
        p0, p1, p2, p3 = (record.power_at(p) for p in FOUR_PHASES)
        re = (p0 - p2) / (8 * w)
        im = (p3 - p1) / (8 * w)
        total = (p0 + p2) / (4 * w)
        return complex(re, im), total
    if singles is None or not all(round(p, 9) in have for p in TWO_PHASES):
        raise ProtocolError(
            f"pair {record.pair}: need phases 0, pi/2, pi, 3pi/2 (or 0, pi/2 with single-source powers)"
        )
    total = float(singles[0]) + float(singles[1])
    p0, p1 = record.power_at(0.0), record.power_at(0.5 * np.pi)
    re = (p0 / (2 * w) - total) / 2
    im = (total - p1 / (2 * w)) / 2
    return complex(re, im), total


@dataclass
class MeasuredMatrix:
    """Fringe-derived matrix elements ``M = F^H D F`` in the source basis."""

    M: np.ndarray
    mask: np.ndarray
    singles: np.ndarray
    omega0: float
    noise: float = 0.0
    seed: int | None = None
    strategy: str = "all-pairs"
    source_ids: list = field(default_factory=list)
    force_types: np.ndarray | None = None
    fringes: list = field(default_factory=list)
    report: object = None

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def complete(self) -> bool:
        return bool(np.all(self.mask))

    def hermitian_residual(self) -> float:
        both = self.mask & self.mask.T
        d = np.where(both, self.M - self.M.conj().T, 0)
        return float(np.max(np.abs(d), initial=0.0))

    def block(self, m, n):
        """Entries between sources of type ``m`` (rows) and ``n`` (columns)."""
        ft = np.asarray(self.force_types)
        return self.M[np.ix_(ft == m, ft == n)]


def _strategy_pairs(strategy, n):
    """Ordered list of (a, b) pairs, a != b, that the strategy measures."""
    if isinstance(strategy, str):
        name = strategy
        if name == "all-pairs":
            return "all-pairs", [(a, b) for a in range(n) for b in range(a + 1, n)]
        if name == "ordered-pairs":
            return "ordered-pairs", [(a, b) for a in range(n) for b in range(n) if a != b]
        if name.startswith("reference"):
            _, _, ref = name.partition(":")
            strategy = ("reference", int(ref or 0))
        else:
            raise PreconditionError(f"unknown strategy {strategy!r}")
    if isinstance(strategy, tuple) and len(strategy) == 2 and strategy[0] == "reference":
        m0 = int(strategy[1])
        if not 0 <= m0 < n:
            raise PreconditionError(f"reference index {m0} out of range")
        return f"reference:{m0}", [(m0, b) for b in range(n) if b != m0]
    pairs = [(int(a), int(b)) for a, b in strategy]
    if not pairs:
        raise PreconditionError("empty strategy")
    for a, b in pairs:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise PreconditionError(f"invalid pair {(a, b)}")
    return "custom", pairs


def _noise_factor(seed, a, b, k, sigma):
    if sigma == 0:
        return 1.0
    # keyed per reading, so the draw does not depend on evaluation order
    rng = np.random.default_rng([int(seed), int(a), int(b), int(k)])
    return 1.0 + sigma * rng.standard_normal()


def _threads(workers):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get("EAI_THREADS", "1")))
    except ValueError:
        return 1


def run_campaign(
    D,
    catalog,
    strategy="all-pairs",
    noise: float = 0.0,
    seed: int = 0,
    omega0: float | None = None,
    phases=FOUR_PHASES,
    workers: int | None = None,
    keep_fringes: bool = True,
) -> MeasuredMatrix:
    """Simulate the interferometric scan of ``D`` with the catalog's sources.

    Every catalog column is measured alone (diagonal of ``M``); each pair of
    the strategy is measured as a phase-stepped fringe.  Readings are
    multiplied by ``1 + eps``, ``eps ~ N(0, noise)``, drawn from a generator
    keyed on ``(seed, a, b, phase index)``.  For ``"all-pairs"`` and reference
    rows only ``a < b`` readings are taken and the transposed entry is filled
    by conjugation; ``"ordered-pairs"`` measures both orders independently.
    """
    a = full_matrix(D)
    w = _omega(D, omega0)
    F = catalog.matrix() if isinstance(catalog, SourceCatalog) else np.asarray(catalog, dtype=complex)
    if F.ndim != 2 or F.shape[0] != a.shape[0]:
        raise DimensionError(f"catalog rows {F.shape[0]} do not match tensor dimension {a.shape[0]}")
    n = F.shape[1]
    if n == 0:
        raise PreconditionError("catalog is empty")
    name, pairs = _strategy_pairs(strategy, n)
    phases = tuple(float(p) for p in phases)
    sigma = float(noise)
    if sigma < 0:
        raise PreconditionError("noise level must be non-negative")

    report = validate(D) if hasattr(D, "grid") else validate(a)
    if not report.psd_ok:
        warnings.warn("response tensor is not PSD; campaign powers may be negative", stacklevel=2)

    AF = a @ F

    def single(i):
        p = 2 * w * np.vdot(F[:, i], AF[:, i]).real
        return p * _noise_factor(seed, i, i, _SINGLE_KEY, sigma)

    def fringe(pair):
        i, j = pair
        powers = []
        for k, phi in enumerate(phases):
            e = np.exp(1j * phi)
            v = F[:, i] + e * F[:, j]
            p = 2 * w * np.vdot(v, AF[:, i] + e * AF[:, j]).real
            powers.append(p * _noise_factor(seed, i, j, k, sigma))
        return FringeRecord((i, j), phases, powers, sigma)

    nt = _threads(workers)
    if nt > 1:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            singles = list(ex.map(single, range(n)))
            records = list(ex.map(fringe, pairs))
    else:
        singles = [single(i) for i in range(n)]
        records = [fringe(p) for p in pairs]

    singles = np.asarray(singles, dtype=float)
    M = np.zeros((n, n), dtype=complex)
    mask = np.zeros((n, n), dtype=bool)
    diag = singles / (2 * w)
    M[np.arange(n), np.arange(n)] = diag
    mask[np.arange(n), np.arange(n)] = True
    ordered = name == "ordered-pairs"
    for rec in records:
        i, j = rec.pair
        mij, _ = extract_visibility(rec, w, singles=(diag[i], diag[j]))
        M[i, j] = mij
        mask[i, j] = True
        if not ordered and not mask[j, i]:
            M[j, i] = np.conj(mij)
            mask[j, i] = True
    ids = list(catalog.ids) if isinstance(catalog, SourceCatalog) else list(range(n))
    ft = catalog.force_types if isinstance(catalog, SourceCatalog) else np.ones(n, dtype=int)
    return MeasuredMatrix(
        M, mask, singles, w, sigma, seed, name, ids, ft, records if keep_fringes else [], report
    )


def time_average_oracle(chi, f_a, f_b, phi, omega0, periods: float = 1000, samples_per_period: int = 64, t0: float = 0.0):
    """Numerically time-averaged work rate of a time-harmonic two-source drive.

    The real force is ``F(t) = f e^{-i w t} + c.c.`` with
    ``f = f_a + f_b e^{i phi}`` and the displacement is
    ``x(t) = chi f e^{-i w t} + c.c.``; the instantaneous power ``F . dx/dt``
    is averaged over ``periods`` cycles with the trapezoidal rule.  A whole
    number of periods cancels the oscillating terms exactly; a fractional
    window leaves a residue that decays as ``1/periods``.
    """
    chi = np.asarray(chi, dtype=complex)
    fa = force_array(f_a, chi.shape[0])
    fb = force_array(f_b, chi.shape[0])
    f = fa + fb * np.exp(1j * phi)
    w = float(omega0)
    spp = max(int(samples_per_period), 64)
    if not periods > 0:
        raise PreconditionError("averaging window must be positive")
    n = max(int(round(periods * spp)), spp)
    T = 2 * np.pi / w
    t = t0 + np.linspace(0.0, periods * T, n + 1)
    e = np.exp(-1j * w * t)
    x = chi @ f
    # F(t) and dx/dt(t) are real: 2 Re[...]
    F_t = 2 * np.real(np.outer(e, f))
    v_t = 2 * np.real(np.outer(-1j * w * e, x))
    p = np.sum(F_t * v_t, axis=1)
    return float(trapezoid(p, t) / (t[-1] - t[0]))


def visibility_map(M, m: int) -> np.ndarray:
    """Complex visibilities ``2 M_mm' / (M_mm + M_m'm')`` along row ``m``.

    Undefined entries (zero denominator or unmeasured) are NaN.
    """
    if isinstance(M, MeasuredMatrix):
        mask = M.mask
        M = M.M
    else:
        M = full_matrix(M)
        mask = np.ones(M.shape, dtype=bool)
    d = np.real(np.diag(M))
    den = d[m] + d
    row = M[m]
    out = np.full(M.shape[0], np.nan + 1j * np.nan, dtype=complex)
    ok = (den != 0) & mask[m]
    out[ok] = 2 * row[ok] / den[ok]
    return out
