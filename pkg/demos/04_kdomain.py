"""
Shift invariance and the wave-vector domain
===========================================

A ring of identical, translationally invariant absorbers has a circulant
response.  Its unitary DFT is diagonal, and a plane-wave campaign reads the
diagonal directly.  A spatial window breaks the symmetry and leaks energy
off the diagonal.
"""
import numpy as np

from eai import (
    BlockResponseMatrix,
    SourceCatalog,
    circulant_ring,
    diagonality,
    run_campaign,
    to_kdomain,
)

n = 64
D = circulant_ring(n, lambda d: np.exp(-(d**2) / (2 * 3.0**2)))
Dk = to_kdomain(D)
print(f"off-diagonal energy fraction on the ring: {diagonality(Dk):.1e}")

mm = run_campaign(D, SourceCatalog.plane_waves(D.grid))
print(f"plane-wave campaign minus D_k: {np.abs(mm.M - Dk.full).max():.1e}")

ks = D.grid.require_lattice().kvectors()[:, 0]
print("\n k        D(k,k)")
for q in range(0, n // 2 + 1, 4):
    print(f"{ks[q]:6.3f}  {Dk.full[q, q].real:9.5f}")

for width in (8.0, 16.0, 64.0):
    w = np.exp(-((np.arange(n) - n / 2) ** 2) / (2 * width**2))
    Dw = BlockResponseMatrix(D.grid, {(1, 1): w[:, None] * D.full * w[None, :]})
    print(f"window width {width:4.0f}: off-diagonal fraction {diagonality(to_kdomain(Dw)):.3f}")
