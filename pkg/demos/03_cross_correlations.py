"""
Correlations between two force domains
======================================

Two regions respond to different force types.  A shared absorption channel
links them through the cross blocks, which a two-type campaign measures.
The cross modes then live inside the span of each region's own modes.
"""
import numpy as np

from eai import (
    ModeSpec,
    SampleGrid,
    SourceCatalog,
    assemble_full,
    cross_modes,
    dual_basis,
    from_cross_pairs,
    from_self_modes,
    natural_modes,
    project_cross_onto_self,
    range_inclusion,
    reconstruct_response,
    run_campaign,
)

rng = np.random.default_rng(3)
grid = SampleGrid.two_domain(6, 5)


def unit(n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


# Each domain absorbs through two modes; the first pair is shared.
Q1, _ = np.linalg.qr(rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2)))
Q2, _ = np.linalg.qr(rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
D11 = from_self_modes(grid, [ModeSpec(2.0, Q1[:, 0]), ModeSpec(1.0, Q1[:, 1])], 1)
D22 = from_self_modes(grid, [ModeSpec(1.5, Q2[:, 0]), ModeSpec(0.5, Q2[:, 1])], 2)
D12, _ = from_cross_pairs(grid, [ModeSpec(np.sqrt(2.0 * 1.5), Q1[:, 0], Q2[:, 0])])

asm = assemble_full(grid, {1: D11, 2: D22}, D12)
print("assembly PSD:", asm.is_psd, " largest admissible cross scale:", asm.lambda_star)

# An uncorrelated cross pair cannot be made physical at full strength.
bad = from_cross_pairs(grid, [ModeSpec(1.0, unit(6), unit(5))])[0]
print("random cross pair: admissible scale %.3f" % assemble_full(grid, {1: D11, 2: D22}, bad).lambda_star)

# Measure with point probes of both types and reconstruct.
D = asm.tensor
cat = SourceCatalog.point_probes(grid)
mm = run_campaign(D, cat, "ordered-pairs")
print("\nreciprocity |M12 - M21^H| =", f"{np.abs(mm.block(1, 2) - mm.block(2, 1).conj().T).max():.1e}")
R = reconstruct_response(mm, dual_basis(cat), grid).tensor

cs = cross_modes(R.block(1, 2))
print("cross weights:", np.round(cs.spectrum, 10))
proj = project_cross_onto_self(cs, natural_modes(R, 1), natural_modes(R, 2))
print("leading cross mode captured by self modes: domain 1 %.6f, domain 2 %.6f"
      % (proj.captured[1][0], proj.captured[2][0]))
print("cross energy outside range(D11): %.1e" % range_inclusion(R.block(1, 1), R.block(1, 2)))
