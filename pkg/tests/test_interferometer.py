import numpy as np
import pytest
from hypothesis import given, strategies as st

from eai import (
    FOUR_PHASES,
    TWO_PHASES,
    BlockResponseMatrix,
    DimensionError,
    FringeRecord,
    PreconditionError,
    ProtocolError,
    SampleGrid,
    SourceCatalog,
    anti_hermitian_part,
    extract_visibility,
    fringe_power,
    random_psd_system,
    run_campaign,
    time_average_oracle,
    visibility_map,
)

from conftest import crandn, random_hermitian, random_psd

E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def test_fringe_extrema():
    D = np.ones((2, 2))
    assert fringe_power(D, E1, E2, 0.0, 1.0) == pytest.approx(8.0)
    assert fringe_power(D, E1, E2, np.pi, 1.0) == pytest.approx(0.0, abs=1e-14)


def test_fringe_single_source_flat(rng):
    D = random_psd(rng, 3)
    fa = crandn(rng, 3)
    p = fringe_power(D, fa, np.zeros(3), np.linspace(0, 2 * np.pi, 9), 0.8)
    np.testing.assert_allclose(p, 2 * 0.8 * np.vdot(fa, D @ fa).real, rtol=1e-13)


def test_fringe_mean_is_sum_of_singles(rng):
    D = random_psd(rng, 4)
    fa, fb = crandn(rng, 4), crandn(rng, 4)
    w = 1.7
    phi = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    mean = np.mean(fringe_power(D, fa, fb, phi, w))
    singles = 2 * w * (np.vdot(fa, D @ fa) + np.vdot(fb, D @ fb)).real
    assert mean == pytest.approx(singles, rel=1e-12)


def test_fringe_dimension_mismatch():
    with pytest.raises(DimensionError):
        fringe_power(np.eye(3), E1, E2, 0.0, 1.0)


def test_extract_worked_examples():
    m, tot = extract_visibility(FringeRecord((0, 1), FOUR_PHASES, (8, 4, 0, 4)), 1.0)
    assert m == pytest.approx(1 + 0j)
    assert tot == pytest.approx(2.0)
    m, tot = extract_visibility(FringeRecord((0, 1), FOUR_PHASES, (5, 5, 5, 5)), 1.0)
    assert m == 0
    m, tot = extract_visibility(FringeRecord((0, 1), FOUR_PHASES, (4, 6, 4, 2)), 1.0)
    assert m == pytest.approx(-0.5j)
    # forward check: the tensor whose source-basis matrix is M reproduces the readings
    M = np.array([[1, m], [np.conj(m), 1]])
    np.testing.assert_allclose(fringe_power(M, E1, E2, np.array(FOUR_PHASES), 1.0), [4, 6, 4, 2], atol=1e-14)


def test_extract_missing_phases():
    with pytest.raises(ProtocolError):
        extract_visibility(FringeRecord((0, 1), (0.0, np.pi), (1, 1)), 1.0)


def test_two_state_extraction(rng):
    D = random_psd(rng, 3)
    fa, fb = crandn(rng, 3), crandn(rng, 3)
    w = 0.6
    rec = FringeRecord((0, 1), TWO_PHASES, fringe_power(D, fa, fb, np.array(TWO_PHASES), w))
    singles = (np.vdot(fa, D @ fa).real, np.vdot(fb, D @ fb).real)
    m, _ = extract_visibility(rec, w, singles=singles)
    assert m == pytest.approx(np.vdot(fa, D @ fb), rel=1e-12)
    with pytest.raises(ProtocolError):
        extract_visibility(rec, w)


@given(st.integers(1, 16), st.integers(0, 2**31))
def test_extraction_inverts_fringe(n, seed):
    rng = np.random.default_rng(seed)
    D = random_psd(rng, n)
    fa, fb = crandn(rng, n), crandn(rng, n)
    w = rng.uniform(0.1, 10)
    rec = FringeRecord((0, 1), FOUR_PHASES, fringe_power(D, fa, fb, np.array(FOUR_PHASES), w))
    m, tot = extract_visibility(rec, w)
    mab = np.vdot(fa, D @ fb)
    assert abs(m - mab) <= 1e-12 * (abs(mab) + np.linalg.norm(D) * np.linalg.norm(fa) * np.linalg.norm(fb))
    assert tot == pytest.approx((np.vdot(fa, D @ fa) + np.vdot(fb, D @ fb)).real, rel=1e-12)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_fringe_non_negative_and_decomposition(n, r, seed):
    rng = np.random.default_rng(seed)
    D = random_psd(rng, n, min(r, n))
    fa, fb = crandn(rng, n), crandn(rng, n)
    phi = np.linspace(0, 2 * np.pi, 91)
    p = fringe_power(D, fa, fb, phi, 1.0)
    scale = np.linalg.norm(D) * (np.linalg.norm(fa) + np.linalg.norm(fb)) ** 2
    assert p.min() >= -1e-12 * scale
    mab = np.vdot(fa, D @ fb)
    amp = 0.5 * (p.max() - p.min())
    assert amp <= 4 * abs(mab) * (1 + 1e-9) + 1e-12 * scale


def test_campaign_identity_catalog(rng):
    g = SampleGrid.line(6)
    D = BlockResponseMatrix(g, {(1, 1): random_psd(rng, 6)})
    mm = run_campaign(D, SourceCatalog.point_probes(g))
    np.testing.assert_allclose(mm.M, D.full, atol=1e-12 * np.linalg.norm(D.full))
    assert mm.complete
    assert np.all(np.isreal(np.diag(mm.M)))


def test_campaign_counting(rng):
    g = SampleGrid.line(8)
    D = BlockResponseMatrix(g, {(1, 1): random_psd(rng, 8)})
    mm = run_campaign(D, SourceCatalog.point_probes(g))
    assert mm.singles.shape == (8,)
    assert len(mm.fringes) == 28
    assert all(r.powers.size == 4 for r in mm.fringes)
    assert all(a < b for a, b in (r.pair for r in mm.fringes))


@given(st.integers(1, 32), st.integers(1, 12), st.integers(0, 2**31))
def test_noiseless_campaign_exact(n, N, seed):
    rng = np.random.default_rng(seed)
    D = random_psd(rng, n)
    F = crandn(rng, n, N)
    mm = run_campaign(D, F)
    err = np.linalg.norm(mm.M - F.conj().T @ D @ F)
    assert err <= 1e-12 * np.linalg.norm(D) * np.linalg.norm(F) ** 2


def test_reference_strategy_partial_mask(rng):
    g = SampleGrid.line(5)
    D = BlockResponseMatrix(g, {(1, 1): random_psd(rng, 5)})
    mm = run_campaign(D, SourceCatalog.point_probes(g), "reference:2")
    assert len(mm.fringes) == 4
    assert not mm.complete
    assert mm.mask[2].all() and mm.mask[:, 2].all()
    assert mm.strategy == "reference:2"
    same = run_campaign(D, SourceCatalog.point_probes(g), ("reference", 2))
    np.testing.assert_array_equal(mm.M, same.M)


def test_strategy_errors(rng):
    D = random_psd(rng, 3)
    with pytest.raises(PreconditionError):
        run_campaign(D, np.eye(3), [])
    with pytest.raises(PreconditionError):
        run_campaign(D, np.eye(3), "sideways")
    with pytest.raises(PreconditionError):
        run_campaign(D, np.eye(3), [(0, 0)])


def test_custom_pairs(rng):
    D = random_psd(rng, 4)
    mm = run_campaign(D, np.eye(4), [(0, 3), (1, 2)])
    assert mm.mask.sum() == 4 + 4
    assert mm.M[3, 0] == pytest.approx(D[3, 0])


def test_non_psd_warns():
    with pytest.warns(UserWarning, match="not PSD"):
        mm = run_campaign(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2))
    assert mm.report is not None and not mm.report.psd_ok


def test_cross_campaign_zero_coupling(rng):
    g = SampleGrid.two_domain(3, 2, components=(1, 3))
    D = BlockResponseMatrix(g, {(1, 1): random_psd(rng, 3), (2, 2): random_psd(rng, 6)})
    mm = run_campaign(D, SourceCatalog.point_probes(g))
    assert np.max(np.abs(mm.block(1, 2))) <= 1e-12


def test_noise_is_schedule_independent(rng, monkeypatch):
    g = SampleGrid.line(6)
    D = random_psd_system(g, [3, 2, 1], seed=4)
    cat = SourceCatalog.point_probes(g)
    a = run_campaign(D, cat, noise=1e-2, seed=9, workers=1)
    b = run_campaign(D, cat, noise=1e-2, seed=9, workers=4)
    monkeypatch.setenv("EAI_THREADS", "3")
    c = run_campaign(D, cat, noise=1e-2, seed=9)
    np.testing.assert_array_equal(a.M, b.M)
    np.testing.assert_array_equal(a.M, c.M)
    # a single pair measured alone sees the same noise draw
    d = run_campaign(D, cat, [(1, 4)], noise=1e-2, seed=9)
    assert d.M[1, 4] == a.M[1, 4]
    e = run_campaign(D, cat, noise=1e-2, seed=10)
    assert not np.array_equal(a.M, e.M)


def test_noise_level_is_relative(rng):
    g = SampleGrid.line(4)
    D = random_psd_system(g, [1.0], seed=1)
    mm = run_campaign(D, SourceCatalog.point_probes(g), noise=1e-3, seed=0)
    clean = np.real(np.diag(D.full)) * 2
    rel = mm.singles / clean - 1
    assert np.all(np.abs(rel) < 6e-3) and np.any(rel != 0)


def test_time_average_pure_dissipative(rng):
    Dm = random_psd(rng, 3)
    f = crandn(rng, 3)
    w = 2.3
    p = time_average_oracle(1j * Dm, f, np.zeros(3), 0.0, w, periods=1000)
    assert p == pytest.approx(2 * w * np.vdot(f, Dm @ f).real, rel=1e-6)


def test_time_average_reactive_is_zero(rng):
    H = random_hermitian(rng, 3)
    f = crandn(rng, 3)
    p = time_average_oracle(H, f, crandn(rng, 3), 0.4, 1.0, periods=200)
    assert abs(p) <= 1e-9 * np.linalg.norm(H) * np.linalg.norm(f) ** 2


def test_time_average_independent_of_reactive_part(rng):
    Dm, H = random_psd(rng, 4), random_hermitian(rng, 4)
    fa, fb = crandn(rng, 4), crandn(rng, 4)
    p1 = time_average_oracle(1j * Dm, fa, fb, 1.1, 0.9)
    p2 = time_average_oracle(H + 1j * Dm, fa, fb, 1.1, 0.9)
    assert p2 == pytest.approx(p1, rel=1e-8)
    assert p1 == pytest.approx(fringe_power(anti_hermitian_part(H + 1j * Dm), fa, fb, 1.1, 0.9), rel=1e-8)


def test_time_average_error_decays_as_one_over_n(rng):
    # a fractional window leaves an oscillating residue bounded by C / n
    Dm, H = random_psd(rng, 3), random_hermitian(rng, 3)
    f = crandn(rng, 3)
    exact = 2 * np.vdot(f, Dm @ f).real
    ns = np.array([10.25, 100.25, 1000.25])
    errs = np.array([abs(time_average_oracle(H + 1j * Dm, f, np.zeros(3), 0.0, 1.0, periods=n) - exact) for n in ns])
    assert errs[0] > 1e-6 * abs(exact)
    np.testing.assert_allclose(errs * ns, errs[0] * ns[0], rtol=0.05)
    whole = time_average_oracle(H + 1j * Dm, f, np.zeros(3), 0.0, 1.0, periods=10)
    assert whole == pytest.approx(exact, rel=1e-10)


def test_visibility_examples():
    gamma = visibility_map(np.ones((2, 2)), 0)
    assert gamma[1] == pytest.approx(1.0)
    assert visibility_map(np.eye(2), 0)[1] == 0
    g = visibility_map(np.diag([0.0, 0.0]), 0)
    assert np.isnan(g[1])


def test_visibility_rank_one_gaussian():
    x = np.arange(-6, 7)
    d = np.exp(-(x**2) / 8.0)
    d /= np.linalg.norm(d)
    D = np.outer(d, d)
    m = 4
    gamma = visibility_map(D, m)
    expected = 2 * d[m] * d / (d[m] ** 2 + d**2)
    np.testing.assert_allclose(gamma, expected, rtol=1e-12)
    mirror = len(x) - 1 - m
    assert abs(gamma[mirror]) == pytest.approx(1.0, abs=1e-12)
    assert abs(gamma[m]) == pytest.approx(1.0)
    # the normalised coherence D_mm' / sqrt(D_mm D_m'm') is unity for every pair
    coh = D[m] / np.sqrt(D[m, m] * np.diag(D))
    np.testing.assert_allclose(np.abs(coh), 1.0, rtol=1e-12)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_visibility_bounded(n, r, seed):
    rng = np.random.default_rng(seed)
    D = random_psd(rng, n, min(r, n))
    for m in range(n):
        g = visibility_map(D, m)
        assert np.all(np.abs(g[np.isfinite(g)]) <= 1 + 1e-12)
        assert g[m] == pytest.approx(1.0)


def test_visibility_from_measured(rng):
    g = SampleGrid.line(5)
    D = random_psd_system(g, [2, 1], seed=3)
    mm = run_campaign(D, SourceCatalog.point_probes(g), "reference:1")
    np.testing.assert_allclose(visibility_map(mm, 1), visibility_map(D, 1), atol=1e-12)
    assert np.all(np.isnan(visibility_map(mm, 0)[2:]))
