import numpy as np
import pytest
from hypothesis import given, strategies as st

from eai import (
    DimensionError,
    ModeSpec,
    PreconditionError,
    SampleGrid,
    assemble_full,
    cross_modes,
    from_cross_pairs,
    from_self_modes,
    local_absorber,
    natural_modes,
    principal_angles,
    random_psd_system,
    validate,
)

from conftest import crandn, random_psd, random_unitary


def test_single_mode_outer_product():
    g = SampleGrid.line(2)
    D = from_self_modes(g, [ModeSpec(2.0, np.array([1, 1]) / np.sqrt(2))])
    np.testing.assert_allclose(D, [[1, 1], [1, 1]], atol=1e-15)


def test_standard_basis_gives_identity():
    g = SampleGrid.line(2)
    D = from_self_modes(g, [ModeSpec(1.0, [1, 0]), ModeSpec(1.0, [0, 1])])
    np.testing.assert_allclose(D, np.eye(2))


def test_empty_mode_list():
    g = SampleGrid.line(3)
    np.testing.assert_array_equal(from_self_modes(g, []), np.zeros((3, 3)))


def test_non_orthonormal_modes_rejected():
    g = SampleGrid.line(2)
    with pytest.raises(PreconditionError):
        from_self_modes(g, [ModeSpec(1.0, [1, 0]), ModeSpec(1.0, [1, 1e-6])])
    with pytest.raises(PreconditionError):
        from_self_modes(g, [ModeSpec(-1.0, [1, 0])])


def test_cross_pair_single_entry():
    g = SampleGrid.two_domain(2, 3)
    D12, D21 = from_cross_pairs(g, [ModeSpec(1.0, [1, 0], [1, 0, 0])])
    expected = np.zeros((2, 3))
    expected[0, 0] = 1
    np.testing.assert_array_equal(D12, expected)
    np.testing.assert_array_equal(D21, expected.T)


def test_cross_pair_zero_weight():
    g = SampleGrid.two_domain(2, 3)
    D12, D21 = from_cross_pairs(g, [ModeSpec(0.0, [1, 0], [1, 0, 0])])
    assert not np.any(D12) and not np.any(D21)


def test_cross_pairs_singular_values(rng):
    g = SampleGrid.two_domain(4, 5)
    U = random_unitary(rng, 4)
    V = random_unitary(rng, 5)
    pairs = [ModeSpec(2.0, U[:, 0], V[:, 0]), ModeSpec(1.0, U[:, 1], V[:, 1])]
    D12, D21 = from_cross_pairs(g, pairs)
    s = np.linalg.svd(D12, compute_uv=False)
    np.testing.assert_allclose(s[:2], [2, 1], rtol=1e-12)
    assert s[2] < 1e-12
    np.testing.assert_array_equal(D21, D12.conj().T)
    cs = cross_modes(D12)
    np.testing.assert_allclose(cs.spectrum, [2, 1], rtol=1e-12)


def test_cross_pair_dimension_mismatch():
    g = SampleGrid.two_domain(2, 3)
    with pytest.raises(DimensionError):
        from_cross_pairs(g, [ModeSpec(1.0, [1, 0], [1, 0])])


def test_assemble_block_diagonal(rng):
    g = SampleGrid.two_domain(3, 2)
    a = assemble_full(g, {1: random_psd(rng, 3), 2: random_psd(rng, 2)})
    assert a.is_psd and a.lambda_star == 1.0
    assert not np.any(a.tensor.block(1, 2))
    b = assemble_full(g, {1: random_psd(rng, 3), 2: -np.eye(2)})
    assert not b.is_psd


def test_assemble_unit_coupling():
    g = SampleGrid.two_domain(1, 1)
    a = assemble_full(g, {1: [[1.0]], 2: [[1.0]]}, [[1.0]])
    np.testing.assert_allclose(a.tensor.full, [[1, 1], [1, 1]])
    np.testing.assert_allclose(np.linalg.eigvalsh(a.tensor.full), [0, 2], atol=1e-15)
    assert a.is_psd and a.lambda_star == 1.0


def test_assemble_reports_lambda_star():
    g = SampleGrid.two_domain(1, 1)
    a = assemble_full(g, {1: [[1.0]], 2: [[1.0]]}, [[2.0]])
    assert not a.is_psd
    assert a.lambda_star == pytest.approx(0.5, abs=1e-6)
    assert a.lambda_star <= 0.5
    half = assemble_full(g, {1: [[1.0]], 2: [[1.0]]}, [[2.0]], scale=0.5)
    assert half.is_psd


def test_assemble_rejects_reciprocity_violation():
    g = SampleGrid.two_domain(1, 1)
    with pytest.raises(PreconditionError):
        assemble_full(g, {1: [[1.0]], 2: [[1.0]]}, [[0.5j]], cross_block_21=[[0.5j]])


def test_assemble_scalar_with_vector_force(rng):
    g = SampleGrid.two_domain(2, 2, components=(1, 3))
    a = assemble_full(g, {1: random_psd(rng, 2), 2: random_psd(rng, 6)}, 0.01 * crandn(rng, 2, 6))
    assert a.tensor.full.shape == (8, 8)
    assert a.is_psd


@given(st.integers(0, 2**31))
def test_assemble_zero_scale_psd(seed):
    rng = np.random.default_rng(seed)
    g = SampleGrid.two_domain(3, 2)
    a = assemble_full(g, {1: random_psd(rng, 3, 1), 2: random_psd(rng, 2, 1)}, 10 * crandn(rng, 3, 2), scale=0.0)
    assert a.is_psd


def test_local_absorber_examples():
    np.testing.assert_allclose(local_absorber(SampleGrid.line(4), 1.0).full, np.eye(4))
    assert not np.any(local_absorber(SampleGrid.line(4), 0.0).full)
    D = local_absorber(SampleGrid.line(2, components=3), np.diag([1.0, 2.0, 3.0])).full
    np.testing.assert_allclose(D, np.diag([1, 2, 3, 1, 2, 3]))
    with pytest.raises(PreconditionError):
        local_absorber(SampleGrid.line(2), -1.0)


def test_local_absorber_commutes_with_permutation(rng):
    J, c = 5, 3
    blocks = np.stack([random_psd(rng, c) for _ in range(J)])
    pts = np.column_stack([np.arange(J), np.zeros(J), np.zeros(J)]).astype(float)
    perm = rng.permutation(J)
    g = SampleGrid(pts, np.ones(J), {1: c})
    gp = SampleGrid(pts[perm], np.ones(J), {1: c})
    D = local_absorber(g, blocks).full
    Dp = local_absorber(gp, blocks[perm]).full
    idx = (perm[:, None] * c + np.arange(c)).reshape(-1)
    np.testing.assert_allclose(Dp, D[np.ix_(idx, idx)])


def test_random_system_examples():
    D = random_psd_system(SampleGrid.line(1), [1.0], seed=3)
    np.testing.assert_allclose(D.full, [[1.0]], atol=1e-15)
    g = SampleGrid.line(8)
    a = random_psd_system(g, [3.0, 1.0], seed=11)
    b = random_psd_system(g, [3.0, 1.0], seed=11)
    np.testing.assert_array_equal(a.full, b.full)
    ev = np.sort(np.linalg.eigvalsh(a.full))[::-1]
    np.testing.assert_allclose(ev, [3, 1, 0, 0, 0, 0, 0, 0], atol=1e-10)


def test_random_system_errors():
    g = SampleGrid.line(3)
    with pytest.raises(DimensionError):
        random_psd_system(g, [4, 3, 2, 1])
    with pytest.raises(PreconditionError, match="non-PSD spectrum"):
        random_psd_system(g, [1, -1])
    with pytest.raises(PreconditionError):
        random_psd_system(g, [1], coherence_length=0)


def test_random_joint_system_has_cross_blocks():
    g = SampleGrid.two_domain(4, 3, components=(1, 3))
    D = random_psd_system(g, [2.0, 1.0, 0.5], seed=5, force_type=None)
    assert validate(D).passed
    assert np.linalg.norm(D.block(1, 2)) > 0
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(D.full))[::-1][:3], [2, 1, 0.5], atol=1e-10)


def test_random_modes_smooth():
    g = SampleGrid.line(64)
    _, _, V = random_psd_system(g, [1.0], coherence_length=8.0, seed=2, return_modes=True)
    _, _, W = random_psd_system(g, [1.0], coherence_length=0.3, seed=2, return_modes=True)
    rough = lambda v: np.linalg.norm(np.diff(v[:, 0])) / np.linalg.norm(v[:, 0])  # noqa: E731
    assert rough(V) < rough(W)


@given(st.integers(2, 24), st.integers(0, 2**31))
def test_self_mode_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    U = random_unitary(rng, n)[:, :k]
    alphas = np.sort(rng.uniform(0.5, 5.0, k))[::-1] + np.arange(k)[::-1] * 0.1
    g = SampleGrid.line(n)
    D = from_self_modes(g, [ModeSpec(a, U[:, i]) for i, a in enumerate(alphas)])
    ms = natural_modes(D)
    np.testing.assert_allclose(ms.spectrum[:k], alphas, rtol=1e-10)
    for i in range(k):
        assert np.max(principal_angles(U[:, [i]], ms.vectors[:, [i]])) < 1e-8
