import json
import struct

import numpy as np
import pytest

from eai import (
    BlockResponseMatrix,
    FormatError,
    SampleGrid,
    SourceCatalog,
    cross_modes,
    dual_basis,
    io,
    joint_modes,
    natural_modes,
    random_psd_system,
    reconstruct_response,
    run_campaign,
    to_kdomain,
)

from conftest import crandn, random_psd


@pytest.fixture(params=["eai", "json"])
def ext(request):
    return request.param


def _same_tensor(a, b):
    assert a.grid.same_layout(b.grid)
    np.testing.assert_array_equal(a.grid.points, b.grid.points)
    assert a.omega0 == b.omega0
    for m, n in ((1, 1), (1, 2), (2, 1), (2, 2)):
        assert a.has_block(m, n) == b.has_block(m, n)
        if a.has_block(m, n):
            assert np.array_equal(a.block(m, n), b.block(m, n))


def test_tensor_round_trip(tmp_path, ext, rng):
    g = SampleGrid.two_domain(3, 2, components=(1, 3))
    D = BlockResponseMatrix.from_full(g, random_psd(rng, 9) * np.pi, omega0=2.5)
    p = tmp_path / f"t.{ext}"
    io.save_tensor(p, D)
    _same_tensor(D, io.load_tensor(p))


def test_absent_blocks_flagged(tmp_path):
    g = SampleGrid.two_domain(2, 2)
    D = BlockResponseMatrix(g, {(1, 1): np.eye(2), (2, 2): 2 * np.eye(2)})
    p = tmp_path / "t.eai"
    io.save_tensor(p, D)
    c = io.read_container(p)
    flags = {a["name"]: a["present"] for a in c.header["arrays"]}
    assert flags == {"11": True, "12": False, "21": False, "22": True}
    assert [a["name"] for a in c.header["arrays"]] == ["11", "12", "21", "22"]
    assert c.header["endianness"] == "little"
    _same_tensor(D, io.load_tensor(p))


def test_binary_layout(tmp_path):
    g = SampleGrid.line(2)
    D = BlockResponseMatrix(g, {(1, 1): np.array([[1.0, 2 - 1j], [2 + 1j, 5.0]])})
    p = tmp_path / "t.eai"
    io.save_tensor(p, D)
    raw = p.read_bytes()
    assert raw[:4] == b"EAI1"
    (n,) = struct.unpack("<Q", raw[4:12])
    header = json.loads(raw[12:12 + n])
    assert header["omega0"] == 1.0
    payload = np.frombuffer(raw[12 + n:], dtype="<c16")
    np.testing.assert_array_equal(payload, D.full.reshape(-1))


def test_measured_round_trip(tmp_path, ext):
    g = SampleGrid.two_domain(3, 2)
    D = random_psd_system(g, [2, 1, 0.5], seed=3, force_type=None)
    cat = SourceCatalog.point_probes(g)
    for strategy in ("all-pairs", "reference:1"):
        mm = run_campaign(D, cat, strategy, noise=1e-3, seed=5)
        p = tmp_path / f"m-{strategy[:3]}.{ext}"
        io.save_measured(p, mm, g)
        back = io.load_measured(p)
        assert np.array_equal(back.M, mm.M)
        assert np.array_equal(back.mask, mm.mask)
        assert np.array_equal(back.singles, mm.singles)
        assert back.noise == mm.noise and back.seed == mm.seed and back.strategy == mm.strategy
        assert back.source_ids == mm.source_ids
        assert len(back.fringes) == len(mm.fringes)
        for a, b in zip(mm.fringes, back.fringes):
            assert a.pair == b.pair and np.array_equal(a.powers, b.powers)


def test_catalog_round_trip(tmp_path, ext, rng):
    g = SampleGrid.line(8, spacing=0.3)
    cat = SourceCatalog.plane_waves(g).subset([0, 3, 5])
    cat = cat.extended(SourceCatalog.from_columns(g, crandn(rng, 8, 2))._entries)
    p = tmp_path / f"c.{ext}"
    io.save_catalog(p, cat)
    back = io.load_catalog(p)
    assert back.ids == cat.ids
    assert np.array_equal(back.matrix(), cat.matrix())


def test_catalog_descriptor_file(tmp_path):
    g = SampleGrid.line(4, components=3)
    cat = SourceCatalog.point_probes(g).subset([0, 4, 11])
    p = tmp_path / "cat.json"
    io.save_catalog_json(p, cat)
    doc = json.loads(p.read_text())
    assert doc["sources"][1] == {"kind": "point", "force_type": 1, "index": 1, "axis": 1, "amplitude": [1.0, 0.0]}
    assert np.array_equal(io.load_catalog(p).matrix(), cat.matrix())
    io.save_catalog_json(p, cat, include_grid=False)
    assert np.array_equal(io.load_catalog(p, g).matrix(), cat.matrix())
    with pytest.raises(FormatError):
        io.load_catalog(p)


def test_modeset_round_trip(tmp_path, ext, rng):
    g = SampleGrid.two_domain(3, 3)
    D = BlockResponseMatrix.from_full(g, random_psd(rng, 6))
    sets = {"self1": natural_modes(D, 1), "joint": joint_modes(D)}
    sets["cross"] = cross_modes(D.block(1, 2))
    p = tmp_path / f"ms.{ext}"
    io.save_modesets(p, sets, g)
    back = io.load_modesets(p)
    for name, ms in sets.items():
        b = back[name]
        assert b.kind == ms.kind and b.splits == ms.splits and b.clusters == ms.clusters
        assert np.array_equal(b.spectrum, ms.spectrum)
        assert np.array_equal(b.vectors, ms.vectors)
        if ms.right_vectors is None:
            assert b.right_vectors is None
        else:
            assert np.array_equal(b.right_vectors, ms.right_vectors)


def test_reconstruction_and_kdomain_containers(tmp_path):
    g = SampleGrid.line(6)
    D = random_psd_system(g, [2, 1], seed=1)
    cat = SourceCatalog.point_probes(g)
    res = reconstruct_response(run_campaign(D, cat), dual_basis(cat), g, ground_truth=D)
    p = tmp_path / "r.eai"
    io.save_reconstruction(p, res)
    c = io.read_container(p)
    assert c.kind == "reconstruction"
    assert c.meta["diagnostics"]["rank"] == 6
    assert np.array_equal(c.arrays["projector"], res.projector)
    _same_tensor(res.tensor, io.load_tensor(p))
    q = tmp_path / "k.eai"
    io.save_tensor(q, to_kdomain(D), convention="k:unitary-dft")
    assert io.read_container(q).meta["convention"] == "k:unitary-dft"


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.eai"
    p.write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(FormatError, match="bad magic"):
        io.read_container(p)
    p.write_text('{"format": "other"}')
    with pytest.raises(FormatError):
        io.read_container(p)
    with pytest.raises(FormatError):
        io.read_container(tmp_path / "missing.eai")


def test_truncated_payload(tmp_path, rng):
    g = SampleGrid.line(4)
    p = tmp_path / "t.eai"
    io.save_tensor(p, BlockResponseMatrix(g, {(1, 1): random_psd(rng, 4)}))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError, match="truncated"):
        io.load_tensor(p)


def test_wrong_kind(tmp_path, rng):
    p = tmp_path / "t.eai"
    io.save_tensor(p, BlockResponseMatrix(SampleGrid.line(2), {(1, 1): np.eye(2)}))
    with pytest.raises(FormatError):
        io.load_measured(p)


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "t.eai"
    io.save_tensor(p, BlockResponseMatrix(SampleGrid.line(2), {(1, 1): np.eye(2)}))
    assert [f.name for f in p.parent.iterdir()] == ["t.eai"]


def test_fringe_csv_round_trip(tmp_path, rng):
    g = SampleGrid.line(4)
    D = random_psd_system(g, [1, 0.5], seed=2)
    mm = run_campaign(D, SourceCatalog.point_probes(g), noise=1e-2, seed=1)
    p = tmp_path / "f.csv"
    io.write_fringe_csv(p, mm.fringes, mm.singles)
    lines = p.read_text().splitlines()
    assert lines[0] == "a,b,phase,power"
    assert len(lines) == 1 + 4 + 6 * 4
    singles, back = io.read_fringe_csv(p)
    assert [singles[i] for i in range(4)] == mm.singles.tolist()
    for a, b in zip(mm.fringes, back):
        assert a.pair == b.pair
        assert np.array_equal(a.powers, b.powers) and np.array_equal(a.phases, b.phases)


def test_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(FormatError):
        io.load_config(p)
    p.write_text("{oops")
    with pytest.raises(FormatError):
        io.load_config(p)
