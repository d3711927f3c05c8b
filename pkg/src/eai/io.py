"""
EAI1 container files, catalog descriptors, campaign configs and CSV dumps.

Binary layout::

    b"EAI1" | uint64 LE header length | UTF-8 JSON header | payload

The header lists every array (name, dtype, shape, present flag) in payload
order; arrays are stored row-major, little-endian.  Tensor blocks are
written in the order 11, 12, 21, 22.  The JSON-only variant embeds the
same header with each array inlined as real/imaginary lists.
"""
from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .interferometer import FringeRecord, MeasuredMatrix
from .modes import ModeSet
from .sources import SourceCatalog
from .tensor import BLOCK_ORDER, BlockResponseMatrix, SampleGrid

MAGIC = b"EAI1"
VERSION = 1
_DTYPES = {"complex128": "<c16", "float64": "<f8", "int64": "<i8", "bool": "|b1"}


@dataclass
class Container:
    kind: str
    header: dict
    arrays: dict = field(default_factory=dict)

    @property
    def meta(self) -> dict:
        return self.header.get("meta", {})

    @property
    def grid(self):
        g = self.header.get("grid")
        return None if g is None else SampleGrid.from_dict(g)


def _atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    _atomic_write(path, text.encode("utf-8"))


def _dtype_name(a):
    if np.iscomplexobj(a):
        return "complex128"
    if a.dtype == bool:
        return "bool"
    if np.issubdtype(a.dtype, np.integer):
        return "int64"
    return "float64"


def _json_mode(path, fmt):
    if fmt is not None:
        return fmt == "json"
    return str(path).endswith(".json")


def write_container(path, kind, arrays, meta=None, grid=None, omega0=None, fmt=None):
    """Write named arrays (``None`` marks an absent block) to ``path``."""
    header = {"format": "EAI1", "version": VERSION, "kind": kind, "endianness": "little",
              "omega0": omega0, "grid": None if grid is None else grid.to_dict(), "meta": meta or {},
              "arrays": []}
    payload = []
    use_json = _json_mode(path, fmt)
    for name, a in arrays:
        if a is None:
            header["arrays"].append({"name": name, "present": False})
            continue
        a = np.asarray(a)
        dn = _dtype_name(a)
        a = np.ascontiguousarray(a.astype(_DTYPES[dn]))
        entry = {"name": name, "present": True, "dtype": dn, "shape": list(a.shape)}
        if use_json:
            flat = a.reshape(-1)
            if dn == "complex128":
                entry["re"] = flat.real.tolist()
                entry["im"] = flat.imag.tolist()
            else:
                entry["data"] = flat.tolist()
        else:
            entry["nbytes"] = a.nbytes
            payload.append(a.tobytes(order="C"))
        header["arrays"].append(entry)
    if use_json:
        _atomic_write(path, json.dumps(header, indent=1).encode("utf-8"))
        return
    hb = json.dumps(header).encode("utf-8")
    _atomic_write(path, MAGIC + struct.pack("<Q", len(hb)) + hb + b"".join(payload))


def read_container(path) -> Container:
    """Parse a binary or JSON EAI1 container; raises :class:`FormatError`."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if raw[:4] == MAGIC:
        if len(raw) < 12:
            raise FormatError("truncated EAI1 header")
        (n,) = struct.unpack("<Q", raw[4:12])
        try:
            header = json.loads(raw[12:12 + n].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt EAI1 header: {exc}") from exc
        pos = 12 + n
        inline = False
    else:
        try:
            header = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FormatError(f"{path}: bad magic, not an EAI1 container") from None
        if not isinstance(header, dict) or header.get("format") != "EAI1":
            raise FormatError(f"{path}: bad magic, not an EAI1 container")
        inline = True
    if header.get("endianness", "little") != "little":
        raise FormatError("only little-endian payloads are supported")
    arrays = {}
    try:
        for entry in header["arrays"]:
            name = entry["name"]
            if not entry.get("present", True):
                arrays[name] = None
                continue
            dt = np.dtype(_DTYPES[entry["dtype"]])
            shape = tuple(entry["shape"])
            if inline:
                if entry["dtype"] == "complex128":
                    flat = np.array(entry["re"], dtype=float) + 1j * np.array(entry["im"], dtype=float)
                else:
                    flat = np.array(entry["data"], dtype=dt)
                a = flat.astype(dt).reshape(shape)
            else:
                nb = int(entry["nbytes"])
                if pos + nb > len(raw):
                    raise FormatError(f"payload truncated in array {name!r}")
                a = np.frombuffer(raw[pos:pos + nb], dtype=dt).reshape(shape).copy()
                pos += nb
            arrays[name] = a
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"corrupt EAI1 array table: {exc}") from exc
    return Container(header.get("kind", ""), header, arrays)


def _expect(c: Container, kind):
    if c.kind != kind:
        raise FormatError(f"expected a {kind!r} container, found {c.kind!r}")


# --- tensors -----------------------------------------------------------------

def save_tensor(path, D: BlockResponseMatrix, meta=None, convention="space", fmt=None, kind="tensor", extra=()):
    arrays = [(f"{m}{n}", D.block(m, n) if D.has_block(m, n) else None) for m, n in BLOCK_ORDER]
    meta = dict(meta or {})
    meta.setdefault("convention", convention)
    write_container(path, kind, arrays + list(extra), meta, D.grid, D.omega0, fmt)


def _tensor_from(c: Container) -> BlockResponseMatrix:
    grid = c.grid
    if grid is None:
        raise FormatError("tensor container lacks a grid")
    blocks = {}
    for m, n in BLOCK_ORDER:
        a = c.arrays.get(f"{m}{n}")
        if a is not None:
            blocks[(m, n)] = a
    return BlockResponseMatrix(grid, blocks, c.header.get("omega0") or 1.0)


def load_tensor(path) -> BlockResponseMatrix:
    c = read_container(path)
    if c.kind not in ("tensor", "reconstruction"):
        raise FormatError(f"expected a tensor container, found {c.kind!r}")
    return _tensor_from(c)


# --- measured matrices -------------------------------------------------------

def save_measured(path, mm: MeasuredMatrix, grid=None, fmt=None):
    arrays = [("M", mm.M), ("mask", mm.mask), ("singles", np.asarray(mm.singles, dtype=float)),
              ("force_types", np.asarray(mm.force_types if mm.force_types is not None else np.ones(mm.n), int))]
    if mm.fringes:
        arrays += [
            ("fringe_pairs", np.array([r.pair for r in mm.fringes], dtype=int)),
            ("fringe_phases", np.array([r.phases for r in mm.fringes], dtype=float)),
            ("fringe_powers", np.array([r.powers for r in mm.fringes], dtype=float)),
        ]
    meta = {"noise": mm.noise, "seed": mm.seed, "strategy": mm.strategy,
            "source_ids": [list(s) if isinstance(s, tuple) else s for s in mm.source_ids]}
    write_container(path, "measured", arrays, meta, grid, mm.omega0, fmt)


def load_measured(path) -> MeasuredMatrix:
    c = read_container(path)
    _expect(c, "measured")
    a = c.arrays
    fringes = []
    if a.get("fringe_pairs") is not None:
        for pair, ph, pw in zip(a["fringe_pairs"], a["fringe_phases"], a["fringe_powers"]):
            fringes.append(FringeRecord((int(pair[0]), int(pair[1])), ph, pw, c.meta.get("noise", 0.0)))
    ids = [tuple(s) if isinstance(s, list) else s for s in c.meta.get("source_ids", [])]
    return MeasuredMatrix(a["M"], a["mask"], a["singles"], c.header.get("omega0") or 1.0,
                          c.meta.get("noise", 0.0), c.meta.get("seed"), c.meta.get("strategy", "all-pairs"),
                          ids, a["force_types"], fringes)


# --- catalogs ----------------------------------------------------------------

def save_catalog(path, catalog: SourceCatalog, fmt=None):
    """Catalog as an EAI1 container: the ``F^src`` matrix plus descriptors."""
    meta = {"descriptors": catalog.to_descriptors(),
            "ids": [list(s) for s in catalog.ids]}
    write_container(path, "catalog", [("F", catalog.matrix()), ("force_types", catalog.force_types)],
                    meta, catalog.grid, None, fmt)


def load_catalog(path, grid=None) -> SourceCatalog:
    """Load a catalog from an EAI1 container or a JSON descriptor array."""
    text = None
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if raw[:4] != MAGIC:
        try:
            text = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FormatError(f"{path}: bad magic, not a catalog") from None
    if isinstance(text, list) or (isinstance(text, dict) and "sources" in text):
        descs = text if isinstance(text, list) else text["sources"]
        if grid is None and isinstance(text, dict) and text.get("grid"):
            grid = SampleGrid.from_dict(text["grid"])
        if grid is None:
            raise FormatError("catalog descriptor file needs a grid")
        return SourceCatalog.from_descriptors(grid, descs)
    c = read_container(path)
    _expect(c, "catalog")
    g = c.grid if grid is None else grid
    cat = SourceCatalog.from_descriptors(g, c.meta["descriptors"])
    if not np.array_equal(cat.matrix(), c.arrays["F"]):
        from .sources import CatalogEntry
        from .tensor import ForceVector

        # descriptors regenerate columns up to rounding; the stored matrix is authoritative
        F = c.arrays["F"]
        entries = []
        for e, col in zip(cat, F.T):
            vec = ForceVector(g, col[g.slice(e.force_type)], e.force_type)
            entries.append(CatalogEntry(e.source_id, e.force_type, vec, e.descriptor))
        cat = SourceCatalog(g, entries)
    return cat


def save_catalog_json(path, catalog: SourceCatalog, include_grid=True):
    """Human-editable catalog: descriptor list (optionally with the grid)."""
    doc = {"grid": catalog.grid.to_dict(), "sources": catalog.to_descriptors()} if include_grid else catalog.to_descriptors()
    atomic_write_text(path, json.dumps(doc, indent=1))


# --- mode sets ---------------------------------------------------------------

def save_modesets(path, modesets: dict, grid=None, meta=None, fmt=None):
    arrays, info = [], {}
    for name, ms in modesets.items():
        arrays += [(f"{name}/spectrum", np.asarray(ms.spectrum, dtype=float)),
                   (f"{name}/vectors", ms.vectors),
                   (f"{name}/right_vectors", ms.right_vectors)]
        info[name] = {"kind": ms.kind, "clusters": ms.clusters, "splits": list(ms.splits)}
    m = dict(meta or {})
    m["modesets"] = info
    write_container(path, "modeset", arrays, m, grid, None, fmt)


def save_modeset(path, ms: ModeSet, grid=None, fmt=None):
    save_modesets(path, {"modes": ms}, grid, fmt=fmt)


def load_modesets(path) -> dict:
    c = read_container(path)
    _expect(c, "modeset")
    out = {}
    for name, info in c.meta["modesets"].items():
        out[name] = ModeSet(info["kind"], c.arrays[f"{name}/spectrum"], c.arrays[f"{name}/vectors"],
                            c.arrays.get(f"{name}/right_vectors"), [list(x) for x in info["clusters"]],
                            tuple(info["splits"]))
    return out


def load_modeset(path, name="modes") -> ModeSet:
    sets = load_modesets(path)
    return sets[name] if name in sets else next(iter(sets.values()))


# --- reconstruction ----------------------------------------------------------

def save_reconstruction(path, result, fmt=None):
    extra = [("projector", result.projector), ("singular_values", np.asarray(result.singular_values, float))]
    save_tensor(path, result.tensor, meta={"diagnostics": _jsonable(result.diagnostics())}, fmt=fmt,
                kind="reconstruction", extra=extra)


# --- configs and CSV ---------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise FormatError("config must be a JSON object")
    return cfg


def write_fringe_csv(path, fringes, singles=None):
    """Fringe dump, one row per reading.  Single-source readings, if given,
    come first as rows with ``a == b`` and phase 0."""
    rows = [["a", "b", "phase", "power"]]
    if singles is not None:
        for i, p in enumerate(singles):
            rows.append([i, i, repr(0.0), repr(float(p))])
    for r in fringes:
        for ph, p in zip(r.phases, r.powers):
            rows.append([r.pair[0], r.pair[1], repr(float(ph)), repr(float(p))])
    _write_csv(path, rows)


def read_fringe_csv(path):
    """Return ``(singles, fringes)``: single-source powers by index and the
    two-source fringe records."""
    groups, singles = {}, {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            a, b = int(row["a"]), int(row["b"])
            if a == b:
                singles[a] = float(row["power"])
                continue
            groups.setdefault((a, b), []).append((float(row["phase"]), float(row["power"])))
    return singles, [FringeRecord(k, [p for p, _ in v], [q for _, q in v]) for k, v in groups.items()]


def write_vismap_csv(path, gamma, ref, ids=None):
    rows = [["ref", "index", "id", "re", "im", "abs"]]
    for j, g in enumerate(gamma):
        sid = "" if ids is None else json.dumps(list(ids[j]) if isinstance(ids[j], tuple) else ids[j])
        rows.append([ref, j, sid, repr(float(g.real)), repr(float(g.imag)), repr(float(abs(g)))])
    _write_csv(path, rows)


def write_spectrum_csv(path, spectrum):
    _write_csv(path, [["index", "alpha"]] + [[i, repr(float(a))] for i, a in enumerate(spectrum)])


def write_mode_profiles_csv(path, ms: ModeSet, grid, k):
    """Mode vectors over grid points, one row per (mode, state index)."""
    rows = [["mode", "alpha", "force_type", "point", "axis", "x", "y", "z", "re", "im", "abs"]]
    layout = []
    for m in grid.force_types:
        pts = grid.points_of(m)
        c = grid.components[m]
        for j in range(len(pts)):
            for s in range(c):
                layout.append((m, j, s, pts[j]))
    if ms.vectors.shape[0] != len(layout):
        # self-block mode sets cover a single domain
        m = grid.force_types[0] if len(grid.force_types) == 1 else 1
        layout = [x for x in layout if x[0] == m]
    for i in range(min(k, len(ms))):
        for row, (m, j, s, r) in enumerate(layout):
            z = ms.vectors[row, i]
            rows.append([i, repr(float(ms.spectrum[i])), m, j, s, r[0], r[1], r[2],
                         repr(float(z.real)), repr(float(z.imag)), repr(float(abs(z)))])
    _write_csv(path, rows)


def _write_csv(path, rows):
    import io as _io

    buf = _io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj):
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=1))
