"""
Command-line driver: ``eai synth|scan|reconstruct|modes|vismap|kdomain|verify``.

Each command reads an optional JSON config (``--config``); any flag given
on the command line overrides the config key of the same name (dashes
become underscores).  Exit codes: 0 success, 1 usage, 2 validation,
3 I/O or format error, 4 tolerance failure in ``verify``.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .errors import DimensionError, EAIError, FormatError
from .interferometer import FOUR_PHASES, run_campaign, visibility_map
from .kdomain import diagonality, to_kdomain
from .modes import cross_modes, joint_modes, mode_count, natural_modes, principal_angles
from .reconstruct import convergence_metric, reconstruct_response
from .sources import TAU_SVD, SourceCatalog, dual_basis
from .synth import ModeSpec, from_self_modes, random_psd_system
from .tensor import TAU_HERM, BlockResponseMatrix, SampleGrid, hs_norm, validate

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_FORMAT, EXIT_TOLERANCE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


DEFAULTS = {
    "synth": {"coherence_length": 1.0, "seed": 0, "omega0": 1.0, "joint": False, "force_type": 1},
    "scan": {"catalog": "identity", "strategy": "all-pairs", "noise": 0.0, "seed": 0, "omega0": None,
             "phases": None},
    "reconstruct": {"tau_svd": TAU_SVD, "clip_psd": False},
    "modes": {"eta": 0.999, "tau_herm": TAU_HERM, "top": None, "force_type": None},
    "vismap": {"ref": 0},
    "kdomain": {},
    "verify": {"tol_spectrum": 1e-10, "tol_angle": 1e-8, "tol_filter": 1e-10, "tau_svd": TAU_SVD, "top": None},
}


def _merge(cmd, args):
    cfg = dict(DEFAULTS[cmd])
    if args.config:
        cfg.update(io.load_config(args.config))
    for k, v in vars(args).items():
        if k in ("config", "command", "func") or v is None:
            continue
        cfg[k] = v
    return cfg


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) in (None, ""):
            raise UsageError(f"missing required setting {k!r} (flag --{k.replace('_', '-')} or config key)")


def _sibling(out, suffix):
    p = Path(out)
    return p.with_name(p.stem + suffix)


# --- grid and catalog helpers ------------------------------------------------

def _grid_from_config(g):
    if g is None:
        raise UsageError("config lacks a 'grid' section")
    if "points" in g:
        return SampleGrid.from_dict(g)
    kind = g.get("type", "line")
    spacing = float(g.get("spacing", 1.0))
    if kind == "line":
        return SampleGrid.line(int(g["n"]), spacing, int(g.get("components", 1)))
    if kind == "two_domain":
        comps = tuple(g.get("components", (1, 1)))
        return SampleGrid.two_domain(int(g["n1"]), int(g["n2"]), comps, spacing, float(g.get("gap", 0.0)))
    raise UsageError(f"unknown grid type {kind!r}")


def _catalog(spec, grid):
    if isinstance(spec, list):
        return SourceCatalog.from_descriptors(grid, spec)
    if spec == "identity":
        return SourceCatalog.point_probes(grid)
    if spec == "plane-waves":
        return SourceCatalog.plane_waves(grid)
    try:
        cat = io.load_catalog(spec, grid)
    except DimensionError as exc:
        raise EAIError(f"catalog grid is incompatible with the tensor grid ({exc})") from exc
    if not cat.grid.same_layout(grid):
        raise EAIError("catalog grid is incompatible with the tensor grid")
    return cat


def _complex_vector(v):
    return np.array([complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z) for z in v])


# --- commands ----------------------------------------------------------------

def cmd_synth(cfg):
    _need(cfg, "out")
    if cfg.get("modes_file"):
        cfg = {**cfg, **io.load_config(cfg["modes_file"]), "out": cfg["out"], "seed": cfg["seed"]}
    grid = _grid_from_config(cfg.get("grid"))
    seed = int(cfg["seed"])
    omega0 = float(cfg["omega0"])
    if "modes" in cfg and isinstance(cfg["modes"], list):
        m = int(cfg["force_type"])
        specs = [ModeSpec(float(d["alpha"]), _complex_vector(d["vector"])) for d in cfg["modes"]]
        block = from_self_modes(grid, specs, m)
        D = BlockResponseMatrix(grid, {(m, m): block}, omega0)
        order = np.argsort([-s.alpha for s in specs])
        alphas = np.array([specs[i].alpha for i in order])
        V = np.column_stack([specs[i].vector for i in order]) if specs else np.zeros((grid.dim(m), 0))
        splits = ()
    else:
        _need(cfg, "spectrum")
        ft = None if cfg.get("joint") else int(cfg["force_type"])
        D, alphas, V = random_psd_system(grid, cfg["spectrum"], float(cfg["coherence_length"]), seed,
                                         ft, omega0, return_modes=True)
        splits = tuple(grid.dim(m) for m in grid.force_types) if ft is None else ()
    rep = validate(D)
    io.save_tensor(cfg["out"], D, meta={"seed": seed, "command": "synth"})
    from .modes import ModeSet

    truth = ModeSet("joint" if splits else "self-eigen", alphas, V, None, [], splits)
    io.save_modesets(_sibling(cfg["out"], ".modes.eai"), {"ground_truth": truth}, grid, meta={"seed": seed})
    print(rep.summary())
    print(f"hs_norm {hs_norm(D):.15g}")
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def cmd_scan(cfg):
    _need(cfg, "tensor", "out")
    D = io.load_tensor(cfg["tensor"])
    cat = _catalog(cfg["catalog"], D.grid)
    phases = tuple(cfg["phases"]) if cfg.get("phases") else FOUR_PHASES
    strategy = cfg["strategy"]
    if isinstance(strategy, list):
        strategy = [tuple(p) for p in strategy]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mm = run_campaign(D, cat, strategy, float(cfg["noise"]), int(cfg["seed"]), cfg.get("omega0"), phases)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    cat_path = _sibling(cfg["out"], ".catalog.eai")
    io.save_catalog(cat_path, cat)
    mm.source_ids = list(cat.ids)
    io.save_measured(cfg["out"], mm, D.grid)
    io.write_fringe_csv(_sibling(cfg["out"], ".fringes.csv"), mm.fringes, mm.singles)
    print(f"{mm.n} singles + {len(mm.fringes)} fringes ({len(phases)} phases each), strategy {mm.strategy}")
    if mm.strategy.startswith("reference"):
        ref = int(mm.strategy.split(":")[1])
        path = _sibling(cfg["out"], ".vismap.csv")
        io.write_vismap_csv(path, visibility_map(mm, ref), ref, cat.ids)
        print(f"visibility map for reference {ref} written to {path}")
        return EXIT_OK
    if mm.noise == 0:
        F = cat.matrix()
        exact = F.conj().T @ D.full @ F
        err = float(np.max(np.abs(mm.M - exact)))
        scale = max(np.linalg.norm(D.full) * np.linalg.norm(F, 2) ** 2, 1e-300)
        print(f"noiseless check: max |M - F^H D F| = {err:.3e}")
        if err > 1e-12 * scale:
            return EXIT_TOLERANCE
    return EXIT_OK


def _load_catalog_for(cfg, grid):
    spec = cfg.get("catalog")
    if spec is None:
        guess = _sibling(cfg["measured"], ".catalog.eai")
        if not guess.exists():
            raise UsageError("no catalog given and none found next to the measured file")
        spec = str(guess)
    return _catalog(spec, grid)


def cmd_reconstruct(cfg):
    _need(cfg, "measured", "out")
    c = io.read_container(cfg["measured"])
    grid = c.grid
    mm = io.load_measured(cfg["measured"])
    cat = _load_catalog_for(cfg, grid)
    duals = dual_basis(cat, float(cfg["tau_svd"]))
    truth = io.load_tensor(cfg["tensor"]) if cfg.get("tensor") else None
    res = reconstruct_response(mm, duals, grid, clip_psd=bool(cfg["clip_psd"]), ground_truth=truth)
    io.save_reconstruction(cfg["out"], res)
    diag = res.diagnostics()
    diag["seed"] = mm.seed
    io.write_json(_sibling(cfg["out"], ".diagnostics.json"), diag)
    print(f"rank {res.rank}/{mm.n}, min eigenvalue {res.min_eigenvalue:.3e}, psd violation {res.psd_violation:.3e}")
    if res.noise_estimate is not None:
        print(f"propagated noise estimate {res.noise_estimate:.3e}")
    for k, v in res.residuals.items():
        print(f"{k} {v:.3e}")
    return EXIT_OK


def cmd_modes(cfg):
    _need(cfg, "tensor", "out")
    D = io.load_tensor(cfg["tensor"])
    c = io.read_container(cfg["tensor"])
    eta = float(cfg["eta"])
    sets = {}
    report = {"eta": eta, "seed": c.meta.get("seed"), "source": str(cfg["tensor"])}
    types = D.grid.force_types if cfg.get("force_type") is None else (int(cfg["force_type"]),)
    for m in types:
        ms = natural_modes(D, m, float(cfg["tau_herm"]))
        sets[f"self{m}"] = ms
        report[f"self{m}"] = {"spectrum": ms.spectrum.tolist(), "mode_count": mode_count(ms.spectrum, eta),
                              "degenerate_clusters": ms.clusters}
    if len(D.grid.force_types) == 2 and cfg.get("force_type") is None:
        js = joint_modes(D, float(cfg["tau_herm"]))
        cs = cross_modes(D.block(1, 2))
        sets["joint"], sets["cross"] = js, cs
        report["joint"] = {"spectrum": js.spectrum.tolist(), "mode_count": mode_count(js.spectrum, eta)}
        report["cross"] = {"weights": cs.spectrum.tolist()}
    if cfg.get("previous"):
        prev = io.load_modeset(cfg["previous"], next(iter(sets)))
        cur = next(iter(sets.values()))
        k = int(cfg["top"] or mode_count(cur.spectrum, eta) or 1)
        report["convergence"] = {"top": k, "metric": convergence_metric(prev, cur, k)}
    first = next(iter(sets.values()))
    k = int(cfg["top"] or max(mode_count(first.spectrum, eta), 1))
    out = Path(cfg["out"])
    io.write_json(out, report)
    io.save_modesets(_sibling(out, ".eai"), sets, D.grid, meta={"eta": eta, "seed": c.meta.get("seed")})
    io.write_spectrum_csv(_sibling(out, ".spectrum.csv"), first.spectrum)
    io.write_mode_profiles_csv(_sibling(out, ".csv"), first, D.grid, k)
    for name, ms in sets.items():
        head = ", ".join(f"{a:.6g}" for a in ms.spectrum[:8])
        print(f"{name}: {len(ms)} modes, leading [{head}], mode count (eta={eta}) {mode_count(ms.spectrum, eta)}")
    return EXIT_OK


def cmd_vismap(cfg):
    _need(cfg, "out")
    ref = int(cfg["ref"])
    if cfg.get("measured"):
        mm = io.load_measured(cfg["measured"])
        gamma, ids = visibility_map(mm, ref), mm.source_ids
    else:
        _need(cfg, "tensor")
        gamma, ids = visibility_map(io.load_tensor(cfg["tensor"]), ref), None
    io.write_vismap_csv(cfg["out"], gamma, ref, ids)
    ok = np.isfinite(gamma)
    print(f"{int(ok.sum())} defined visibilities, max |gamma| {np.max(np.abs(gamma[ok]), initial=0.0):.6g}")
    return EXIT_OK


def cmd_kdomain(cfg):
    _need(cfg, "tensor", "out")
    D = io.load_tensor(cfg["tensor"])
    meta = io.read_container(cfg["tensor"]).meta
    Dk = to_kdomain(D)
    io.save_tensor(cfg["out"], Dk, meta={"seed": meta.get("seed")}, convention="k:unitary-dft,exp(-ik.r)")
    d = diagonality(Dk)
    rep = {"diagonality": None if np.isnan(d) else d, "convention": "unitary-dft,exp(-ik.r)",
           "diagonal": np.real(np.diag(Dk.full)).tolist(), "seed": meta.get("seed")}
    io.write_json(_sibling(cfg["out"], ".json"), rep)
    print(f"off-diagonal energy fraction {d:.3e}")
    return EXIT_OK


def _top_k(alpha, tau):
    a = np.asarray(alpha)
    if a.size == 0 or a[0] <= 0:
        return 0
    return int(np.count_nonzero(a > tau * a[0]))


def cmd_verify(cfg):
    _need(cfg, "truth", "result")
    D = io.load_tensor(cfg["truth"])
    c = io.read_container(cfg["result"])
    ok = True
    if c.kind == "measured":
        mm = io.load_measured(cfg["result"])
        F = _catalog(cfg.get("catalog") or str(_sibling(cfg["result"], ".catalog.eai")), D.grid).matrix() \
            if cfg.get("catalog") or _sibling(cfg["result"], ".catalog.eai").exists() else np.eye(D.full.shape[0])
        err = float(np.max(np.abs(mm.M - F.conj().T @ D.full @ F)) / max(np.linalg.norm(D.full), 1e-300))
        print(f"measured-matrix error {err:.3e}")
        ok &= err <= float(cfg["tol_spectrum"])
        return EXIT_OK if ok else EXIT_TOLERANCE
    R = _tensor_from_container(c)
    full = D.full
    if cfg.get("catalog"):
        duals = dual_basis(_catalog(cfg["catalog"], D.grid), float(cfg["tau_svd"]))
        if duals.rank < full.shape[0]:
            P = duals.projector()
            resid = float(np.linalg.norm(R.full - P @ full @ P) / max(np.linalg.norm(full), 1e-300))
            print(f"filter rank {duals.rank} of {full.shape[0]}")
            print(f"P D P residual {resid:.3e}")
            ok &= resid <= float(cfg["tol_filter"])
            return EXIT_OK if ok else EXIT_TOLERANCE
    sets = [(m, natural_modes(D, m), natural_modes(R, m)) for m in D.grid.force_types]
    if len(D.grid.force_types) == 2:
        sets.append(("joint", joint_modes(D), joint_modes(R)))
    for name, t, r in sets:
        k = int(cfg["top"] or _top_k(t.spectrum, 1e-10))
        if k == 0:
            print(f"[{name}] no modes above threshold")
            continue
        a, b = t.spectrum[:k], r.spectrum[:k]
        serr = float(np.max(np.abs(a - b)) / abs(a[0]))
        ang = principal_angles(t.top(k), r.top(k))
        print(f"[{name}] top {k}: spectrum error {serr:.3e}, max principal angle {np.max(ang):.3e} rad")
        ok &= serr <= float(cfg["tol_spectrum"]) and float(np.max(ang)) <= float(cfg["tol_angle"])
    print("verify: PASS" if ok else "verify: FAIL")
    return EXIT_OK if ok else EXIT_TOLERANCE


def _tensor_from_container(c):
    if c.kind not in ("tensor", "reconstruction"):
        raise FormatError(f"cannot compare against a {c.kind!r} container")
    return io._tensor_from(c)


# --- parser ------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON config; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--out", help="output path")


def build_parser():
    parser = _Parser(prog="eai", description="Energy absorption interferometry pipeline")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesise a response tensor with known modes")
    _common(p)
    p.add_argument("--modes", dest="modes_file", help="mode/spectrum spec JSON")
    p.add_argument("--spectrum", type=float, nargs="+")
    p.add_argument("--coherence-length", type=float)
    p.add_argument("--omega0", type=float)
    p.add_argument("--joint", action="store_true", default=None, help="modes span both domains")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scan", help="simulate an interferometric campaign")
    _common(p)
    p.add_argument("--tensor")
    p.add_argument("--catalog", help="catalog file, 'identity' or 'plane-waves'")
    p.add_argument("--strategy", help="all-pairs, ordered-pairs or reference:<index>")
    p.add_argument("--omega0", type=float)
    p.add_argument("--phases", type=float, nargs="+")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("reconstruct", help="recover the tensor through the dual basis")
    _common(p)
    p.add_argument("--measured")
    p.add_argument("--catalog")
    p.add_argument("--tensor", help="ground truth for residuals")
    p.add_argument("--tau-svd", type=float)
    p.add_argument("--clip-psd", action="store_true", default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("modes", help="decompose a tensor into natural modes")
    _common(p)
    p.add_argument("--tensor")
    p.add_argument("--eta", type=float)
    p.add_argument("--top", type=int)
    p.add_argument("--force-type", type=int)
    p.add_argument("--previous", help="earlier mode-set file for the convergence metric")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("vismap", help="complex visibilities against a reference source")
    _common(p)
    p.add_argument("--measured")
    p.add_argument("--tensor")
    p.add_argument("--ref", type=int)
    p.set_defaults(func=cmd_vismap)

    p = sub.add_parser("kdomain", help="transform a lattice tensor to wave-vector space")
    _common(p)
    p.add_argument("--tensor")
    p.set_defaults(func=cmd_kdomain)

    p = sub.add_parser("verify", help="compare a result against ground truth")
    _common(p)
    p.add_argument("--truth")
    p.add_argument("--result")
    p.add_argument("--catalog")
    p.add_argument("--top", type=int)
    p.add_argument("--tau-svd", type=float)
    p.add_argument("--tol-spectrum", type=float)
    p.add_argument("--tol-angle", type=float)
    p.add_argument("--tol-filter", type=float)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _merge(args.command, args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"eai {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError, json.JSONDecodeError) as exc:
        print(f"eai {args.command}: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (EAIError, ValueError, KeyError) as exc:
        print(f"eai {args.command}: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
