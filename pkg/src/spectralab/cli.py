"""Batch experiment runner.

One subcommand per invocation; JSON configs in, plot-ready CSV plus a JSON
manifest out. Reruns with the same config and version produce byte-identical
CSV files (floats are rendered shortest-roundtrip). Plotting stays outside.

Exit codes: 0 success, 2 invalid config, 3 compute error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidConfig, SpectralabError
from .kernels import frobenius
from .measures import (KSet, TestFunction, select_compact_K, spectral_projection,
                       split_stone, stability_scan, stone_convergence,
                       stone_functional)
from .models import ModelConfig, build_model, validate
from .resolvent import SpectralParameter, lap_probe
from .resonance import (Box, classify_impacting, locate_resonances,
                        resonance_index, riesz_operator, track_trajectories)

SCHEMA_VERSION = 1

COMMANDS = ("validate", "lap-probe", "resonance-locate", "resonance-track",
            "riesz", "resonance-index", "stone-check", "stone-split",
            "select-k", "stability-scan")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _grid(doc, name) -> list[float]:
    """Resolve a grid spec: explicit list, {"linspace": [a,b,n]} or
    {"geomspace": [a,b,n]}."""
    if isinstance(doc, dict):
        if "linspace" in doc:
            a, b, n = doc["linspace"]
            return [float(v) for v in np.linspace(float(a), float(b), int(n))]
        if "geomspace" in doc:
            a, b, n = doc["geomspace"]
            return [float(v) for v in np.geomspace(float(a), float(b), int(n))]
        raise InvalidConfig(f"{name}: unknown grid spec {sorted(doc)}", field=name)
    if isinstance(doc, (list, tuple)) and doc:
        return [float(v) for v in doc]
    raise InvalidConfig(f"{name} must be a non-empty array or grid spec", field=name)


def _complex_pair(doc, name) -> complex:
    if isinstance(doc, (int, float)):
        return complex(doc)
    if isinstance(doc, (list, tuple)) and len(doc) == 2:
        return complex(float(doc[0]), float(doc[1]))
    raise InvalidConfig(f"{name} must be a number or [re, im]", field=name)


def _phi_from_config(doc) -> TestFunction:
    if not isinstance(doc, dict):
        raise InvalidConfig("phi must be an object", field="phi")
    if doc.get("kind") == "tent":
        return TestFunction.tent(float(doc["center"]), float(doc["halfwidth"]),
                                 float(doc["height"]))
    if "kset" in doc:
        kset = KSet([(float(a), float(b)) for a, b in doc["kset"]])
        return TestFunction.from_samples(kset, doc["nodes"], doc["values"])
    raise InvalidConfig("phi needs kind=tent or explicit kset/nodes/values",
                        field="phi")


def _tracking(doc) -> dict:
    if not isinstance(doc, dict) or "box" not in doc:
        raise InvalidConfig("tracking params must include a box", field="tracking")
    out = {"box": Box.from_sequence(doc["box"])}
    for key in ("y0", "y_min", "shrink"):
        if key in doc:
            out[key] = float(doc[key])
    if "window" in doc:
        out["window"] = (float(doc["window"][0]), float(doc["window"][1]))
    if "delta" in doc:
        out["delta"] = float(doc["delta"])
    return out


class _Run:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[dict] = []
        self.result: dict = {}

    def write_csv(self, name: str, header: list[str], rows) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        count = 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
                count += 1
        self.files.append({"name": name, "rows": count})


def _matrix_rows(mat: np.ndarray, extra=()):
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            yield (*extra, i, j, mat[i, j].real, mat[i, j].imag)


# --------------------------------------------------------------------------
# per-command runners; each consumes resolved params and fills run.files


def _run_validate(model, params, run, tol_seed):
    rep = validate(model)
    run.result = {
        "passed": rep.passed,
        "reasons": list(rep.reasons),
        "hermiticity_h0": rep.hermiticity_h0,
        "hermiticity_j": rep.hermiticity_j,
        "f_min_pivot": rep.f_min_pivot,
    }


def _run_lap_probe(model, params, run, tol_seed):
    lg = _grid(params.get("lambda_grid"), "lambda_grid")
    ys = _grid(params.get("y_schedule"), "y_schedule")
    s = float(params.get("s", 0.0))
    rep = lap_probe(model, lg, ys, s)
    rows = []
    for i, lam in enumerate(rep.lambda_grid):
        for k in range(len(ys) - 1):
            rows.append((SCHEMA_VERSION, lam, ys[k + 1], rep.increments[i, k]))
    run.write_csv("lap_increments.csv",
                  ["schema_version", "lambda", "y", "increment_op"], rows)
    rows = []
    for i, lam in enumerate(rep.lambda_grid):
        for (r, c, re, im) in ((r, c, v.real, v.imag)
                               for (r, c), v in np.ndenumerate(rep.limits[i])):
            rows.append((SCHEMA_VERSION, lam, r, c, re, im,
                         bool(rep.converged[i]), rep.level_spacing[i]))
    run.write_csv("lap_limits.csv",
                  ["schema_version", "lambda", "row", "col", "re", "im",
                   "converged", "level_spacing"], rows)
    run.result = {"continuity": rep.continuity,
                  "n_converged": int(np.sum(rep.converged))}


def _run_resonance_locate(model, params, run, tol_seed):
    z = _complex_pair(params.get("z"), "z")
    box = Box.from_sequence(params.get("box"))
    res = locate_resonances(model, z, box,
                            compute_riesz=bool(params.get("compute_riesz", True)))
    rows = []
    for p in res.points:
        kf = frobenius(p.riesz) if p.riesz is not None else float("nan")
        rank = p.riesz_rank() if p.riesz is not None else -1
        rows.append((SCHEMA_VERSION, p.r.real, p.r.imag, p.multiplicity,
                     p.det_residual, kf, rank))
    run.write_csv("resonances.csv",
                  ["schema_version", "re_r", "im_r", "multiplicity",
                   "det_residual", "riesz_frobenius", "riesz_rank"], rows)
    run.result = {"count": len(res.points),
                  "unresolved_boxes": len(res.unresolved)}


def _run_resonance_track(model, params, run, tol_seed):
    lam = float(params["lambda"])
    box = Box.from_sequence(params.get("box"))
    traj = track_trajectories(model, lam, params.get("y0"), params.get("y_min"),
                              params.get("shrink"), box)
    window = tuple(params.get("window", (0.0, 1.0)))
    traj = classify_impacting(traj, window, params.get("delta"))
    rows = []
    for bi, b in enumerate(traj.branches):
        for y, r in b.points:
            rows.append((SCHEMA_VERSION, bi, y, r.real, r.imag, b.multiplicity,
                         b.impacting, b.branching_suspected, b.lost))
    run.write_csv("trajectories.csv",
                  ["schema_version", "branch", "y", "re_r", "im_r",
                   "multiplicity", "impacting", "branching_suspected", "lost"],
                  rows)
    run.result = {"branches": len(traj.branches),
                  "endpoints": [[b.endpoint.real, b.endpoint.imag]
                                for b in traj.branches]}


def _run_riesz(model, params, run, tol_seed):
    z = _complex_pair(params.get("z"), "z")
    r = _complex_pair(params.get("r"), "r")
    radius = float(params.get("radius"))
    nodes = int(params.get("nodes", 64))
    k = riesz_operator(model, z, r, radius, nodes)
    run.write_csv("riesz.csv",
                  ["schema_version", "row", "col", "re", "im"],
                  _matrix_rows(k, (SCHEMA_VERSION,)))
    run.result = {"frobenius": frobenius(k)}


def _run_resonance_index(model, params, run, tol_seed):
    rep = resonance_index(model, float(params["lambda"]), float(params["r"]),
                          float(params["y_probe"]),
                          Box.from_sequence(params.get("box")))
    run.write_csv("index.csv",
                  ["schema_version", "lambda", "r", "n_plus", "n_minus",
                   "index", "y_probe", "match_radius"],
                  [(SCHEMA_VERSION, rep.lam, rep.r, rep.n_plus, rep.n_minus,
                    rep.index, rep.y_probe, rep.match_radius)])
    run.result = {"index": rep.index}


def _run_stone_check(model, params, run, tol_seed):
    phi = _phi_from_config(params.get("phi"))
    ys = _grid(params.get("y_schedule"), "y_schedule")
    rep = stone_convergence(model, float(params.get("r", 0.0)), phi, ys)
    rows = [(SCHEMA_VERSION, y, rep.errors[i], frobenius(rep.values[i]))
            for i, y in enumerate(ys)]
    run.write_csv("stone.csv",
                  ["schema_version", "y", "error_fro", "value_fro"], rows)
    run.result = {"est_order": rep.est_order,
                  "reference_fro": frobenius(rep.reference)}


def _run_stone_split(model, params, run, tol_seed):
    phi = _phi_from_config(params.get("phi"))
    r = float(params.get("r", 0.0))
    y = float(params["y"])
    tr = _tracking(params.get("tracking"))
    lg = _grid(params.get("lambda_grid"), "lambda_grid")
    trajs = []
    for lam in lg:
        t = track_trajectories(model, lam, tr.get("y0"), tr.get("y_min"),
                               tr.get("shrink"), tr["box"])
        trajs.append(classify_impacting(t, tr.get("window", (0.0, 1.0)),
                                        tr.get("delta")))
    ac, pole = split_stone(model, r, phi, y, trajs)
    total = stone_functional(model, r, phi, y)
    rows = []
    for name, mat in (("ac", ac), ("pole", pole), ("total", total)):
        rows.extend((SCHEMA_VERSION, name, i, j, v.real, v.imag)
                    for (i, j), v in np.ndenumerate(mat))
    run.write_csv("split.csv",
                  ["schema_version", "part", "row", "col", "re", "im"], rows)
    run.result = {"additivity_residual": frobenius(ac + pole - total),
                  "total_fro": frobenius(total)}


def _select(model, params):
    tr = _tracking(params.get("tracking"))
    lg = _grid(params.get("lambda_grid"), "lambda_grid")
    return select_compact_K(model, model.interval, float(params["epsilon"]),
                            lg, tr)


def _write_selection(sel, run):
    run.write_csv("kset.csv", ["schema_version", "index", "a", "b"],
                  [(SCHEMA_VERSION, i, a, b)
                   for i, (a, b) in enumerate(sel.k_set.intervals)])
    run.write_csv("exclusions.csv",
                  ["schema_version", "lambda", "reason", "halfwidth"],
                  [(SCHEMA_VERSION, lam, reason, hw)
                   for lam, reason, hw in sel.exclusions])
    run.result.update({"measure_removed": sel.measure_removed,
                       "epsilon": sel.epsilon})


def _run_select_k(model, params, run, tol_seed):
    sel = _select(model, params)
    _write_selection(sel, run)


def _run_stability_scan(model, params, run, tol_seed):
    rg = _grid(params.get("r_grid"), "r_grid")
    exclusions = ()
    if "k_set" in params:
        kset = KSet([(float(a), float(b)) for a, b in params["k_set"]])
    elif "select" in params:
        sel = _select(model, params["select"])
        _write_selection(sel, run)
        kset = sel.k_set
        exclusions = sel.exclusions
    else:
        raise InvalidConfig("stability-scan needs k_set or select", field="k_set")
    rep = stability_scan(model, kset, rg, exclusions)
    rows = [(SCHEMA_VERSION, r, rep.hs_values[i], rep.eig_counts[i])
            for i, r in enumerate(rep.r_grid)]
    run.write_csv("scan.csv",
                  ["schema_version", "r", "hs_norm", "eig_count"], rows)
    run.result.update({"max_hs": rep.max_hs})


_RUNNERS = {
    "validate": _run_validate,
    "lap-probe": _run_lap_probe,
    "resonance-locate": _run_resonance_locate,
    "resonance-track": _run_resonance_track,
    "riesz": _run_riesz,
    "resonance-index": _run_resonance_index,
    "stone-check": _run_stone_check,
    "stone-split": _run_stone_split,
    "select-k": _run_select_k,
    "stability-scan": _run_stability_scan,
}


def _load_model(doc, base: Path) -> tuple[ModelConfig, dict]:
    if isinstance(doc, str):
        path = base / doc if not Path(doc).is_absolute() else Path(doc)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise InvalidConfig(f"model file not found: {path}", field="model") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"model file is not valid JSON: {path}",
                                field="model") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig("model must be an object or a path", field="model")
    cfg = ModelConfig.from_dict(doc)
    return cfg, cfg.to_dict()


def _run_one(command: str, item: dict, out_dir: Path, seed_override,
             threads, config_base: Path) -> tuple[dict, int]:
    started = datetime.now(timezone.utc).isoformat()
    run = _Run(out_dir)
    manifest = {
        "command": command,
        "version": __version__,
        "started_utc": started,
        "threads": threads,
        "failure": None,
    }
    code = 0
    try:
        if "command" in item and item["command"] != command:
            raise InvalidConfig(
                f"config names command {item['command']!r} but {command!r} "
                "was invoked", field="command")
        cfg, model_echo = _load_model(item.get("model"), config_base)
        seed = seed_override if seed_override is not None else item.get("seed", cfg.seed)
        if not isinstance(seed, int) or seed < 0:
            raise InvalidConfig("seed must be a non-negative integer", field="seed")
        params = item.get("params", {})
        if not isinstance(params, dict):
            raise InvalidConfig("params must be an object", field="params")
        manifest["seed"] = seed
        manifest["config"] = {"command": command, "model": model_echo,
                              "params": params, "seed": seed}
        model = build_model(cfg)
        _RUNNERS[command](model, params, run, seed)
        manifest["result"] = run.result
    except InvalidConfig as exc:
        manifest["failure"] = {"category": "invalid-config",
                               "operation": command, "message": str(exc)}
        code = 2
    except SpectralabError as exc:
        manifest["failure"] = {"category": "compute-error",
                               "operation": type(exc).__name__,
                               "message": str(exc)}
        code = 3
    except (ValueError, KeyError, TypeError) as exc:
        manifest["failure"] = {"category": "invalid-config",
                               "operation": command, "message": str(exc)}
        code = 2
    except OSError as exc:
        manifest["failure"] = {"category": "io-error",
                               "operation": command, "message": str(exc)}
        code = 4
    manifest["files"] = run.files
    manifest["finished_utc"] = datetime.now(timezone.utc).isoformat()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "run_manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        code = code or 4
    return manifest, code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spectralab",
        description="coupling-resonance and stability-scan experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (object or array)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1,
                       help="recorded in the manifest; execution is serial "
                            "for determinism")
    args = parser.parse_args(argv)

    cfg_path = Path(args.config)
    try:
        doc = json.loads(cfg_path.read_text())
    except FileNotFoundError:
        print(f"error: config not found: {cfg_path}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4

    items = doc if isinstance(doc, list) else [doc]
    if not items:
        print("error: empty batch", file=sys.stderr)
        return 2
    base_out = Path(args.out) if args.out else None
    code = 0
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            print(f"error: batch item {i} is not an object", file=sys.stderr)
            return 2
        if "out" in item and args.out is None:
            out_dir = Path(item["out"])
        elif base_out is not None:
            out_dir = base_out / f"run-{i:03d}" if len(items) > 1 else base_out
        else:
            out_dir = Path(f"run-{i:03d}") if len(items) > 1 else Path("run")
        manifest, c = _run_one(args.command, item, out_dir, args.seed,
                               args.threads, cfg_path.parent)
        if manifest["failure"] is None:
            print(f"{args.command}: ok -> {out_dir}")
        else:
            print(f"{args.command}: {manifest['failure']['category']}: "
                  f"{manifest['failure']['message']}", file=sys.stderr)
        code = code or c
    return code


if __name__ == "__main__":
    sys.exit(main())
