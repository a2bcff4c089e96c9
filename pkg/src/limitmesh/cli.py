"""Command-line interface.

Commands
--------
curve-surface
    Curve a surface (or the boundary of a volume) onto its limit model.
curve-volume
    Smooth planned features, then curve a tet mesh.
detect-features
    Suggest feature curves and points that can be smoothed.
report
    Lebesgue constants and distance / angle tables.

Exit status is 0 on success, 1 on pipeline errors and 2 on usage or I/O
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields

from .fileio import load_linear_mesh, write_mesh
from .interpolation import HighOrderMesh, generate_ho_surface_mesh
from .limit import LimitEvaluator
from .mesh import MeshError, VolumeMesh, extract_boundary
from .metrics import (
    best_approx_bounds,
    detect_smooth_candidates,
    lebesgue_constant,
    max_normal_angle,
    model_distance,
    write_csv,
    write_json,
)
from .nodes import MAX_WARP_BLEND_DEGREE
from .subdivision import ConvergenceError, SubdivisionError
from .volume import SmoothingPlan, curve_volume_mesh, smooth_features

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["PipelineConfig", "main"]

log = logging.getLogger("limitmesh")

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid configuration or unreadable input."""


@dataclass
class PipelineConfig:
    """Settings shared by all commands; command-line flags override the file."""

    input: str | None = None
    format: str | None = None
    degree: int = 4
    nodes: str = "equispaced"
    pre_refine: int = 0
    plan: str | None = None
    delta: float = 17.0
    char_length: float | None = None
    output: str | None = None
    report: str | None = None
    vtu: str | None = None
    dump_stages: bool = False
    threads: int = 1
    two_pass: bool = False
    lebesgue_only: bool = False
    resolution: int = 200

    def validate(self):
        if self.degree < 1:
            raise UsageError("degree must be >= 1")
        if self.pre_refine < 0:
            raise UsageError("pre-refine must be >= 0")
        if not 0.0 < self.delta < 180.0:
            raise UsageError("delta must lie in (0, 180)")
        if self.char_length is not None and not self.char_length > 0:
            raise UsageError("char-length must be positive")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        return self


def load_config(path):
    """Read a JSON or TOML configuration file into a dict."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        if str(path).endswith(".toml"):
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"invalid config {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


def build_config(args) -> PipelineConfig:
    values = load_config(args.config) if args.config else {}
    names = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for name in names:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            values[name] = v
    try:
        return PipelineConfig(**values).validate()
    except TypeError as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


# ----------------------------------------------------------------------
# helpers


def _load_input(cfg):
    if not cfg.input:
        raise UsageError("--input is required")
    if not os.path.exists(cfg.input):
        raise UsageError(f"input not found: {cfg.input}")
    try:
        return load_linear_mesh(cfg.input, cfg.format)
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _load_plan(cfg):
    if not cfg.plan:
        return None
    try:
        return SmoothingPlan.load(cfg.plan)
    except OSError as exc:
        raise UsageError(f"cannot read plan {cfg.plan}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid plan {cfg.plan}: {exc}") from exc


def _surface_of(mesh, model):
    if isinstance(mesh, VolumeMesh):
        surface, smodel, _ = extract_boundary(mesh, model)
        return surface, smodel
    return mesh, model


def _output(cfg, default_suffix):
    if cfg.output:
        return cfg.output
    stem = os.path.splitext(os.path.basename(cfg.input or "mesh"))[0]
    return f"{stem}{default_suffix}"


def _write(mesh, path, cfg, scalars=None, model=None):
    try:
        write_mesh(mesh, path, None, scalars, model, sidecar=True)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    log.info("wrote %s", path)


def _staged(ho, nodes):
    return HighOrderMesh(ho.degree, nodes, ho.elements, ho.distribution, ho.model, ho.linear)


# ----------------------------------------------------------------------
# commands


def cmd_curve_surface(cfg: PipelineConfig):
    mesh, model = _load_input(cfg)
    surface, smodel = _surface_of(mesh, model)
    plan = _load_plan(cfg)
    smodel = smooth_features(smodel, plan, surface.triangles)
    out = _output(cfg, f"_q{cfg.degree}.msh")
    if cfg.degree == 1 and not cfg.pre_refine:
        _write(surface, out, cfg, model=smodel)
        return EXIT_OK
    ho = generate_ho_surface_mesh(surface, smodel, cfg.degree, cfg.nodes, pre_refinement=cfg.pre_refine,
                                  threads=cfg.threads)
    log.info("control residual %.3g, max depth %d", ho.info["control_residual"], ho.info["max_depth"])
    _write(ho, out, cfg)
    scalars = {}
    if cfg.report:
        rep = model_distance(ho.evaluator, ho, cfg.char_length)
        lam = lebesgue_constant(ho.distribution, cfg.resolution).value
        lower, upper = best_approx_bounds(rep.distance, lam)
        data = rep.to_dict() | {"degree": cfg.degree, "nodes": ho.distribution.kind, "lebesgue": lam,
                                "best_approx_lower": lower, "best_approx_upper": upper,
                                "max_normal_angle_deg": max_normal_angle(ho)}
        write_json(data, cfg.report)
        scalars["distance"] = rep.elements
        log.info("distance %.6g", rep.distance)
    if cfg.vtu:
        _write(ho, cfg.vtu, cfg, scalars)
    return EXIT_OK


def cmd_curve_volume(cfg: PipelineConfig):
    mesh, model = _load_input(cfg)
    if not isinstance(mesh, VolumeMesh):
        raise UsageError("curve-volume needs a tetrahedral mesh")
    plan = _load_plan(cfg)
    out = _output(cfg, f"_q{cfg.degree}.msh")
    if cfg.pre_refine:
        log.warning("pre-refinement applies to surfaces only; ignored")
    ho = curve_volume_mesh(mesh, model, cfg.degree, plan, "equispaced", threads=cfg.threads,
                           keep_stages=cfg.dump_stages)
    if cfg.nodes != "equispaced":
        log.warning("volume meshes use equispaced nodes")
    _write(ho, out, cfg)
    reports = ho.info["quality"]
    for r in reports:
        log.info("%s: min quality %.4f, inverted %d", r.stage, r.min_quality, r.n_inverted)
    if cfg.report:
        if cfg.report.endswith(".csv"):
            write_csv([{k: v for k, v in r.to_dict().items() if k != "inverted"} for r in reports], cfg.report)
        else:
            write_json({"degree": cfg.degree, "stages": [r.to_dict() for r in reports]}, cfg.report)
    if cfg.dump_stages:
        stem, ext = os.path.splitext(out)
        for name in ("straight", "no-TFI"):
            _write(_staged(ho, ho.info["stages"][name]), f"{stem}.{name.lower()}{ext}", cfg)
    if cfg.vtu:
        _write(ho, cfg.vtu, cfg, {"quality": reports[-1].values})
    return EXIT_OK


def _suggest(surface, model, cfg, kinds):
    ho = generate_ho_surface_mesh(surface, model, cfg.degree, cfg.nodes, threads=cfg.threads)
    return detect_smooth_candidates(ho, model, cfg.delta, kinds, include_all=True)


def cmd_detect_features(cfg: PipelineConfig):
    mesh, model = _load_input(cfg)
    surface, smodel = _surface_of(mesh, model)
    smodel = smooth_features(smodel, _load_plan(cfg), surface.triangles)
    entries = []
    if cfg.two_pass:
        first = _suggest(surface, smodel, cfg, ("curve",))
        entries += [s.to_dict() | {"pass": 1} for s in first]
        accepted = SmoothingPlan(curves=[s.feature_id for s in first if s.suggested])
        smodel = smooth_features(smodel, accepted, surface.triangles)
        entries += [s.to_dict() | {"pass": 2} for s in _suggest(surface, smodel, cfg, ("point",))]
    else:
        entries += [s.to_dict() for s in _suggest(surface, smodel, cfg, ("curve", "point"))]
    out = _output(cfg, "_suggestions.json")
    write_json({"delta": cfg.delta, "degree": cfg.degree, "suggestions": entries}, out)
    n = sum(e["suggested"] for e in entries)
    log.info("%d of %d features suggested; wrote %s", n, len(entries), out)
    return EXIT_OK


def cmd_report(cfg: PipelineConfig):
    qmax = cfg.degree
    rows = []
    for q in range(1, qmax + 1):
        eq = lebesgue_constant(q, cfg.resolution, "equispaced").value
        wb = lebesgue_constant(q, cfg.resolution, "warpblend").value if q <= MAX_WARP_BLEND_DEGREE else None
        rows.append({"degree": q, "lebesgue_equispaced": round(eq, 6),
                     "lebesgue_warpblend": None if wb is None else round(wb, 6)})
    out = _output(cfg, "_lebesgue.csv")
    write_csv(rows, out)
    log.info("wrote %s", out)
    if cfg.input and not cfg.lebesgue_only:
        mesh, model = _load_input(cfg)
        surface, smodel = _surface_of(mesh, model)
        evaluator = LimitEvaluator(surface, smodel)
        table = []
        for q in range(1, qmax + 1):
            ho = generate_ho_surface_mesh(surface, smodel, q, cfg.nodes, evaluator=evaluator,
                                          threads=cfg.threads)
            rep = model_distance(evaluator, ho, cfg.char_length)
            lam = rows[q - 1]["lebesgue_warpblend" if ho.distribution.kind == "warpblend" else "lebesgue_equispaced"]
            lower, upper = best_approx_bounds(rep.distance, lam)
            table.append({"degree": q, "nodes": ho.distribution.kind, "distance": rep.distance,
                          "best_approx_lower": lower, "best_approx_upper": upper,
                          "max_normal_angle_deg": max_normal_angle(ho)})
        stem, ext = os.path.splitext(out)
        path = f"{stem}_distance{ext or '.csv'}"
        write_csv(table, path)
        log.info("wrote %s", path)
    return EXIT_OK


COMMANDS = {
    "curve-surface": cmd_curve_surface,
    "curve-volume": cmd_curve_volume,
    "detect-features": cmd_detect_features,
    "report": cmd_report,
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML file with default settings")
    common.add_argument("--input", "-i", help="input mesh (MSH 2.2 or 4.1)")
    common.add_argument("--format", help="input format (default: from extension)")
    common.add_argument("--degree", "-q", type=int, help="polynomial degree (report: largest degree)")
    common.add_argument("--nodes", choices=["equispaced", "warpblend"], help="nodal distribution")
    common.add_argument("--pre-refine", type=int, help="global subdivisions before curving")
    common.add_argument("--plan", help="smoothing plan or reviewed suggestion file (JSON)")
    common.add_argument("--delta", type=float, help="smoothing threshold in degrees")
    common.add_argument("--char-length", type=float, help="characteristic length for distances")
    common.add_argument("--output", "-o", help="output path")
    common.add_argument("--report", help="report path (JSON, or CSV for curve-volume)")
    common.add_argument("--vtu", help="extra VTU output with scalar fields")
    common.add_argument("--dump-stages", action="store_true", default=None,
                        help="write straight and pre-TFI volume meshes")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="limitmesh", description="High-order meshes on Loop limit models.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("curve-surface", parents=[common], help="curve a surface mesh")
    sub.add_parser("curve-volume", parents=[common], help="curve a tetrahedral mesh")
    p = sub.add_parser("detect-features", parents=[common], help="suggest features to smooth")
    p.add_argument("--two-pass", action="store_true", default=None,
                   help="smooth suggested curves, regenerate, then measure points")
    p = sub.add_parser("report", parents=[common], help="Lebesgue and distance tables")
    p.add_argument("--lebesgue-only", action="store_true", default=None, help="skip mesh tables")
    p.add_argument("--resolution", type=int, help="Lebesgue sampling lattice degree")
    return parser


def main(argv=None):
    """Entry point; returns the exit status."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, OSError) as exc:
        print(f"limitmesh: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshError, SubdivisionError, ConvergenceError, ValueError) as exc:
        print(f"limitmesh: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
