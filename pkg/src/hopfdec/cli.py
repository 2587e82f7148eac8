"""Command-line front end.

    hopfdec mesh --level 3 --out s3_l3.json
    hopfdec hopf --level 3 --map hopf --out report.json
    hopfdec sweep --config sweep.json
    hopfdec geometry --seed 1 --out geometry.json
    hopfdec convergence --level 2 --out table.csv

Experiments are described by a JSON config; flags override its scalar
fields.  Exit codes: 0 success, 2 hypothesis gate (closedness / rank),
3 solver failure, 4 I/O or configuration error.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .cochain import HodgeError, PrimitiveError
from .complex import build_cone_mesh, build_sphere3_mesh, load_mesh, save_mesh
from .forms import builtin_form
from .heisenberg import HeisPoint, cc_distance, euclidean_distance, metric_comparison_check
from .hopf import (ClosednessError, OracleError, convergence_experiment, hopf, hopf_scaled,
                   homotopy_sweep)
from .maps import (MapSpec, compose_orthogonal, contact_check, curve_as_map,
                   figure_eight_embedding, lobe_area, precompose_rotation, radial_extension,
                   rank_profile, resolve_map, rotation_homotopy, z_rotation)

log = logging.getLogger("hopfdec")

EXIT_OK = 0
EXIT_GATE = 2
EXIT_SOLVER = 3
EXIT_IO = 4

COMMANDS = ("mesh", "hopf", "sweep", "geometry", "convergence")
FLOAT_FMT = "{:.12e}"


class ConfigError(ValueError):
    pass


class GateError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    mesh_level: int = 3
    map_spec: MapSpec = field(default_factory=lambda: MapSpec("hopf"))
    alpha: str = "s2_area_extended"
    tolerances: dict = field(default_factory=dict)
    p_exponent: float = 2.0
    seed: int = 0
    output_path: str = ""
    # command-specific knobs
    sweep_kind: str = "rotation"
    steps: int = 9
    rings: tuple = (0.25, 0.5, 0.75)
    radial_layers: int = 4
    k_max: int = 8
    sequence: str = "target"
    pairs: int = 1000
    batches: int = 2

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.mesh_level < 0:
            raise ConfigError("mesh_level must be >= 0")
        if self.command == "convergence":
            n = 1  # shipped meshes are S^3
            if self.p_exponent < 2.0 - 1.0 / (2 * n):
                raise ConfigError(f"p_exponent must be >= {2.0 - 1.0 / (2 * n)}")
            if self.k_max < 1:
                raise ConfigError("k_max must be >= 1")
            if self.sequence not in ("target", "domain"):
                raise ConfigError("sequence must be 'target' or 'domain'")
        if self.command == "sweep":
            if self.sweep_kind not in ("rotation", "radial"):
                raise ConfigError("sweep_kind must be 'rotation' or 'radial'")
            if self.steps < 1:
                raise ConfigError("steps must be >= 1")
            if self.sweep_kind == "radial" and self.radial_layers < 1:
                raise ConfigError("radial_layers must be >= 1")
        if self.command == "geometry" and (self.pairs < 1 or self.batches < 1):
            raise ConfigError("pairs and batches must be >= 1")
        return self

    def to_dict(self):
        d = asdict(self)
        d["rings"] = list(self.rings)
        return d

    def config_hash(self):
        d = self.to_dict()
        d.pop("output_path")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        spec = data.pop("map_spec", None) or data.pop("map", None)
        if isinstance(spec, str):
            spec = MapSpec(spec)
        elif isinstance(spec, dict):
            spec = MapSpec(spec["name"], dict(spec.get("parameters", {})))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        if spec is not None:
            cfg.map_spec = spec
        if isinstance(cfg.rings, list):
            cfg.rings = tuple(cfg.rings)
        return cfg


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def cache_dir():
    path = os.environ.get("HOPFDEC_CACHE")
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def sphere_mesh(level):
    """Level-`level` S^3 mesh, through the HOPFDEC_CACHE directory when set."""
    cdir = cache_dir()
    if cdir:
        path = os.path.join(cdir, f"s3_level{level}.json")
        if os.path.exists(path):
            return load_mesh(path)
        mesh = build_sphere3_mesh(level)
        save_mesh(mesh, path)
        return mesh
    return build_sphere3_mesh(level)


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return FLOAT_FMT.format(float(x))


def write_csv(cfg, header, rows, stream=None):
    lines = [f"# config-hash {cfg.config_hash()}", ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    _emit(cfg, text, stream)
    return text


def _round_floats(obj):
    if isinstance(obj, float):
        return float(FLOAT_FMT.format(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_floats(obj.item())
    return obj


def write_json(cfg, payload, stream=None):
    payload = dict(_round_floats(payload))
    payload["config_hash"] = cfg.config_hash()
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _emit(cfg, text, stream)
    return text


def _emit(cfg, text, stream):
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)


def _budget(cfg):
    return cfg.tolerances.get("closedness_budget")


def _primitive_tol(cfg):
    return float(cfg.tolerances.get("primitive_tol", 1e-10))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_mesh(cfg, stream=None):
    mesh = sphere_mesh(cfg.mesh_level)
    path = cfg.output_path or f"s3_level{cfg.mesh_level}.json"
    digest = save_mesh(mesh, path)
    info = {"path": path, "sha256": digest, "level": cfg.mesh_level, "counts": list(mesh.counts)}
    (stream or sys.stdout).write(json.dumps(info) + "\n")
    return info


def cmd_hopf(cfg, stream=None):
    mesh = sphere_mesh(cfg.mesh_level)
    f = resolve_map(cfg.map_spec, mesh, cfg.seed)
    alpha = builtin_form(cfg.alpha)
    rep = hopf(f, alpha, tol=_primitive_tol(cfg), budget=_budget(cfg), seed=cfg.seed)
    ranks = rank_profile(f)
    payload = rep.to_dict()
    payload["rank_fractions"] = ranks.fractions.tolist()
    payload["level"] = cfg.mesh_level
    write_json(cfg, payload, stream)
    return rep


def cmd_sweep(cfg, stream=None):
    alpha = builtin_form(cfg.alpha)
    mesh = sphere_mesh(cfg.mesh_level)
    f = resolve_map(cfg.map_spec, mesh, cfg.seed)
    kw = dict(tol=_primitive_tol(cfg), gauge_trials=0, oracle=False)
    if cfg.sweep_kind == "rotation":
        family = rotation_homotopy(f, cfg.steps)
        sweep = homotopy_sweep(family, alpha, budget=_budget(cfg), **kw)
        rows = [(t, r.value, r.closedness_residual, r.primitive_residual, abs(r.value - sweep.values[0]))
                for t, r in zip(sweep.times, sweep.reports)]
        return write_csv(cfg, ["t", "value", "closedness_residual", "primitive_residual",
                               "deviation"], rows, stream)
    cone = build_cone_mesh(mesh, cfg.radial_layers)
    big = radial_extension(f, cone)
    rows = []
    for r in cfg.rings:
        try:
            rep = hopf_scaled(big, r, alpha, budget=_budget(cfg), **kw)
        except ClosednessError as err:
            raise ClosednessError(err.residual, err.budget, where=float(r)) from err
        rows.append((r, rep.value, rep.closedness_residual, rep.primitive_residual))
    values = np.array([row[1] for row in rows])
    rows = [row + (abs(row[1] - values[0]),) for row in rows]
    return write_csv(cfg, ["r", "value", "closedness_residual", "primitive_residual", "deviation"],
                     rows, stream)


def convergence_sequence(g, mesh, k_max, sequence="target"):
    if sequence == "target":
        return [compose_orthogonal(g, z_rotation(1.0 / k), f"R(1/{k})*{g.name}")
                for k in range(1, k_max + 1)]
    return [precompose_rotation(mesh, 1.0 / k) for k in range(1, k_max + 1)]


def cmd_convergence(cfg, stream=None):
    alpha = builtin_form(cfg.alpha)
    mesh = sphere_mesh(cfg.mesh_level)
    g = resolve_map(cfg.map_spec, mesh, cfg.seed)
    seq = convergence_sequence(g, mesh, cfg.k_max, cfg.sequence)
    rows = convergence_experiment(seq, g, alpha, p=cfg.p_exponent, budget=_budget(cfg))
    return write_csv(cfg, ["k", "pullback_diff", "hi_diff", "hi_value", "identity_gap", "bound"],
                     [(r.k, r.pullback_diff, r.hi_diff, r.hi_value, r.identity_gap, r.bound)
                      for r in rows], stream)


def random_heisenberg_pairs(rng, count, scale=1.0):
    pts = rng.uniform(-scale, scale, size=(count, 2, 3))
    return [(HeisPoint.from_coords(a), HeisPoint.from_coords(b)) for a, b in pts]


def cmd_geometry(cfg, stream=None):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    origin = HeisPoint.identity(1)
    for label, p, q in [("coincident", origin, origin),
                        ("planar", origin, HeisPoint(np.array([1.0, 0.0]), 0.0))]:
        rep = cc_distance(p, q, seed=cfg.seed)
        rows.append({"label": label, "euclidean": euclidean_distance(p, q),
                     "upper": rep.distance_upper, "lower": rep.certified_lower,
                     "converged": rep.converged})
    batches = []
    for b in range(cfg.batches):
        pairs = random_heisenberg_pairs(rng, cfg.pairs)
        c_lower, c_upper = metric_comparison_check(pairs, seed=cfg.seed + b)
        batches.append({"batch": b, "pairs": cfg.pairs, "c_lower": c_lower, "c_upper": c_upper})
    curve = figure_eight_embedding(4001)
    fmap = curve_as_map(curve)
    contact = contact_check(fmap)
    ranks = rank_profile(fmap)
    payload = {
        "rows": rows,
        "metric_constants": batches,
        "figure_eight": {
            "closure": float(curve.t_samples[-1] - curve.t_samples[0]),
            "double_point_gap": float(curve.t_samples[len(curve.t_samples) // 2] - curve.t_samples[0]),
            "expected_gap": -4.0 * lobe_area(),
            "contact_max_residual": contact.max_residual,
            "rank_fractions": ranks.fractions.tolist(),
        },
    }
    write_json(cfg, payload, stream)
    return payload


HANDLERS = {"mesh": cmd_mesh, "hopf": cmd_hopf, "sweep": cmd_sweep, "geometry": cmd_geometry,
            "convergence": cmd_convergence}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not gate failures (argparse uses 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="hopfdec", description="Discrete Hopf invariants and Heisenberg geometry.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--level", type=int, dest="mesh_level")
        p.add_argument("--map", dest="map_name")
        p.add_argument("--alpha")
        p.add_argument("--out", dest="output_path")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--budget", type=float, help="override the closedness budget")
        if name == "convergence":
            p.add_argument("--p", type=float, dest="p_exponent")
            p.add_argument("--k-max", type=int, dest="k_max")
            p.add_argument("--sequence", choices=("target", "domain"))
        if name == "sweep":
            p.add_argument("--kind", dest="sweep_kind", choices=("rotation", "radial"))
            p.add_argument("--steps", type=int)
            p.add_argument("--layers", type=int, dest="radial_layers")
        if name == "geometry":
            p.add_argument("--pairs", type=int)
    return parser


def config_from_args(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        if data.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {data['command']!r}, not {args.command!r}")
    data["command"] = args.command
    cfg = ExperimentConfig.from_dict(data)
    for key in ("mesh_level", "alpha", "output_path", "seed", "p_exponent", "k_max", "sequence",
                "sweep_kind", "steps", "radial_layers", "pairs"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if args.map_name is not None:
        cfg.map_spec = MapSpec(args.map_name)
    if args.budget is not None:
        cfg.tolerances = dict(cfg.tolerances, closedness_budget=args.budget)
    return cfg.validate()


def main(argv=None, stream=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.threads:
            _kernels.set_threads(args.threads)
        HANDLERS[cfg.command](cfg, stream)
    except (ClosednessError, GateError) as err:
        print(f"hopfdec: hypothesis gate failed: {err}", file=sys.stderr)
        return EXIT_GATE
    except (PrimitiveError, HodgeError, OracleError) as err:
        print(f"hopfdec: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, KeyError, OSError, MemoryError, ValueError) as err:
        print(f"hopfdec: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
