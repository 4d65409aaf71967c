"""Command-line entry point: configuration parsing, experiment dispatch,
deterministic serialization and seed management.

All JSON and CSV bodies are written with fixed 17-significant-digit floats and
sorted keys, so a rerun with the same config and seed is byte-identical; the
manifest (which carries wall-clock metadata) is the only non-reproducible
artifact and every other output references its config hash.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass

from . import __version__
from .constants import compute_Ck, covariance_constants
from .engine import apply_worker_override
from .errors import ConfigError, ConsistencyError, DomainError
from .experiments import (
    DEFAULT_DT,
    DEFAULT_T_GRID,
    ExperimentConfig,
    FluctuationSummary,
    build_joint_subsequence,
    build_subsequence,
    run_experiment,
)
from .paths import EnvelopeProfile, sample_path
from .pruefer import count_interval, fd_count_interval, integrate_theta
from .torusfield import TorusFunction

SUBCOMMANDS = ("constants", "envelope", "count", "experiment",
               "oracle-compare", "subsequence")

USAGE = (
    "usage: dosfluct <subcommand> [options]\n"
    f"subcommands: {', '.join(SUBCOMMANDS)}\n"
)


# -- canonical serialization -------------------------------------------------


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ConsistencyError(f"non-finite value {x!r} in output")
    return format(x, ".17g")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out = io.StringIO()

    def emit(node):
        if isinstance(node, bool) or node is None or isinstance(node, str):
            out.write(json.dumps(node))
        elif isinstance(node, int):
            out.write(str(node))
        elif isinstance(node, float):
            out.write(_format_float(node))
        elif isinstance(node, dict):
            out.write("{")
            for i, key in enumerate(sorted(node)):
                if i:
                    out.write(",")
                out.write(json.dumps(str(key)))
                out.write(":")
                emit(node[key])
            out.write("}")
        elif isinstance(node, (list, tuple)):
            out.write("[")
            for i, item in enumerate(node):
                if i:
                    out.write(",")
                emit(item)
            out.write("]")
        else:
            raise ConsistencyError(f"unserializable value {node!r}")

    emit(obj)
    return out.getvalue()


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return _format_float(v)
    return str(v)


# -- profile shorthands ------------------------------------------------------

_PROFILES = {
    "cos": lambda: TorusFunction.cosine(1),
    "cos2": lambda: TorusFunction.cosine(2),
    "cos+cos2": lambda: TorusFunction.cosine(1) + TorusFunction.cosine(2, 0.5),
    "zero": TorusFunction.zero,
}


def parse_profile(spec) -> TorusFunction:
    """A profile is either a named shorthand or a TorusFunction JSON object."""
    if isinstance(spec, str):
        if spec in _PROFILES:
            return _PROFILES[spec]()
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"unknown profile {spec!r}; use one of {sorted(_PROFILES)} "
                "or a TorusFunction JSON object"
            ) from exc
    if isinstance(spec, dict):
        try:
            return TorusFunction.from_json_obj(spec)
        except DomainError as exc:
            raise ConfigError(f"field F: {exc}") from exc
    raise ConfigError(f"field F: expected name or object, got {type(spec).__name__}")


# -- experiment config parsing ------------------------------------------------

_CONFIG_FIELDS = {
    "model", "regime", "F", "alpha", "delta", "kappas", "t_grid",
    "n_list", "paths", "dt", "seed", "D", "subsequence",
}
_SUBSEQ_FIELDS = {"gamma1", "gamma2", "count", "n_max"}


def parse_config(text: str) -> tuple[ExperimentConfig, dict | None]:
    """Validate a JSON ExperimentConfig document; unknown fields are rejected
    and defaults (dt, t_grid, D) are filled.  Returns the config plus the
    optional subsequence request."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not well-formed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    def need(name, types, what):
        if name not in obj:
            raise ConfigError(f"field {name}: required ({what})")
        val = obj[name]
        if not isinstance(val, types):
            raise ConfigError(f"field {name}: expected {what}, got {val!r}")
        return val

    model = need("model", str, "string")
    regime = need("regime", str, "string")
    F = parse_profile(need("F", (str, dict), "profile name or object"))
    kappas_raw = need("kappas", list, "list of [kappa1, kappa2] pairs")
    pairs = []
    for item in kappas_raw:
        if (not isinstance(item, list) or len(item) != 2
                or not all(isinstance(v, (int, float)) for v in item)):
            raise ConfigError(f"field kappas: each entry must be [kappa1, kappa2], got {item!r}")
        pairs.append((float(item[0]), float(item[1])))
    n_list_raw = need("n_list", list, "list of box lengths")
    n_list = []
    for v in n_list_raw:
        if not isinstance(v, (int, float)) or int(v) != v or v <= 0:
            raise ConfigError(f"field n_list: entries must be positive integers, got {v!r}")
        n_list.append(int(v))
    paths = need("paths", int, "integer")
    alpha = obj.get("alpha")
    delta = obj.get("delta")
    for name, val in (("alpha", alpha), ("delta", delta)):
        if val is not None and not isinstance(val, (int, float)):
            raise ConfigError(f"field {name}: expected number, got {val!r}")
    t_grid = obj.get("t_grid", list(DEFAULT_T_GRID))
    if (not isinstance(t_grid, list)
            or not all(isinstance(v, (int, float)) for v in t_grid)):
        raise ConfigError(f"field t_grid: expected list of numbers, got {t_grid!r}")
    dt = obj.get("dt", DEFAULT_DT)
    if not isinstance(dt, (int, float)):
        raise ConfigError(f"field dt: expected number, got {dt!r}")
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"field seed: expected integer, got {seed!r}")
    D = obj.get("D")
    if D is not None and not isinstance(D, int):
        raise ConfigError(f"field D: expected integer, got {D!r}")

    subseq = obj.get("subsequence")
    if subseq is not None:
        if not isinstance(subseq, dict):
            raise ConfigError("field subsequence: expected object")
        unknown = set(subseq) - _SUBSEQ_FIELDS
        if unknown:
            raise ConfigError(f"unknown subsequence fields: {sorted(unknown)}")
        for name in _SUBSEQ_FIELDS:
            if name not in subseq:
                raise ConfigError(f"field subsequence.{name}: required")
            if not isinstance(subseq[name], (int, float)):
                raise ConfigError(f"field subsequence.{name}: expected number")

    cfg = ExperimentConfig(
        model=model,
        regime=regime,
        F=F,
        alpha=float(alpha) if alpha is not None else None,
        delta=float(delta) if delta is not None else None,
        kappa_pairs=tuple(pairs),
        t_grid=tuple(float(t) for t in t_grid),
        n_list=tuple(n_list),
        paths=paths,
        dt=float(dt),
        seed=seed,
        D=D,
    )
    return cfg, subseq


def config_to_json_obj(cfg: ExperimentConfig, subseq: dict | None = None) -> dict:
    out = {
        "model": cfg.model,
        "regime": cfg.regime,
        "F": cfg.F.to_json_obj(),
        "kappas": [list(p) for p in cfg.kappa_pairs],
        "n_list": list(cfg.n_list),
        "t_grid": list(cfg.t_grid),
        "paths": cfg.paths,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "D": cfg.D,
    }
    if cfg.alpha is not None:
        out["alpha"] = cfg.alpha
    if cfg.delta is not None:
        out["delta"] = cfg.delta
    if subseq is not None:
        out["subsequence"] = dict(subseq)
    return out


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    wall_clock: float
    outputs: dict

    def to_json_obj(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "wall_clock_seconds": self.wall_clock,
            "outputs": self.outputs,
        }


def config_hash(cfg: ExperimentConfig, subseq: dict | None = None) -> str:
    body = canonical_json(config_to_json_obj(cfg, subseq))
    return hashlib.sha256(body.encode()).hexdigest()


# -- output writers -----------------------------------------------------------


def write_experiment_outputs(summary: FluctuationSummary, subseq: dict | None,
                             out_dir, wall_clock: float) -> dict:
    import pathlib

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(summary.config, subseq)

    summary_obj = summary.to_json_obj()
    summary_obj["manifest_hash"] = chash
    summary_path = out_dir / "summary.json"
    summary_path.write_text(canonical_json(summary_obj) + "\n")

    samples_path = out_dir / "samples.csv"
    with samples_path.open("w") as fh:
        fh.write(f"# manifest {chash}\n")
        fh.write("path_index,kappa1,kappa2,n,t,raw_count,fluctuation,normalized\n")
        for row in summary.sample_rows():
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")

    plot_path = out_dir / "plotdata.csv"
    with plot_path.open("w") as fh:
        fh.write(f"# manifest {chash}\n")
        fh.write("kappa1,kappa2,t,n,variance,prediction\n")
        for row in summary.plot_rows():
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")

    outputs = {
        "summary": summary_path.name,
        "samples": samples_path.name,
        "plotdata": plot_path.name,
    }
    manifest = RunManifest(
        config_hash=chash,
        seed=summary.config.seed,
        version=__version__,
        wall_clock=wall_clock,
        outputs=outputs,
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json_obj(), indent=2, sort_keys=True) + "\n"
    )
    return outputs


# -- subcommands ---------------------------------------------------------------


def _cmd_constants(args) -> int:
    F = parse_profile(args.F)
    table = compute_Ck(F, args.kappa, args.D)
    cov = covariance_constants(F, [args.kappa])
    obj = {
        "kappa": args.kappa,
        "C": [[v.real, v.imag] for v in table.values],
        "sigma2": cov.sigma2_of_kappa[args.kappa],
        "sigma2_zero": cov.sigma2_zero,
    }
    print(canonical_json(obj))
    return 0


def _envelope_from_args(args, n: float | None = None) -> EnvelopeProfile:
    if args.model == "log" or getattr(args, "delta", None) is not None:
        if args.delta is None:
            raise ConfigError("log-decay envelope requires --delta")
        return EnvelopeProfile.log_decay(args.delta)
    if args.model == "constant":
        return EnvelopeProfile.constant(args.lam)
    if args.model == "dc":
        box = n if n is not None else args.n
        return EnvelopeProfile.dc_coupling(args.alpha, box)
    return EnvelopeProfile.power_decay(args.alpha)


def _cmd_envelope(args) -> int:
    env = _envelope_from_args(args)
    obj = {"integral": env.power_integral(args.m, args.T)}
    if args.t is not None:
        obj["value"] = env.value(args.t)
    print(canonical_json(obj))
    return 0


def _cmd_count(args) -> int:
    F = parse_profile(args.F)
    env = _envelope_from_args(args, n=args.n)
    path = sample_path(args.n, args.dt, (args.seed, args.path_index))
    t1 = integrate_theta(path, env, args.kappa1, substeps=args.substeps, F=F)
    t2 = integrate_theta(path, env, args.kappa2, substeps=args.substeps, F=F)
    res = count_interval(t1, t2, args.n)
    print(canonical_json(res.to_json_obj()))
    if args.theta_csv:
        with open(args.theta_csv, "w") as fh:
            fh.write("t,theta_tilde_kappa1,theta_tilde_kappa2\n")
            for i in range(len(t1.times)):
                fh.write(",".join(_csv_cell(v) for v in
                                  (float(t1.times[i]), float(t1.theta_tilde[i]),
                                   float(t2.theta_tilde[i]))) + "\n")
    return 0


def _cmd_oracle_compare(args) -> int:
    F = parse_profile(args.F)
    env = _envelope_from_args(args, n=args.n)
    path = sample_path(args.n, args.dt, (args.seed, args.path_index))
    e1, e2 = args.kappa1 ** 2, args.kappa2 ** 2

    t1 = integrate_theta(path, env, args.kappa1, F=F)
    t2 = integrate_theta(path, env, args.kappa2, F=F)
    pruefer = count_interval(t1, t2, args.n).count
    fd = fd_count_interval(path, env, args.n, args.dt, e1, e2, F=F)

    r1 = integrate_theta(path, env, args.kappa1, substeps=2, F=F)
    r2 = integrate_theta(path, env, args.kappa2, substeps=2, F=F)
    pruefer_ref = count_interval(r1, r2, args.n).count
    fd_ref = fd_count_interval(path, env, args.n, args.dt / 2, e1, e2, F=F)

    obj = {
        "kappa1": args.kappa1,
        "kappa2": args.kappa2,
        "n": args.n,
        "pruefer_count": pruefer,
        "fd_count": fd,
        "discrepancy": abs(pruefer - fd),
        "refined": {
            "pruefer_count": pruefer_ref,
            "fd_count": fd_ref,
            "discrepancy": abs(pruefer_ref - fd_ref),
        },
    }
    print(canonical_json(obj))
    return 0 if abs(pruefer - fd) <= 1 else 2


def _cmd_subsequence(args) -> int:
    if args.kappa2 is not None:
        if args.gamma2 is None:
            raise ConfigError("--kappa2 requires --gamma2")
        s1, s2 = build_joint_subsequence(
            args.kappa, args.gamma, args.kappa2, args.gamma2,
            args.count, args.n_max)
        print(canonical_json({"first": s1.to_json_obj(), "second": s2.to_json_obj()}))
    else:
        spec = build_subsequence(args.kappa, args.gamma, args.count, args.n_max,
                                 tolerance=args.tolerance)
        print(canonical_json(spec.to_json_obj()))
    return 0


def _cmd_experiment(args) -> int:
    import dataclasses

    with open(args.config) as fh:
        text = fh.read()
    cfg, subseq_req = parse_config(text)
    cfg = dataclasses.replace(cfg, seed=args.seed)
    subseq1 = subseq2 = None
    if subseq_req is not None:
        if len(cfg.kappa_pairs) != 1:
            raise ConfigError("subsequence experiments use a single kappa pair")
        pair = cfg.kappa_pairs[0]
        subseq1, subseq2 = build_joint_subsequence(
            pair[0], float(subseq_req["gamma1"]),
            pair[1], float(subseq_req["gamma2"]),
            int(subseq_req["count"]), int(subseq_req["n_max"]))
    started = time.monotonic()
    summary = run_experiment(cfg, subseq1, subseq2)
    wall = time.monotonic() - started
    outputs = write_experiment_outputs(summary, subseq_req, args.out_dir, wall)
    print(canonical_json({"out_dir": str(args.out_dir), **outputs}))
    return 0


def _build_parsers() -> dict[str, argparse.ArgumentParser]:
    parsers = {}

    p = argparse.ArgumentParser(prog="dosfluct constants", add_help=True)
    p.add_argument("--F", default="cos")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--D", type=int, default=1)
    parsers["constants"] = p

    p = argparse.ArgumentParser(prog="dosfluct envelope")
    p.add_argument("--model", choices=("power", "log", "constant", "dc"), default="power")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--n", type=float, default=1e4)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--t", type=float, default=None)
    parsers["envelope"] = p

    p = argparse.ArgumentParser(prog="dosfluct count")
    p.add_argument("--kappa1", type=float, required=True)
    p.add_argument("--kappa2", type=float, required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--model", choices=("decaying_potential", "dc", "constant"),
                   default="decaying_potential")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--substeps", type=int, default=1)
    p.add_argument("--F", default="cos")
    p.add_argument("--theta-csv", default=None)
    parsers["count"] = p

    p = argparse.ArgumentParser(prog="dosfluct oracle-compare")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=float, default=100.0)
    p.add_argument("--kappa1", type=float, default=0.8)
    p.add_argument("--kappa2", type=float, default=1.3)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--model", choices=("decaying_potential", "dc", "constant"),
                   default="decaying_potential")
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--F", default="cos")
    parsers["oracle-compare"] = p

    p = argparse.ArgumentParser(prog="dosfluct subsequence")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--n-max", type=int, default=10000)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--kappa2", type=float, default=None)
    p.add_argument("--gamma2", type=float, default=None)
    parsers["subsequence"] = p

    p = argparse.ArgumentParser(prog="dosfluct experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", default=".")
    parsers["experiment"] = p

    return parsers


_HANDLERS = {
    "constants": _cmd_constants,
    "envelope": _cmd_envelope,
    "count": _cmd_count,
    "experiment": _cmd_experiment,
    "oracle-compare": _cmd_oracle_compare,
    "subsequence": _cmd_subsequence,
}


def dispatch(argv) -> int:
    """Run one subcommand; exit codes: 0 success, 1 configuration/usage error,
    2 numerical-consistency failure."""
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE, end="")
        return 0 if argv else 1
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand {sub!r}\n{USAGE}")
        return 1
    parser = _build_parsers()[sub]
    try:
        args = parser.parse_args(argv[1:])
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        apply_worker_override()
        return _HANDLERS[sub](args)
    except (ConfigError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ConsistencyError as exc:
        sys.stderr.write(f"numerical consistency failure: {exc}\n")
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
