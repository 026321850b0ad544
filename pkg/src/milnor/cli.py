"""Command-line interface: ``milnor <command> ...``.

Every command writes canonical JSON (and CSV where tabular) into the
output directory. Flags override the ``key=value`` config file, which
overrides the built-in defaults; the effective values are embedded in
every output. Exit codes: 0 completed run (check verdicts live
in the report), 2 usage or IO error, 3 germ parse error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import NAMES as CORPUS_NAMES
from .corpus import corpus_germ
from .fibers import (TANGENCY_FLOOR, curve_tangent, e_theta_sample, e_theta_tangency, fiber_points,
                     milnor_tube_sample, point_cloud_header)
from .flows import (ConicParameter, conic_field, curve_C, flow_to, h_apply, h_invert,
                    nontrivial_zero, verify_conic_axioms)
from .germ import GermSyntaxError, MapGerm, format_germ, load_germ, validate, value_and_jacobian
from .numkernel import IntegrationError, NonFiniteInput
from .regularity import (SCHEMA_VERSION, CriticalPoint, ZeroValue, d_h_regularity_check,
                         d_regularity_check, transversality_property_check)
from .reports import dumps_canonical, validate_report, write_csv, write_report
from .sampling import RNG_ALGORITHM, RejectionBudgetExhausted, SamplingPlan
from .search import NoOmegaFound, alpha_grid, alpha_map_header, alpha_suitability_map, omega_search
from .tolerances import ToleranceProfile
from .worked import example1_pipeline

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4
ENV_OUTPUT_DIR = "MILNOR_OUTPUT_DIR"

NUMERIC_ERRORS = (IntegrationError, CriticalPoint, ZeroValue, RejectionBudgetExhausted,
                  NonFiniteInput, ArithmeticError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


def _vector(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"non-finite value in {text!r}")
    return vals


def _int(text) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"expected an integer, got {text!r}") from None


def _float(text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise UsageError(f"expected a finite number, got {text!r}")
    return v


# key -> (converter, default); None defaults mean "not set".
OPTIONS = {
    "germ": (str, None),
    "eps": (_float, 0.5),
    "delta": (_float, 0.05),
    "eta": (_float, 0.9),
    "alpha": (_vector, None),          # defaults to the zero vector of the right length
    "theta": (_vector, None),
    "point": (_vector, None),
    "value": (_vector, None),
    "t": (_float, None),
    "seed": (_int, 0),
    "samples": (_int, 200),
    "strata": (_int, 4),
    "budget": (_int, 200),
    "workers": (_int, 1),
    "alphas": (_int, 64),
    "iters": (_int, 10),
    "grid": (_int, 21),
    "radius": (_float, 0.95),
    "values": (_int, 16),
    "curve_samples": (_int, 8),
}


# ---------------------------------------------------------------------------
# Configuration


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS and not key.startswith("tol.") and key != "out":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


class Run:
    """Resolved configuration for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = read_config(args.config) if args.config else {}
        self.values: dict = {}
        self.tol = self._tolerances()
        out = args.out or self.file.get("out") or os.environ.get(ENV_OUTPUT_DIR) or "."
        self.out = Path(out)
        self.command = args.command_path

    def get(self, key):
        if key in self.values:
            return self.values[key]
        conv, default = OPTIONS[key]
        raw = getattr(self.args, key, None)
        if raw is None:
            raw = self.file.get(key)
        value = default if raw is None else (conv(raw) if isinstance(raw, str) else raw)
        self.values[key] = value
        return value

    def _tolerances(self) -> ToleranceProfile:
        fields = ToleranceProfile.__dataclass_fields__
        changes = {}
        for key, value in self.file.items():
            if key.startswith("tol."):
                changes[key[4:]] = value
        for item in self.args.tol or []:
            if "=" not in item:
                raise UsageError(f"--tol expects name=value, got {item!r}")
            name, value = item.split("=", 1)
            changes[name.strip()] = value
        for name in changes:
            if name not in fields:
                raise UsageError(f"unknown tolerance {name!r}; choose from {sorted(fields)}")
        try:
            return ToleranceProfile(**{k: _float(v) for k, v in changes.items()})
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def germ(self) -> MapGerm:
        source = self.get("germ")
        if source is None:
            raise UsageError("--germ is required (a .germ file or one of "
                             f"{', '.join(CORPUS_NAMES)})")
        if not Path(source).exists() and source in CORPUS_NAMES:
            return corpus_germ(source)
        try:
            return load_germ(source)
        except OSError as exc:
            raise UsageError(f"cannot read germ file {source!r}: {exc.strerror or exc}") from None

    def plan(self) -> SamplingPlan:
        n_strata = self.get("strata")
        samples = self.get("samples")
        if n_strata < 1 or samples < 1 or self.get("budget") < 1:
            raise UsageError("sample counts and the rejection budget must be >= 1")
        seed = self.get("seed")
        if not 0 <= seed < 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        return SamplingPlan(seed=seed, count=-(-samples // n_strata), n_strata=n_strata,
                            rejection_budget=self.get("budget"))

    def conic(self, k: int) -> ConicParameter:
        alpha = self.get("alpha")
        if alpha is None:
            alpha = (0.0,) * k
            self.values["alpha"] = alpha
        if len(alpha) != k:
            raise UsageError(f"--alpha must have {k} components")
        try:
            return ConicParameter(alpha, self.get("eta"))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def positive(self, *keys):
        for key in keys:
            if not self.get(key) > 0:
                raise UsageError(f"--{key.replace('_', '-')} must be positive")

    def require(self, key, length: int | None = None):
        v = self.get(key)
        if v is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
        if length is not None and len(v) != length:
            raise UsageError(f"--{key} must have {length} components")
        return np.array(v, dtype=float)

    def envelope(self, **payload) -> dict:
        # Worker count and output directory do not affect results and are left out,
        # so outputs are byte-identical across machines and thread counts.
        config = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()
                  if k != "workers"}
        config["tolerances"] = self.tol.to_dict()
        return {"command": self.command, "config": config, "version": SCHEMA_VERSION,
                "software": f"milnor {__version__}", "rng": RNG_ALGORITHM, **payload}

    def write(self, name: str, obj: dict, schema: str | None = None, echo: bool = False) -> Path:
        validate_report(obj, "output")
        path = write_report(obj, self.out / name, schema)
        if echo:
            sys.stdout.write(dumps_canonical(obj))
        print(path)
        return path

    def write_csv(self, name: str, header, rows) -> Path:
        path = write_csv(self.out / name, header, rows)
        print(path)
        return path


def _tag(values) -> str:
    return "_".join("%g" % v for v in values)


# ---------------------------------------------------------------------------
# Commands


def cmd_parse(run: Run):
    germ = run.germ()
    diags = [*germ.warnings, *validate(germ, run.tol.rank_tol, run.get("seed"))]
    out = run.envelope(germ=germ.name, n=germ.n, k=germ.k, variables=list(germ.variables),
                       formatted=format_germ(germ), diagnostics=[d.to_dict() for d in diags])
    run.write(f"parse-{germ.name}.json", out, echo=True)


def cmd_eval(run: Run):
    germ = run.germ()
    x = run.require("point", germ.n)
    fx, J = value_and_jacobian(germ, x)
    run.write(f"eval-{germ.name}.json", run.envelope(germ=germ.name, point=x, value=fx,
                                                     jacobian=J), echo=True)


def cmd_flow(run: Run):
    k = len(run.require("theta"))
    cp = run.conic(k)
    theta = run.require("theta", k)
    if run.get("t") is not None:
        traj = flow_to(cp, theta, run.get("t"), run.tol)
    else:
        run.positive("curve_samples")
        traj = curve_C(cp, theta, run.get("curve_samples"), tol=run.tol)
    tag = _tag(cp.alpha)
    rows = [[t, *p] for t, p in zip(traj.t, traj.points)]
    run.write_csv(f"flow-{tag}.csv", ["t"] + [f"x{i + 1}" for i in range(k)], rows)
    run.write(f"flow-{tag}.json", run.envelope(
        alpha=cp.alpha, eta=cp.eta, theta=theta, endpoint=traj.endpoint, samples=len(traj.t),
        max_defect=traj.max_defect, invariant_residual=traj.invariant_residual(),
        steps=traj.n_steps))


def cmd_homeo_map(run: Run, inverse: bool):
    x = run.require("point")
    cp = run.conic(len(x))
    if len(x) != cp.k:
        raise UsageError("--point and --alpha must have the same length")
    y = h_invert(cp, x, run.tol) if inverse else h_apply(cp, x, run.tol)
    name = "invert" if inverse else "apply"
    run.write(f"homeo-{name}.json", run.envelope(alpha=cp.alpha, eta=cp.eta, input=x,
                                                 output=y, output_norm=float(np.linalg.norm(y))),
              echo=True)


def cmd_homeo_axioms(run: Run):
    k = len(run.get("alpha") or (0.0, 0.0))
    cp = run.conic(k)
    plan = SamplingPlan(seed=run.get("seed"), count=run.get("samples"))
    rep = verify_conic_axioms(lambda x: h_apply(cp, x, run.tol), lambda y: h_invert(cp, y, run.tol),
                              cp.eta, k, plan, run.tol)
    run.write(f"homeo-axioms-{_tag(cp.alpha)}.json",
              run.envelope(alpha=cp.alpha, **rep.to_dict()))


def cmd_homeo_example1(run: Run):
    run.positive("eta", "eps", "samples", "grid")
    if not 0 < run.get("eta") < 1:
        raise UsageError("--eta must lie in (0, 1)")
    res = example1_pipeline(eta=run.get("eta"), eps=run.get("eps"), count=run.get("samples"),
                            grid=run.get("grid"), seed=run.get("seed"), tol=run.tol)
    ray = res.pop("ray_report").to_dict()
    rows = res.pop("alpha_map")
    run.write("example1-ray.json", run.envelope(**ray), "regularity")
    run.write_csv("example1-alpha-map.csv", alpha_map_header(2), rows)
    run.write("example1.json", run.envelope(**res, ray_pass=ray["pass"]))


def _check(run: Run, kind: str):
    germ = run.germ()
    plan = run.plan()
    run.positive("eps", "workers")
    oracle = run.args.oracle
    workers = run.get("workers")
    if kind == "transversality":
        run.positive("delta")
        rep = transversality_property_check(germ, run.get("eps"), run.get("delta"), plan,
                                            run.tol, workers)
    elif kind == "dreg":
        rep = d_regularity_check(germ, run.get("eps"), plan, run.tol, with_oracle=oracle,
                                 workers=workers)
    else:
        run.positive("delta")
        cp = run.conic(germ.k)
        rep = d_h_regularity_check(germ, cp, run.get("eps"), run.get("delta"), plan, run.tol,
                                   with_oracle=oracle, workers=workers)
    d = rep.to_dict()
    run.write(f"check-{kind}-{germ.name}.json", run.envelope(**d), "regularity")
    print(f"pass: {str(d['pass']).lower()} ({d['failures']} failures, {d['errors']} errors, "
          f"{len(d['samples'])} samples)")


def cmd_search_omega(run: Run):
    germ = run.germ()
    run.positive("eps", "delta", "alphas", "iters", "workers")
    try:
        res = omega_search(germ, run.get("eps"), run.get("delta"), run.plan(), run.tol,
                           n_alphas=run.get("alphas"), iters=run.get("iters"),
                           workers=run.get("workers"))
    except NoOmegaFound as exc:
        res = exc.result
        print(f"no omega found: {exc}", file=sys.stderr)
    run.write(f"omega-{germ.name}.json", run.envelope(**res.to_dict()), "omega")
    print(f"omega: {res.omega:.17g}")


def cmd_alpha_map(run: Run):
    germ = run.germ()
    p = run.require("point", germ.n)
    run.positive("grid")
    try:
        grid = alpha_grid(germ.k, run.get("grid"), run.get("radius"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = alpha_suitability_map(germ, p, grid, run.tol)
    run.write_csv(f"alpha-map-{germ.name}.csv", alpha_map_header(germ.k), rows)


def cmd_fiber(run: Run):
    germ = run.germ()
    c = run.require("value", germ.k)
    run.positive("eps", "samples")
    fs = fiber_points(germ, c, run.get("eps"), run.get("samples"), run.get("seed"))
    run.write_csv(f"fiber-{germ.name}.csv", point_cloud_header(germ.n, germ.k), fs.rows())
    run.write(f"fiber-{germ.name}.json", run.envelope(
        germ=germ.name, target=c, accepted=len(fs.points), starts=fs.starts,
        max_residual=float(fs.residuals.max()) if len(fs.residuals) else None,
        failures=fs.failures))


def cmd_tube(run: Run):
    germ = run.germ()
    run.positive("eps", "delta", "values", "samples")
    tube = milnor_tube_sample(germ, run.get("eps"), run.get("delta"), run.get("values"),
                              run.get("samples"), run.get("seed"))
    rows = [r for fs in tube for r in fs.rows()]
    run.write_csv(f"tube-{germ.name}.csv", point_cloud_header(germ.n, germ.k), rows)
    run.write(f"tube-{germ.name}.json", run.envelope(
        germ=germ.name, values=[fs.target for fs in tube],
        accepted=[len(fs.points) for fs in tube],
        failures=sum(len(fs.failures) for fs in tube)))


def cmd_etheta(run: Run):
    germ = run.germ()
    cp = run.conic(germ.k)
    theta = run.require("theta", germ.k)
    run.positive("eps", "samples", "curve_samples")
    es = e_theta_sample(germ, cp, theta, run.get("eps"), run.get("curve_samples"),
                        run.get("samples"), run.get("seed"), run.tol)
    rows = es.rows()
    checks = []
    for t, fs in zip(es.t, es.fibers):
        tangent = curve_tangent(cp, theta, float(t), run.tol)
        checks += [e_theta_tangency(germ, cp, theta, x, run.tol, tangent) for x in fs.points]
    scored = [c for c in checks if c.suitable is not None
              and c.margin > 2 * max(run.tol.radial_margin, run.tol.vertical_margin)]
    agree = sum(c.transverse == c.suitable for c in scored)
    run.write_csv(f"etheta-{germ.name}.csv", point_cloud_header(germ.n, germ.k), rows)
    run.write(f"etheta-{germ.name}.json", run.envelope(
        germ=germ.name, alpha=cp.alpha, eta=cp.eta, theta=theta, t=es.t, curve=es.curve,
        points=len(rows), tangency_floor=TANGENCY_FLOOR,
        cross_check={"compared": len(scored), "agree": agree,
                     "agreement": agree / len(scored) if scored else None},
        min_tangency_score=min((c.score for c in checks), default=None)))


def cmd_demo(run: Run):
    run.positive("grid")
    n = run.get("grid")
    cp = ConicParameter((-0.5, -0.5), run.get("eta"))
    header = ["y1", "y2", "v1", "v2", "radial"]

    def rows(lo, hi, inside=None):
        axis = np.linspace(lo, hi, n)
        out = []
        for y1 in axis:
            for y2 in axis:
                y = np.array([y1, y2])
                if inside is not None and not y @ y < inside ** 2:
                    continue
                v = conic_field(cp, y)
                out.append([y1, y2, v[0], v[1], float(v @ y)])
        return out

    run.write_csv("demo-field-wide.csv", header, rows(-2.0, 2.0))
    run.write_csv("demo-field-half-ball.csv", header, rows(-0.5, 0.5, inside=0.5))
    run.write("demo.json", run.envelope(alpha=cp.alpha, zeros=[[0.0, 0.0],
                                                               nontrivial_zero(cp)],
                                        grid=n))


# ---------------------------------------------------------------------------
# Argument parsing


def _common(p: argparse.ArgumentParser, *keys):
    flags = {
        "germ": ("--germ", "germ file or corpus name"),
        "eps": ("--eps", "source ball radius"), "delta": ("--delta", "tube radius"),
        "eta": ("--eta", "target ball radius, 0 < eta < 1"),
        "alpha": ("--alpha", "conic parameter, comma-separated"),
        "theta": ("--theta", "endpoint on the sphere |y| = eta"),
        "point": ("--point", "comma-separated point"), "value": ("--value", "target value c"),
        "t": ("--t", "flow time t = |p|^2"), "samples": ("--samples", "sample count"),
        "strata": ("--strata", "number of sphere radii"),
        "budget": ("--budget", "rejection draws per requested point"),
        "workers": ("--workers", "worker threads"),
        "alphas": ("--alphas", "alpha draws per candidate radius"),
        "iters": ("--iters", "bisection steps"), "grid": ("--grid", "grid points per axis"),
        "radius": ("--radius", "grid half-width"), "values": ("--values", "number of values"),
        "curve_samples": ("--curve-samples", "curve points"),
    }
    for key in keys:
        flag, help_ = flags[key]
        p.add_argument(flag, dest=key, default=None, help=help_)
    p.add_argument("--seed", default=None, help="64-bit seed")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUTPUT_DIR} or .)")
    p.add_argument("--tol", action="append", default=None, metavar="NAME=VALUE",
                   help="tolerance override (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="milnor", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"milnor {__version__} (report schema {SCHEMA_VERSION})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a germ")
    _common(p, "germ")
    p.set_defaults(fn=cmd_parse, command_path="parse")
    p = sub.add_parser("eval", help="evaluate f and Df at a point")
    _common(p, "germ", "point")
    p.set_defaults(fn=cmd_eval, command_path="eval")
    p = sub.add_parser("flow", help="integrate the normalized conic field")
    _common(p, "alpha", "eta", "theta", "t", "curve_samples")
    p.set_defaults(fn=cmd_flow, command_path="flow")

    homeo = sub.add_parser("homeo", help="conic homeomorphism tools")
    hs = homeo.add_subparsers(dest="action", required=True)
    for name, fn, keys in [
        ("apply", lambda r: cmd_homeo_map(r, False), ("alpha", "eta", "point")),
        ("invert", lambda r: cmd_homeo_map(r, True), ("alpha", "eta", "point")),
        ("verify-axioms", cmd_homeo_axioms, ("alpha", "eta", "samples")),
        ("example1", cmd_homeo_example1, ("eta", "eps", "samples", "grid")),
    ]:
        p = hs.add_parser(name)
        _common(p, *keys)
        p.set_defaults(fn=fn, command_path=f"homeo {name}")

    check = sub.add_parser("check", help="sampled regularity checks")
    cs = check.add_subparsers(dest="kind", required=True)
    for name, keys in [("transversality", ("germ", "eps", "delta", "samples", "strata",
                                           "budget", "workers")),
                       ("dreg", ("germ", "eps", "samples", "strata", "budget", "workers")),
                       ("dhreg", ("germ", "alpha", "eta", "eps", "delta", "samples", "strata",
                                  "budget", "workers"))]:
        p = cs.add_parser(name)
        _common(p, *keys)
        p.add_argument("--oracle", action="store_true",
                       help="also record the finite-difference submersion value")
        p.set_defaults(fn=lambda r, kind=name: _check(r, kind), command_path=f"check {name}")

    p = sub.add_parser("search-omega", help="sampled radius of suitable parameters")
    _common(p, "germ", "eps", "delta", "samples", "strata", "budget", "alphas", "iters",
            "workers")
    p.set_defaults(fn=cmd_search_omega, command_path="search-omega")
    p = sub.add_parser("alpha-map", help="suitability over an alpha grid at a point")
    _common(p, "germ", "point", "grid", "radius")
    p.set_defaults(fn=cmd_alpha_map, command_path="alpha-map")
    p = sub.add_parser("fiber", help="points of a fibre")
    _common(p, "germ", "value", "eps", "samples")
    p.set_defaults(fn=cmd_fiber, command_path="fiber")
    p = sub.add_parser("tube", help="points of the Milnor tube")
    _common(p, "germ", "eps", "delta", "values", "samples")
    p.set_defaults(fn=cmd_tube, command_path="tube")
    p = sub.add_parser("etheta", help="points of the preimage of a curved ray")
    _common(p, "germ", "alpha", "eta", "theta", "eps", "samples", "curve_samples")
    p.set_defaults(fn=cmd_etheta, command_path="etheta")
    p = sub.add_parser("demo", help="conic field grids for alpha = (-1/2, -1/2)")
    _common(p, "eta", "grid")
    p.set_defaults(fn=cmd_demo, command_path="demo")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        run = Run(args)
        args.fn(run)
    except GermSyntaxError as exc:
        json.dump({"error": "parse", "diagnostics": [d.to_dict() for d in exc.diagnostics]},
                  sys.stderr)
        print(file=sys.stderr)
        return EXIT_PARSE
    except UsageError as exc:
        print(f"milnor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"milnor: IO error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"milnor: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # Remaining precondition violations detected inside the library.
        print(f"milnor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
