"""Command-line driver: ``nullctrl <subcommand> [--config PATH] [--seed N] [--out DIR] ...``.

Subcommands and their CSV columns:

  smallness-verify  trial,family,measE,epsE,bound,true_sup,margin
  spectral-ineq     mu,n_modes,lambda_min,C,logC
  control-run       t,norm,stage,cumulative_cost
  sweep             run,measure,mu0,K,J,cost_total,N_eff,final_norm,low_projection
  validate          quantity,value

Exit codes: 0 success, 1 unknown subcommand, 2 invalid configuration,
3 numerical failure (including a falsified smallness bound).
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analytic_smallness import PostconditionError
from .control import HeatState, cost_audit, synthesize
from .falsify import CSV_COLUMNS, falsify
from .observability import constant_sweep, fit_rate
from .sets import FatCantorSpec, MeasurableSet1D
from .simulate import cross_validate, decay_benchmark
from .spectral_basis import DensitySpec, sine_basis, sturm_liouville_basis

SUBCOMMANDS = ("smallness-verify", "spectral-ineq", "control-run", "sweep", "validate")
DEFAULT_OMEGA = [[0.1, 0.15], [0.4, 0.5], [0.8, 0.85]]


class ConfigError(ValueError):
    pass


# -- parsing helpers ---------------------------------------------------------------

def parse_number(tok) -> float:
    """Float, or a multiple of pi written like ``8pi``."""
    if isinstance(tok, (int, float)):
        return float(tok)
    s = str(tok).strip().lower().replace("π", "pi")
    try:
        if s.endswith("pi"):
            head = s[:-2].rstrip("*")
            return (float(head) if head else 1.0) * math.pi
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse number {tok!r}") from None


def parse_number_list(value) -> list[float]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return [parse_number(v) for v in value]


def parse_set(value) -> MeasurableSet1D:
    """``[[lo, hi], ...]``, ``{depth, ratio}``, ``"lo:hi,lo:hi"`` or ``"cantor:depth:ratio"``."""
    try:
        if isinstance(value, dict):
            return FatCantorSpec(int(value["depth"]), float(value["ratio"])).build()
        if isinstance(value, str):
            s = value.strip()
            if s.startswith("cantor:"):
                _, depth, ratio = s.split(":")
                return FatCantorSpec(int(depth), parse_number(ratio)).build()
            value = [[parse_number(x) for x in part.split(":")] for part in s.split(",") if part.strip()]
        pairs = [[float(a), float(b)] for a, b in value]
        for a, b in pairs:
            if not (0.0 <= a < b <= 1.0):
                raise ConfigError(f"interval [{a}, {b}] must satisfy 0 <= lo < hi <= 1")
        s = MeasurableSet1D.from_pairs(pairs)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid set {value!r}: {exc}") from None
    if s.measure <= 0:
        raise ConfigError("set must have positive measure")
    return s


def parse_density(value):
    if value is None:
        return None
    try:
        if isinstance(value, str):
            value = [[parse_number(x) for x in part.split(":")] for part in value.split(",") if part.strip()]
        return DensitySpec.from_triples(value)
    except ValueError as exc:
        raise ConfigError(f"invalid density: {exc}") from None


def make_basis(J: int, density=None):
    if J < 1:
        raise ConfigError("number of modes must be >= 1")
    if density is None:
        return sine_basis(J)
    return sturm_liouville_basis(density, J)


def initial_state(spec: str, J: int, rng) -> HeatState:
    spec = str(spec)
    if spec == "random":
        a = rng.standard_normal(J)
        return HeatState(0.0, a / np.linalg.norm(a))
    if spec.startswith("mode:"):
        j = int(spec.split(":", 1)[1])
        if not 1 <= j <= J:
            raise ConfigError(f"mode index {j} outside 1..{J}")
        a = np.zeros(J)
        a[j - 1] = 1.0
        return HeatState(0.0, a)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            a = np.loadtxt(path, delimiter=",", ndmin=1) if path.endswith(".csv") else np.loadtxt(path, ndmin=1)
        except OSError as exc:
            raise ConfigError(f"cannot read initial data: {exc}") from None
        if a.size != J:
            raise ConfigError(f"initial data has {a.size} coefficients, expected {J}")
        return HeatState(0.0, a.ravel())
    raise ConfigError(f"unknown --u0 {spec!r}")


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subcommands ---------------------------------------------------------------------

def cmd_smallness(cfg, seed):
    n = int(cfg.get("trials", 1000))
    trig_every = int(cfg.get("trig_every", 10))
    workers = int(cfg.get("workers", 1))
    if n < 1 or workers < 1 or trig_every < 0:
        raise ConfigError("trials and workers must be positive, trig_every nonnegative")
    results = falsify(n, seed=seed, trig_every=trig_every, workers=workers)
    bad = sum(r.margin < 0 for r in results)
    summary = f"trials={n} violations={bad} min_margin={min(r.margin for r in results):.6g}"
    return csv_text(CSV_COLUMNS, [r.row() for r in results]), summary, 3 if bad else 0


def cmd_spectral(cfg, seed):
    omega = parse_set(cfg.get("omega", [[0.3, 0.5]]))
    mus = parse_number_list(cfg.get("mu_list", "8pi,12pi,16pi,20pi,24pi,28pi,32pi"))
    if not mus or min(mus) <= 0:
        raise ConfigError("mu list must hold positive values")
    density = parse_density(cfg.get("density"))
    form = cfg.get("form", "spatial")
    if form not in ("spatial", "lr"):
        raise ConfigError("form must be 'spatial' or 'lr'")
    if density is None:
        J = int(cfg.get("modes", math.floor(max(mus) / math.pi + 1e-9)))
    else:
        J = int(cfg.get("modes", 0)) or None
        if J is None:
            raise ConfigError("a density needs an explicit number of modes")
    basis = make_basis(J, density)
    if max(mus) > basis.omegas[-1] * (1 + 1e-12):
        raise ConfigError(f"largest mu exceeds the {J} computed frequencies; raise modes")
    if min(mus) < basis.omegas[0]:
        raise ConfigError("every mu must be at least the first frequency")
    rows = constant_sweep(basis, omega, mus, form)
    summary = ""
    if len({r[0] for r in rows}) >= 2 and len(rows) >= 3:
        fit = fit_rate([(r[0], r[3]) for r in rows])
        summary = f"rate N={fit.N:.6g} intercept={fit.intercept:.6g} residual={fit.residual:.3g} r2={fit.r_squared:.6f}"
    return csv_text(("mu", "n_modes", "lambda_min", "C", "logC"), rows), summary, 0


def _control_inputs(cfg, seed):
    omega = parse_set(cfg.get("omega", DEFAULT_OMEGA))
    T = parse_number(cfg.get("T", 1.0))
    mu0 = parse_number(cfg.get("mu0", "4pi"))
    K = int(cfg.get("stages", 6))
    J = int(cfg.get("modes", 64))
    if T <= 0 or K < 1 or J < 1:
        raise ConfigError("T, stages and modes must be positive")
    density = parse_density(cfg.get("density"))
    basis = make_basis(J, density)
    if mu0 < basis.omegas[0]:
        raise ConfigError("mu0 must be at least the first frequency")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    u0 = initial_state(cfg.get("u0", "random"), J, rng)
    return omega, T, mu0, K, basis, u0


def cmd_control(cfg, seed):
    omega, T, mu0, K, basis, u0 = _control_inputs(cfg, seed)
    run = synthesize(u0, T, omega, mu0, K, basis)
    audit = cost_audit(run)
    summary = (f"N_eff={audit.N_eff:.17g} cost_total={run.cost_total:.17g} final_norm={run.final_state.norm:.6g} "
               f"geometric_after_peak={audit.decays_after_peak}")
    return csv_text(("t", "norm", "stage", "cumulative_cost"), run.trace), summary, 0


def _sweep_job(job):
    u0, T, om, mu0, K, basis = job
    run = synthesize(u0, T, om, mu0, K, basis)
    return (om.measure, mu0, K, basis.omegas.size, run.cost_total, run.ratio, run.final_state.norm,
            run.low_projection_norm())


def cmd_sweep(cfg, seed):
    omegas = [parse_set(o) for o in cfg.get("omegas", [[[0.4, 0.45]], [[0.4, 0.5]], [[0.35, 0.55]]])]
    mu0s = parse_number_list(cfg.get("mu0_list", "4pi"))
    T = parse_number(cfg.get("T", 1.0))
    K = int(cfg.get("stages", 4))
    J = int(cfg.get("modes", 32))
    workers = int(cfg.get("workers", 1))
    if T <= 0 or K < 1 or J < 1 or workers < 1:
        raise ConfigError("T, stages, modes and workers must be positive")
    basis = make_basis(J, parse_density(cfg.get("density")))
    if min(mu0s) < basis.omegas[0]:
        raise ConfigError("every mu0 must be at least the first frequency")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    u0 = initial_state(cfg.get("u0", "random"), J, rng)
    jobs = [(u0, T, om, mu0, K, basis) for om in omegas for mu0 in mu0s]
    # processes, not threads: mpmath keeps its working precision in global state
    if workers == 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    rows = [(i,) + r for i, r in enumerate(results)]
    header = ("run", "measure", "mu0", "K", "J", "cost_total", "N_eff", "final_norm", "low_projection")
    return csv_text(header, rows), f"runs={len(rows)}", 0


def cmd_validate(cfg, seed):
    cfg = {"modes": 16, **cfg}
    omega, T, mu0, K, basis, u0 = _control_inputs(cfg, seed)
    n = int(cfg.get("grid", 512))
    dt = parse_number(cfg.get("dt", 1e-4))
    raster = cfg.get("raster", "center")
    if n < 4 or dt <= 0:
        raise ConfigError("grid must be >= 4 and dt positive")
    if raster not in ("center", "fraction"):
        raise ConfigError("raster must be 'center' or 'fraction'")
    run = synthesize(u0, T, omega, mu0, K, basis, min_phase=dt)
    cv = cross_validate(run, n, dt, raster)
    e1 = decay_benchmark(n, dt)
    e2 = decay_benchmark(2 * n + 1, dt / 2)
    rows = [("distance", cv.distance), ("model_error", cv.model_error), ("distance_over_model", cv.ratio),
            ("measure_error", cv.measure_error), ("decay_error", e1), ("decay_error_half_step", e2),
            ("decay_reduction", e1 / e2)]
    ok = cv.ratio <= 5.0 and e1 / e2 >= 3.5
    return csv_text(("quantity", "value"), rows), f"cross_validation_ok={ok}", 0


HANDLERS = {
    "smallness-verify": cmd_smallness,
    "spectral-ineq": cmd_spectral,
    "control-run": cmd_control,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nullctrl", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML file; the table named after the subcommand is used")
        sp.add_argument("--seed", type=int, default=None, help="seed for all randomness (default 0)")
        sp.add_argument("--out", help="directory for <subcommand>.csv (default: stdout)")
        return sp

    s = common(sub.add_parser("smallness-verify", help="randomized soundness check of smallness bounds"))
    s.add_argument("--trials", type=int)
    s.add_argument("--trig-every", type=int, dest="trig_every")
    s.add_argument("--workers", type=int)

    s = common(sub.add_parser("spectral-ineq", help="observability constants versus mu"))
    s.add_argument("--omega")
    s.add_argument("--mu-list", dest="mu_list")
    s.add_argument("--modes", type=int)
    s.add_argument("--density")
    s.add_argument("--form", choices=("spatial", "lr"))

    for name, helptext in (("control-run", "synthesize a stagewise null control"),
                           ("validate", "cross-check a controlled run against Crank-Nicolson")):
        s = common(sub.add_parser(name, help=helptext))
        s.add_argument("--omega")
        s.add_argument("--T", dest="T")
        s.add_argument("--mu0")
        s.add_argument("--stages", type=int)
        s.add_argument("--modes", type=int)
        s.add_argument("--density")
        s.add_argument("--u0")
        if name == "validate":
            s.add_argument("--grid", type=int)
            s.add_argument("--dt")
            s.add_argument("--raster", choices=("center", "fraction"))

    s = common(sub.add_parser("sweep", help="control cost over several sets and mu0 values"))
    s.add_argument("--mu0-list", dest="mu0_list")
    s.add_argument("--T", dest="T")
    s.add_argument("--stages", type=int)
    s.add_argument("--modes", type=int)
    s.add_argument("--workers", type=int)
    return p


def load_config(path, command) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = dict(data.get("common", {}))
    cfg.update(data.get(command, {}))
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
        print(f"nullctrl: unknown subcommand {argv[0]!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return 1
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        cfg = load_config(args.config, args.command)
        for k, v in vars(args).items():
            if k not in ("command", "config", "seed", "out") and v is not None:
                cfg[k] = v
        seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
        cfg.pop("seed", None)
        out = args.out or cfg.pop("out", None)
        if seed < 0 or seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        text, summary, code = HANDLERS[args.command](cfg, seed)
    except ValueError as exc:  # ConfigError and the library's input checks
        print(f"nullctrl: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, PostconditionError) as exc:
        print(f"nullctrl: numerical failure: {exc}", file=sys.stderr)
        return 3
    if out:
        path = os.path.join(out, f"{args.command}.csv")
        write_atomic(path, text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    if summary:
        print(summary, file=sys.stderr if not out else sys.stdout)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
