"""Command-line front end.

Subcommands trace, classify, residues, precession and atlas-check write a
JSON report {meta: {version, config}, data}; trace can instead write its
samples as CSV with the events in a sidecar file.  Exit codes: 0 success,
1 failed checks, 2 bad configuration, 3 integration or contour failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .chart_atlas import (
    Chart,
    CotangentState,
    OverlapError,
    ValidityError,
    hamiltonian,
    hamiltonian_uniform,
    to_chart,
)
from .elliptic_analysis import (
    curve_from_invariants,
    discriminant_formula,
    du_residues,
    segments,
    u_period_check,
)
from .geodesic_flow import (
    DEFAULT_TOL,
    InfeasibleError,
    IntegrationError,
    closure_momentum,
    init_null,
    integrate,
    join_runs,
    precession,
    sphere_point,
)
from .special_functions import DegenerateError, DomainError

__all__ = ["main", "build_parser", "atlas_check", "read_report", "read_trajectory_csv", "encode"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
TOL_ENV = "STRING_GEODESICS_TOL"
CSV_COLUMNS = ("s", "chart", "c1", "c2", "m1", "m2", "H_err")
EVENT_COLUMNS = ("s", "kind", "quadrant", "sheet", "side", "chart", "c1", "c2", "m1", "m2")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# encoding


def encode(value):
    """JSON-safe form: complex -> [re, im], non-finite floats -> "inf"/"-inf"/"nan"."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return [encode(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [encode(float(value.real)), encode(float(value.imag))]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return value


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _info(message: str, out: str | None) -> None:
    # keep stdout clean for data when the report itself goes there
    stream = sys.stderr if out in (None, "-") else sys.stdout
    print(message, file=stream)


def _report(config: dict, data: dict) -> dict:
    return encode({"meta": {"version": __version__, "config": config}, "data": data})


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str, n: tuple, name: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if len(vals) not in n:
        raise ConfigError(f"{name}: expected {' or '.join(map(str, n))} values, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{name}: values must be finite")
    return vals


def _default_tol() -> float:
    env = os.environ.get(TOL_ENV)
    if env is None:
        return DEFAULT_TOL
    try:
        return float(env)
    except ValueError:
        raise ConfigError(f"{TOL_ENV}: not a number: {env!r}") from None


def _check_tol(tol: float) -> float:
    if not (0 < tol <= 1e-4):
        raise ConfigError(f"--tol must lie in (0, 1e-4], got {tol!r}")
    return tol


def _check_h(H) -> float:
    if H is None:
        raise ConfigError("--H is required")
    if not H > 0:
        raise ConfigError(f"--H must be positive, got {H!r}")
    return H


# ---------------------------------------------------------------------------
# atlas consistency suite

_REGIONS = ("exterior", "interior", "anti")


def _random_ef_state(rng) -> CotangentState:
    region = _REGIONS[rng.integers(3)]
    if region == "exterior":
        r = rng.uniform(1.2, 8.0)
    elif region == "interior":
        r = rng.uniform(0.2, 0.8)
    else:
        r = -rng.uniform(0.2, 8.0)
    w = 1.0 / r - 1.0 / 3.0
    return CotangentState(
        Chart.EF_ADV,
        (rng.uniform(-3.0, 3.0), w),
        (rng.normal(), rng.normal()),
        sheet=int(rng.choice([-1, 1])),
        flip=int(rng.choice([-1, 1])),
    )


def _rel(a, b) -> float:
    return abs(a - b) / (1.0 + abs(b))


def _momentum_relations(ks: CotangentState, xp: CotangentState, xq: CotangentState) -> float:
    """Largest residual of the KS / (p, x) / (q, x) momentum overlap relations."""
    p, q = ks.coords
    P, Qm = ks.momenta
    x = xp.coords[1]
    R, X = xp.momenta
    S, Y = xq.momenta
    k = x * x - 1.0
    c = 2.0 * x**3
    checks = [
        (P, R + X * k / (c * p)),
        (P, Y * k / (c * p)),
        (Qm, X * k / (c * q)),
        (Qm, S + Y * k / (c * q)),
        (R, -q * S / p),
        (X, Y + c * q * S / k),
        (S, -p * R / q),
        (Y, X + c * p * R / k),
    ]
    return max(_rel(a, b) for a, b in checks)


def atlas_check(n: int, seed: int = 0, tol: float = 1e-10, fault: float = 0.0) -> dict:
    """Randomised chart-overlap checks.

    Each sample is a state in the advanced EF chart, carried into every
    chart whose domain contains it.  Checked: the Hamiltonian agrees across
    charts, the closed form matches (1/2) g^ab m_a m_b, the map back is the
    identity, and the KS, (p, x) and (q, x) momenta satisfy their overlap
    relations.  `fault` perturbs one comparison to exercise the failure path.
    """
    if n < 1:
        raise ConfigError("--n must be at least 1")
    rng = np.random.default_rng(seed)
    worst = {"hamiltonian": 0.0, "metric": 0.0, "round_trip": 0.0, "momentum_relations": 0.0}
    failures = []
    n_overlaps = 0
    for i in range(n):
        base = _random_ef_state(rng)
        h0 = hamiltonian(base)
        images = {}
        for target in Chart:
            try:
                images[target] = to_chart(base, target)
            except (OverlapError, ValidityError):
                continue
        for target, st in images.items():
            n_overlaps += 1
            h = hamiltonian(st) + (fault if target is Chart.KS else 0.0)
            errs = {
                "hamiltonian": _rel(h, h0),
                "metric": _rel(hamiltonian_uniform(st), h),
                "round_trip": float(max(
                    _rel(a, b) for a, b in zip(to_chart(st, Chart.EF_ADV).as_array(), base.as_array())
                )),
            }
            for key, e in errs.items():
                worst[key] = max(worst[key], e)
                if not e <= tol:
                    failures.append({"sample": i, "chart": target.value, "check": key, "error": e})
        if all(c in images for c in (Chart.KS, Chart.XP, Chart.XQ)):
            e = _momentum_relations(images[Chart.KS], images[Chart.XP], images[Chart.XQ])
            worst["momentum_relations"] = max(worst["momentum_relations"], e)
            if not e <= tol:
                failures.append({"sample": i, "chart": "ks/xp/xq", "check": "momentum_relations", "error": e})
    return {
        "n": n,
        "seed": seed,
        "tolerance": tol,
        "overlaps_checked": n_overlaps,
        "max_errors": worst,
        "failures": failures[:50],
        "n_failures": len(failures),
        "passed": not failures,
    }


# ---------------------------------------------------------------------------
# trace


def _start_state(args, H2: float):
    """Initial string state and conserved set from --chart/--start/--U."""
    try:
        chart = Chart(args.chart)
    except ValueError:
        raise ConfigError(f"--chart: unknown chart {args.chart!r}") from None
    vals = _floats(args.start, (2, 4), "--start")
    if len(vals) == 4:
        st = CotangentState(chart, vals[:2], vals[2:])
        try:
            h = hamiltonian(st)
        except (ValidityError, ValueError) as exc:
            raise ConfigError(f"--start: {exc}") from None
        if H2 is not None and abs(h - H2) > 1e-8 * (1 + abs(H2)):
            raise ConfigError(f"--start has string energy {h!r} but --H2 is {H2!r}")
        H2 = h if H2 is None else H2
        st = CotangentState(chart, vals[:2], vals[2:])
        m1 = vals[2]
    else:
        if args.U is None:
            raise ConfigError("--U is required with a two-value --start")
        if H2 is None:
            raise ConfigError("--H2 is required with a two-value --start")
        m1 = args.U
        st = CotangentState(chart, vals, (m1, 0.0))
    try:
        conserved, geo, state = init_null(H2, st, args.direction)
    except (InfeasibleError, ValidityError, ValueError) as exc:
        raise ConfigError(f"--start: {exc}") from None
    if len(vals) == 4:
        state = st
    return conserved, geo, state


def _trace_config(args) -> dict:
    return {
        "command": "trace", "H": args.H, "U": args.U, "H2": args.H2, "chart": args.chart,
        "start": args.start, "span": args.span, "tol": args.tol, "direction": args.direction,
        "physical_only": args.physical_only, "format": args.format,
    }


def _sample_rows(traj):
    h_err = traj.energy() - traj.conserved.H
    for i in range(len(traj)):
        st = traj.state(i)
        yield (float(traj.s[i]), st.chart.value, *map(float, traj.y[i]), float(h_err[i]))


def _event_rows(traj):
    for e in traj.events:
        st = e.state
        yield (
            float(e.s), e.kind, e.region.quadrant, int(e.region.sheet), e.region.side,
            st.chart.value, *map(float, st.as_array()),
        )


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_trajectory_csv(path) -> dict:
    """Columns of a trace CSV as arrays (chart as strings)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        cols[name] = np.array(vals) if name in ("chart", "kind", "quadrant", "side") else np.array(vals, dtype=float)
    return cols


def cmd_trace(args) -> int:
    tol = _check_tol(args.tol)
    span = _floats(args.span, (2,), "--span")
    H2 = args.H2
    if args.H is not None and H2 is not None and args.H != H2:
        raise ConfigError(f"--H ({args.H!r}) must equal --H2 ({H2!r}) on a null geodesic")
    if H2 is None:
        H2 = args.H
    if H2 is not None and H2 < 0:
        raise ConfigError(f"--H2 must be nonnegative, got {H2!r}")
    conserved, geo, state = _start_state(args, H2)
    if not span[0] <= 0.0 <= span[1] or span[0] == span[1]:
        raise ConfigError("--span must be an interval a,b with a <= 0 <= b and a < b")
    runs = [
        integrate(state, conserved, (0.0, end), tol=tol, physical_only=args.physical_only)
        for end in span if end != 0.0
    ]
    traj = join_runs(*runs) if len(runs) == 2 else runs[0]
    x_start, x_end = sphere_point(geo, [traj.s[0], traj.s[-1]])
    data = {
        "conserved": {"H": conserved.H, "U": conserved.U, "H2": conserved.H2},
        "sphere": {"n": geo.n, "a": geo.a, "b": geo.b, "theta0": geo.theta0, "rate": geo.rate},
        "drift": {"H": traj.h_drift(), "U": traj.u_drift()},
        "angular_motion": float(geo.rate * (traj.s[-1] - traj.s[0])),
        "sphere_endpoints": [x_start, x_end],
        "events": [dict(zip(EVENT_COLUMNS, row)) for row in _event_rows(traj)],
    }
    config = _trace_config(args)
    if args.format == "csv":
        if args.out in (None, "-"):
            raise ConfigError("--format csv needs --out (the events go to a sidecar file)")
        _emit(_csv_text(CSV_COLUMNS, _sample_rows(traj)), args.out)
        side = Path(args.out).with_suffix(".events.csv")
        side.write_text(_csv_text(EVENT_COLUMNS, _event_rows(traj)), encoding="utf-8")
    else:
        data["samples"] = [dict(zip(CSV_COLUMNS, row)) for row in _sample_rows(traj)]
        _emit(_dump(_report(config, data)), args.out)
    kinds = [e.kind for e in traj.events if e.kind != "chart_switch"]
    _info(
        f"samples {len(traj)}  events {len(kinds)}  H drift {data['drift']['H']:.3e}  "
        f"U drift {data['drift']['U']:.3e}  angular motion {data['angular_motion']:.6g} rad",
        args.out,
    )
    return EXIT_OK



# ---------------------------------------------------------------------------
# classify and residues


def cmd_classify(args) -> int:
    H = _check_h(args.H)
    U = args.U if args.U is not None else 0.0
    try:
        curve = curve_from_invariants(H, U)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    data = {
        "g2": curve.inv.g2,
        "g3": curve.inv.g3,
        "discriminant": curve.discriminant,
        "discriminant_formula": discriminant_formula(H, U),
        "case": curve.case,
        "roots": list(curve.roots.roots),
        "multiplicities": list(curve.roots.multiplicities),
        "landmarks": curve.landmarks,
        "segments": {},
    }
    if curve.case != "degenerate":
        data["half_periods"] = [curve.lattice.omega1, curve.lattice.omega3]
        table = segments(curve)
        data["segments"] = {
            label: {"interval": list(seg.interval), "parameter": seg.parameter, "landmarks": list(seg.landmarks)}
            for label, seg in table.segments.items()
        }
    _emit(_dump(_report({"command": "classify", "H": H, "U": U}, data)), args.out)
    return EXIT_OK


def _pole_dict(p) -> dict:
    return {
        "z": p.z, "w": p.w, "order": p.order, "residue": p.residue,
        "closed_form": p.closed_form, "contour": p.contour, "contour_error": abs(p.contour - p.residue),
    }


def cmd_residues(args) -> int:
    H = _check_h(args.H)
    if args.U is None:
        raise ConfigError("--U is required")
    if args.epsilon not in (1, -1):
        raise ConfigError("--epsilon must be 1 or -1")
    curve = curve_from_invariants(H, args.U)
    if curve.case == "degenerate":
        raise ConfigError(f"degenerate curve: U (8H - 27U^2) = 0 for H={H!r}, U={args.U!r}")
    rep = du_residues(curve, args.epsilon)
    period, roundtrip = u_period_check(curve, args.epsilon)
    data = {
        "case": curve.case,
        "epsilon": rep.epsilon,
        "single_pole": _pole_dict(rep.single_pole),
        "double_pole": _pole_dict(rep.double_pole),
        "residue_sum": rep.total,
        "du_residues": list(rep.du_residues),
        "contour_radius": rep.contour_radius,
        "u_period": period,
        "u_period_error": abs(abs(period) - 4 * math.pi) + abs(period.real),
        "exp_half_u_roundtrip_error": roundtrip,
    }
    config = {"command": "residues", "H": H, "U": args.U, "epsilon": args.epsilon}
    _emit(_dump(_report(config, data)), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# precession


def _precession_start(args, H: float, U: float):
    if args.start is not None:
        return _start_state(args, H)
    if H > 0:
        curve = curve_from_invariants(H, U)
        if curve.case == "case1_pos":
            w0 = 0.5 * (-1.0 / 3.0 + curve.roots.e2.real)
        else:
            w0 = 0.0
    else:
        w0 = -0.5
    st = CotangentState(Chart.EF_ADV, (0.0, w0), (U, 0.0))
    try:
        return init_null(H, st, args.direction)
    except InfeasibleError as exc:
        raise ConfigError(str(exc)) from None


def cmd_precession(args) -> int:
    tol = _check_tol(args.tol)
    H = args.H if args.H is not None else args.H2
    if H is None or H < 0:
        raise ConfigError("--H must be given and nonnegative")
    if args.turns is not None:
        if not H > 0:
            raise ConfigError("--turns needs --H > 0")
        U = closure_momentum(H, args.turns)
    elif args.U is None:
        raise ConfigError("--U or --turns is required")
    else:
        U = args.U
    args.U = U
    span = _floats(args.span or "0,100", (2,), "--span")
    conserved, geo, state = _precession_start(args, H, U)
    traj = integrate(state, conserved, (span[0], span[1]), tol=tol)
    passes = precession(traj, geo)
    rows = []
    for k, p in enumerate(passes):
        row = {
            "s_enter": p.s_enter, "s_exit": p.s_exit,
            "theta_enter": p.theta_enter, "theta_exit": p.theta_exit,
            "sweep": p.theta_exit - p.theta_enter,
        }
        if k + 1 < len(passes):
            d = passes[k + 1].theta_enter - p.theta_enter
            ratio = d / (2 * math.pi)
            frac = Fraction(ratio).limit_denominator(args.max_denominator)
            row.update(dtheta=d, ratio=ratio)
            row["rational"] = (
                f"{frac.numerator}/{frac.denominator}" if abs(ratio - float(frac)) <= args.rational_tol else None
            )
        rows.append(row)
    closure = None
    fracs = {r.get("rational") for r in rows if "dtheta" in r}
    if len(fracs) == 1 and None not in fracs:
        q = Fraction(fracs.pop()).denominator
        if len(passes) > q:
            x0, xq = sphere_point(geo, [passes[0].s_enter, passes[q].s_enter])
            closure = {"passes": q, "error": float(np.linalg.norm(xq - x0))}
    data = {"conserved": {"H": conserved.H, "U": conserved.U, "H2": conserved.H2},
            "passes": rows, "closure": closure}
    config = {"command": "precession", "H": H, "U": U, "turns": args.turns, "span": list(span),
              "tol": tol, "rational_tol": args.rational_tol, "max_denominator": args.max_denominator}
    _emit(_dump(_report(config, data)), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# atlas-check


def cmd_atlas_check(args) -> int:
    report = atlas_check(args.n, args.seed, fault=args.inject_fault)
    config = {"command": "atlas-check", "n": args.n, "seed": args.seed}
    _emit(_dump(_report(config, report)), args.out)
    _info(
        f"atlas-check: {report['overlaps_checked']} overlaps, {report['n_failures']} failures",
        args.out,
    )
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="string-geodesics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt=("json",)):
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=fmt, default="json")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("trace", help="integrate a null geodesic")
    p.add_argument("--H", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--H2", type=float)
    p.add_argument("--chart", default="ef_adv")
    p.add_argument("--start", required=True, help="c1,c2 (momentum completed) or c1,c2,m1,m2")
    p.add_argument("--span", default="0,10")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--direction", type=int, choices=(-1, 1), default=1)
    p.add_argument("--physical-only", action="store_true")
    common(p, ("json", "csv"))
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("classify", help="classify the elliptic curve of (H, U)")
    p.add_argument("--H", type=float)
    p.add_argument("--U", type=float)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("residues", help="residues of du and the u-period")
    p.add_argument("--H", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--epsilon", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_residues)

    p = sub.add_parser("precession", help="passes through the exterior and the sphere angle")
    p.add_argument("--H", type=float)
    p.add_argument("--H2", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--turns", type=float, help="tune U so each period advances this many turns")
    p.add_argument("--chart", default="ef_adv")
    p.add_argument("--start", default=None)
    p.add_argument("--span", default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--direction", type=int, choices=(-1, 1), default=1)
    p.add_argument("--rational-tol", type=float, default=1e-6)
    p.add_argument("--max-denominator", type=int, default=12)
    common(p)
    p.set_defaults(func=cmd_precession)

    p = sub.add_parser("atlas-check", help="randomised chart-overlap consistency checks")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--inject-fault", type=float, default=0.0, help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_atlas_check)
    return parser


_LIST_OPTIONS = ("--span", "--start")


def _attach_list_values(argv: list) -> list:
    """Turn "--span -50,50" into "--span=-50,50" so argparse keeps negative lists."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1][1:2].isdigit():
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_attach_list_values(argv))
    try:
        if hasattr(args, "tol") and args.tol is None:
            args.tol = _default_tol()
        return args.func(args)
    except (ConfigError, DegenerateError, DomainError) as exc:
        print(f"string-geodesics {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ArithmeticError) as exc:
        print(f"string-geodesics {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
