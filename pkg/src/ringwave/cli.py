"""Command-line front end.

    ringwave <subcommand> [--config FILE] [flags]

Subcommands: kernel-table, stream, functionals, rearrange, ring, evolve,
verify.  A config file holds ``key = value`` lines (``#`` comments);
keys are flag names without the leading dashes, and flags given on the
command line win.  Exit status is 0 on success, 1 for invalid input and
2 for numerical failure; failures print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError, RingwaveError, ValidationError

FORMAT_VERSION = "ringwave/1"


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--threads", type=_positive_int, help="worker threads (env RINGWAVE_THREADS)")
    p.add_argument("--csv", action="store_true", help="emit tables as CSV")
    p.add_argument("--rule", default="cell-average", choices=["cell-average", "subtract"],
                   help="singular self-cell rule")
    p.add_argument("--ca", type=float, default=None, help="override the kernel constant c_a")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ringwave", description="Fractional vortex rings: kernels, waves, evolution.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("kernel-table", help="tabulate F_a and F_a' on a log-spaced s ladder")
    _common(p)
    p.add_argument("--a", type=float, action="append", help="order (repeatable)")
    p.add_argument("--s-min", type=float, default=1e-4)
    p.add_argument("--s-max", type=float, default=1e4)
    p.add_argument("--n", type=_positive_int, default=12)
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("stream", help="stream function of a field file")
    _common(p)
    p.add_argument("--input", required=False)
    p.add_argument("--a", type=float)
    p.add_argument("--out", help="output ψ field file")
    p.add_argument("--report", help="JSON-lines report path (default stdout)")

    p = sub.add_parser("functionals", help="E, E2, impulse, mass and norms of a field file")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--a", type=float)

    p = sub.add_parser("rearrange", help="Steiner symmetrization, translation and scalings")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--a", type=float)
    p.add_argument("--op", choices=["steiner", "translate", "scale-impulse", "scale-energy"])
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out")

    p = sub.add_parser("ring", help="compute a traveling vortex ring")
    _common(p)
    p.add_argument("--a", type=float)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nr", type=_positive_int, default=128)
    p.add_argument("--nz", type=_positive_int, default=256)
    p.add_argument("--rmax", type=float, default=4.5)
    p.add_argument("--zmax", type=float, default=4.5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--max-iter", type=_positive_int, default=2000)
    p.add_argument("--seed-profile", choices=["ball", "gaussian"], default="ball")
    p.add_argument("--out-prefix", default="ring")

    p = sub.add_parser("evolve", help="evolve a field by the transport equation")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--from-ring", help="summary JSON written by 'ring'")
    p.add_argument("--a", type=float)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--diag-every", type=_positive_int, default=1)
    p.add_argument("--snapshots", type=int, default=0, help="intermediate snapshots to write")
    p.add_argument("--pad-z", type=int, default=0, help="zero cells added above and below")
    p.add_argument("--out-prefix", default="evolve")

    p = sub.add_parser("verify", help="compare an evolved wave with its translate")
    _common(p)
    p.add_argument("--from-ring", help="summary JSON written by 'ring'")
    p.add_argument("--T", type=float, help="final time (default: one core radius / W)")
    p.add_argument("--samples", type=_positive_int, default=8)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--speed-factor", type=float, default=1.0)
    p.add_argument("--pad-z", type=int, default=None, help="zero cells added above and below")
    return parser


# ---------------------------------------------------------------------------
# configuration


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise UsageError(f"unknown subcommand {name!r}")


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand")
    if args.config:
        cfg = read_config(args.config)
        sp = _subparser(parser, args.command)
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in actions or key in ("config", "help"):
                raise ValidationError(f"unknown config key {key!r} for {args.command}")
            act = actions[key]
            if isinstance(act, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
                continue
            conv = act.type or str
            try:
                v = conv(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"config key {key}: {exc}") from None
            if act.choices is not None and v not in act.choices:
                raise ValidationError(f"config key {key}: {v!r} not in {list(act.choices)}")
            defaults[key] = [v] if isinstance(act, argparse._AppendAction) else v
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}
    return {"format": FORMAT_VERSION, "config": cfg}


def _set_threads(args):
    n = args.threads
    if n is None and os.environ.get("RINGWAVE_THREADS"):
        try:
            n = int(os.environ["RINGWAVE_THREADS"])
        except ValueError:
            raise ValidationError("RINGWAVE_THREADS must be an integer") from None
        if n <= 0:
            raise ValidationError("RINGWAVE_THREADS must be positive")
    if n is None:
        return
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# helpers


def _order(args, a=None):
    from .kernel import FractionalOrder
    a = args.a if a is None else a
    if a is None or (isinstance(a, float) and math.isnan(a)):
        raise ValidationError("order a is required (--a), and must satisfy 1/2 < a < 1")
    if args.ca is None:
        return FractionalOrder(float(a))
    return FractionalOrder(float(a), c_a=args.ca)


def _load_input(args):
    from .fields import read_field_file
    if not args.input:
        raise ValidationError("--input is required")
    f, a, meta = read_field_file(args.input)
    if getattr(args, "a", None) is not None:
        a = args.a
    return f, a, meta


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _write_csv(rows, header, stream, meta=None):
    if meta is not None:
        stream.write(f"# {_dump_json(meta)}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _table(rows, header, args, meta=None):
    """CSV with --csv, otherwise aligned columns."""
    if args.csv:
        _write_csv(rows, header, sys.stdout, meta)
        return
    cells = [header] + [[f"{x:.10g}" if isinstance(x, (float, np.floating)) else str(x) for x in row]
                        for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernel_table(args):
    from .kernel import FractionalOrder, kernel_table_rows
    if not (args.s_min > 0 and args.s_max >= args.s_min):
        raise ValidationError("need 0 < s-min <= s-max")
    orders = args.a or [0.6, 0.75, 0.9]
    s = np.geomspace(args.s_min, args.s_max, args.n)
    rows = []
    for a in orders:
        o = FractionalOrder(a) if args.ca is None else FractionalOrder(a, c_a=args.ca)
        rows.extend(kernel_table_rows(o, s))
    header = ["a", "s", "F", "F_prime", "abs_err"]
    meta = resolved_config(args)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write_csv(rows, header, fh, meta)
    else:
        _write_csv(rows, header, sys.stdout, meta)


def cmd_stream(args):
    from .biot_savart import compute_stream
    from .fields import save_field
    xi, a, _ = _load_input(args)
    order = _order(args, a)
    rep = compute_stream(order, xi, args.rule)
    meta = resolved_config(args)
    if args.out:
        save_field(args.out, rep.psi, order.a, meta)
    line = _dump_json({**meta, "report": rep.summary()})
    if args.report:
        Path(args.report).write_text(line + "\n")
    else:
        print(line)


def cmd_functionals(args):
    from .functionals import functionals_row
    xi, a, _ = _load_input(args)
    row = functionals_row(_order(args, a), xi, args.rule)
    _table([list(row.values())], list(row.keys()), args, resolved_config(args) if args.csv else None)


def cmd_rearrange(args):
    from . import rearrange
    from .fields import save_field
    xi, a, _ = _load_input(args)
    if args.op is None:
        raise ValidationError("--op is required")
    if not args.out:
        raise ValidationError("--out is required")
    if args.op == "steiner":
        out = rearrange.steiner(xi)
    elif args.op == "translate":
        out = rearrange.translate_off_axis(xi, args.tau)
    elif args.op == "scale-impulse":
        out = rearrange.scale_impulse_preserving(xi, args.sigma)
    else:
        out = rearrange.scale_energy_preserving(xi, args.sigma, _order(args, a).a)
    save_field(args.out, out, a if a is not None else math.nan, resolved_config(args))


def cmd_ring(args):
    from .fields import HalfPlaneGrid, save_field
    from .travelwave import SolverOptions, solve_traveling_wave
    order = _order(args)
    if not args.mu > 0:
        raise ValidationError("impulse target mu must be positive")
    grid = HalfPlaneGrid(args.rmax, args.zmax, args.nr, args.nz)
    opts = SolverOptions(tol=args.tol, omega=args.omega, max_iter=args.max_iter,
                         seed_profile=args.seed_profile, rule=args.rule)
    if not 0 < args.omega <= 1:
        raise ValidationError("omega must lie in (0, 1]")
    tw = solve_traveling_wave(order, args.mu, grid, opts)
    prefix = Path(args.out_prefix)
    meta = resolved_config(args)
    wave_path = prefix.with_name(prefix.name + "_wave.axf")
    save_field(wave_path, tw.xi, order.a, meta)
    summary = {**meta, "wave": tw.summary(), "wave_file": wave_path.name}
    prefix.with_name(prefix.name + "_summary.json").write_text(_dump_json(summary) + "\n")
    with open(prefix.with_name(prefix.name + "_history.csv"), "w", newline="") as fh:
        keys = list(tw.history[0].keys())
        _write_csv([[r[k] for k in keys] for r in tw.history], keys, fh, meta)
    _table([[tw.W, tw.gamma, tw.E2_value, tw.residual, tw.iterations]],
           ["W", "gamma", "E2", "residual", "iterations"], args)


def _wave_from_summary(path, args):
    from .fields import read_field_file
    from .kernel import FractionalOrder
    from .travelwave import TravelingWave
    try:
        summary = json.loads(Path(path).read_text())
        w = summary["wave"]
        wave_file = Path(path).parent / summary["wave_file"]
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"cannot read ring summary {path}: {exc}") from None
    xi, a, _ = read_field_file(wave_file)
    order = FractionalOrder(w["a"], c_a=w["c_a"]) if args.ca is None else FractionalOrder(w["a"], c_a=args.ca)
    return TravelingWave(xi, w["W"], w["gamma"], w["mu"], order, w["residual"], w["E2"], w["iterations"],
                         w["branch"] == "mass-binding")


def cmd_evolve(args):
    from .evolve import run
    from .fields import pad_z, save_field
    if args.T < 0:
        raise ValidationError("final time T must be nonnegative")
    if not args.cfl > 0:
        raise ValidationError("cfl must be positive")
    if args.from_ring:
        tw = _wave_from_summary(args.from_ring, args)
        xi, order = tw.xi, tw.order
    else:
        xi, a, _ = _load_input(args)
        order = _order(args, a)
    if args.pad_z:
        xi = pad_z(xi, args.pad_z)
    prefix = Path(args.out_prefix)
    meta = resolved_config(args)
    times = [args.T * k / (args.snapshots + 1) for k in range(1, args.snapshots + 1)]

    def snap(t, f):
        if t < args.T:
            idx = times.index(t) + 1
            save_field(prefix.with_name(f"{prefix.name}_snap{idx:03d}.axf"), f, order.a, {**meta, "t": t})

    final, records = run(order, xi, args.T, args.cfl, args.diag_every, args.rule,
                         callback=snap, sample_times=times)
    save_field(prefix.with_name(prefix.name + "_final.axf"), final, order.a, {**meta, "t": args.T})
    rows = [r.row() for r in records]
    header = list(rows[0].keys())
    with open(prefix.with_name(prefix.name + "_diagnostics.csv"), "w", newline="") as fh:
        _write_csv([[r[k] for k in header] for r in rows], header, fh, meta)
    last = rows[-1]
    _table([[last["t"], last["l2"], last["impulse"], last["energy"]]], ["t", "l2", "impulse", "energy"], args)


def cmd_verify(args):
    import dataclasses
    from .evolve import core_radius, verify_traveling
    from .fields import pad_z
    if not args.from_ring:
        raise ValidationError("--from-ring is required")
    tw = _wave_from_summary(args.from_ring, args)
    T = args.T if args.T is not None else core_radius(tw.xi) / tw.W
    if T < 0:
        raise ValidationError("final time T must be nonnegative")
    pad = args.pad_z
    if pad is None:
        g = tw.xi.grid
        pad = int(math.ceil(abs(tw.W * T) / g.h_z)) + 8
    if pad:
        tw = dataclasses.replace(tw, xi=pad_z(tw.xi, pad))
    curve = verify_traveling(tw.order, tw, T, args.samples, args.cfl, args.speed_factor, args.rule)
    args.csv = True
    _table([[t, e] for t, e in curve], ["t", "rel_l2_error"], args, resolved_config(args))


COMMANDS = {
    "kernel-table": cmd_kernel_table,
    "stream": cmd_stream,
    "functionals": cmd_functionals,
    "rearrange": cmd_rearrange,
    "ring": cmd_ring,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def _fail(exc, code) -> int:
    msg = " ".join(str(exc).split())
    sys.stderr.write(_dump_json({"status": "error", "exit": code, "kind": type(exc).__name__, "message": msg}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        _set_threads(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(build_parser().format_usage())
        return _fail(exc, 1)
    except ValidationError as exc:
        return _fail(exc, 1)
    except NumericalError as exc:
        return _fail(exc, 2)
    except RingwaveError as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
