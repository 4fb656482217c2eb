"""``amlab`` command line.

Every report embeds a ``config`` block (the RunConfig echo).  ``amlab rerun
REPORT`` replays it; outputs are written with sorted keys and no timings,
so a replay from the same directory layout reproduces the bytes.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O or
numerical error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .decompose import decompose, decompose_scan, scan_spread, self_fields, verify_cancellation
from .dirac import SCENARIOS, orbital_term, scenario
from .errors import AmlabError, UnknownScenarioError
from .fieldio import read_field, write_field
from .gauge import gauge_scan
from .grid import Grid3, PhysicalParams, SpinorField
from .scf import ScfParams, scf_iterate, write_history_csv
from .suites import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Serializable command configuration: the command name plus every option value."""

    command: str
    options: dict

    def to_dict(self) -> dict:
        return {"command": self.command, "amlab_version": __version__, "options": dict(sorted(self.options.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(d["command"], dict(d["options"]))

    def to_argv(self) -> list[str]:
        argv = [self.command]
        for key, val in sorted(self.options.items()):
            flag = "--" + key.replace("_", "-")
            if val is None or val is False:
                continue
            if val is True:
                argv.append(flag)
            elif isinstance(val, (list, tuple)):
                argv += [flag, ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)]
            else:
                argv += [flag, repr(val) if isinstance(val, float) else str(val)]
        return argv


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _add_system(p, n=64, coupling=-1.0, scenario_default="gaussian-spin-up"):
    p.add_argument("--scenario", default=scenario_default, help="catalog scenario (see `amlab generate --help`)")
    p.add_argument("--n", type=int, default=n, help=f"nodes per axis (default {n})")
    p.add_argument("--half-width", type=float, default=8.0, help="box half-width in units of hbar/(m c) (default 8)")
    p.add_argument("--sigma", type=float, default=None, help="packet width (default 1)")
    p.add_argument("--momentum", type=_floats, default=None, help="packet momentum px,py,pz")
    p.add_argument("--mode", type=_ints, default=None, help="plane-wave integer mode i,j,k (default 0,0,1)")
    p.add_argument("--helicity", type=int, choices=(-1, 1), default=None, help="plane-wave helicity")
    p.add_argument("--bare", action="store_true", help="skip the positive-energy projection of packets")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--coupling", type=float, default=coupling, help=f"charge e (default {coupling})")
    p.add_argument("--scheme", choices=("auto", "fd4", "spectral"), default="auto",
                   help="derivative stencil; auto picks spectral for plane-wave, fd4 otherwise")


def _scheme(args) -> str:
    if args.scheme != "auto":
        return args.scheme
    return "spectral" if getattr(args, "scenario", None) == "plane-wave" and not getattr(args, "input", None) else "fd4"


def _params(args) -> PhysicalParams:
    return PhysicalParams(m=args.mass, e=args.coupling)


def _scenario_kwargs(args) -> dict:
    if args.scenario == "plane-wave":
        kw = {"mode": tuple(args.mode) if args.mode else (0, 0, 1)}
        if args.helicity is not None:
            kw["helicity"] = args.helicity
        return kw
    kw = {}
    if args.sigma is not None:
        kw["sigma"] = args.sigma
    if args.momentum is not None:
        if len(args.momentum) != 3:
            raise UsageError("--momentum needs three components")
        kw["momentum"] = tuple(args.momentum)
    if args.bare:
        kw["dressed"] = False
    return kw


def _build_psi(args) -> SpinorField:
    if getattr(args, "input", None):
        f = read_field(args.input)
        if not isinstance(f, SpinorField):
            raise UsageError(f"{args.input} holds a {f.kind} field, not a spinor")
        return f
    if args.n < 8:
        raise UsageError("--n must be at least 8")
    grid = Grid3.cube(args.n, args.half_width)
    return scenario(args.scenario, grid, _params(args), **_scenario_kwargs(args))


def _config(args) -> RunConfig:
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "func")}
    for key in ("input",):
        if opts.get(key):
            opts[key] = os.path.abspath(opts[key])
    return RunConfig(args.command, opts)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(report: dict, out: str | None) -> None:
    text = _dump(report)
    if out:
        tmp = out + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, out)
    else:
        sys.stdout.write(text)


def _say(args, msg: str) -> None:
    # keep stdout clean for the JSON report when no --out is given
    print(msg, file=sys.stdout if getattr(args, "out", None) else sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    psi = _build_psi(args)
    write_field(psi, args.out)
    meta = {"config": _config(args).to_dict(), "norm": psi.norm2(), "grid": psi.grid.to_dict(),
            "L_orbital": [float(v) for v in orbital_term(psi, _params(args), _scheme(args))]}
    _emit(meta, args.out + ".json")
    print(f"wrote {args.out}: scenario {args.scenario}, n={psi.grid.n[0]}, "
          f"half-width {args.half_width}, norm {psi.norm2():.15f}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    psi = _build_psi(args)
    params = _params(args)
    scheme = _scheme(args)
    cfg = _config(args).to_dict()
    if args.e_scan:
        reports = decompose_scan(psi, params, args.e_scan, scheme, args.far_levels)
        spread = scan_spread(reports)
        out = {"config": cfg, "reports": [r.to_dict() for r in reports], "max_deviation_from_uncoupled": spread}
        ok = spread <= args.tol
        checks = []
        if args.check:
            checks = [verify_cancellation(r, args.tol, args.tol) for r in reports]
            ok = ok and all(c.passed for c in checks)
            out["checks"] = [c.to_dict() for c in checks]
        out["passed"] = bool(ok)
        _emit(out, args.out)
        for r in reports:
            _say(args, f"e={r.params_echo['e']:+.3g}  J = {np.array2string(r.J_total_eq4, precision=6)}")
        _say(args, f"max |J(e) - J(0)| = {spread:.3e} hbar  ({'PASS' if ok else 'FAIL'})")
        return EXIT_OK if (ok or not args.check) else EXIT_FAIL
    rep = decompose(psi, params, "self", scheme, args.far_levels, args.tol, args.tol)
    out = {"config": cfg, "report": rep.to_dict()}
    code = EXIT_OK
    if args.check:
        chk = verify_cancellation(rep)
        out["check"] = chk.to_dict()
        code = EXIT_OK if chk.passed else EXIT_FAIL
    _emit(out, args.out)
    _say(args, f"J = {np.array2string(rep.J_total_eq4, precision=6)}  "
               f"cancellation residual = {np.linalg.norm(rep.cancellation_residual):.3e}")
    if args.check:
        _say(args, "cancellation check " + ("PASS" if code == EXIT_OK else "FAIL"))
    return code


def cmd_verify(args) -> int:
    rows = run_suite(args.suite, args.n, args.half_width)
    failed = [r for r in rows if not r.passed]
    out = {"config": _config(args).to_dict(), "checks": [r.to_dict() for r in rows], "passed": not failed}
    if args.out:
        _emit(out, args.out)
    for r in rows:
        print(r.line())
    if failed:
        for r in failed:
            print(f"failed: {r.suite}: {r.name}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_gauge_scan(args) -> int:
    psi = _build_psi(args)
    params = _params(args)
    em = self_fields(psi, params)
    rep = gauge_scan(psi, em, params, args.trials, args.seed, _scheme(args))
    ok = rep.max_deviation <= args.tol
    _emit({"config": _config(args).to_dict(), "scan": rep.to_dict(), "passed": bool(ok)}, args.out)
    _say(args, f"{args.trials} trials, seed {args.seed}: max total-J deviation {rep.max_deviation:.3e} hbar")
    return EXIT_FAIL if (args.check and not ok) else EXIT_OK


def cmd_scf(args) -> int:
    psi = _build_psi(args)
    params = _params(args)
    try:
        sp = ScfParams(mix=args.mix, tol=args.tol, max_iter=args.max_iter, step=args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    state, history = scf_iterate(psi, sp, params, _scheme(args))
    if args.history:
        write_history_csv(history, args.history)
    if args.save_psi:
        write_field(state.psi, args.save_psi)
    out = {"config": _config(args).to_dict(), "scf_params": sp.to_dict(),
           "final": {"iteration": state.iteration, "energy": state.energy, "residual": state.residual,
                     "converged": state.converged, "stagnated": state.stagnated, "notes": state.notes},
           "history": history}
    _emit(out, args.out)
    _say(args, f"iterations {state.iteration}: residual {history[0]['residual']:.3e} -> {state.residual:.3e}"
               f"{' (converged)' if state.converged else ''}{' (stagnated)' if state.stagnated else ''}")
    return EXIT_OK


def cmd_rerun(args) -> int:
    with open(args.report) as fh:
        cfg = RunConfig.from_dict(json.load(fh)["config"])
    if cfg.command == "rerun":
        raise UsageError("a rerun report cannot be replayed")
    return main(cfg.to_argv())


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amlab", description="Angular momentum of a Dirac spinor and its self-fields.")
    ap.add_argument("--version", action="version", version=f"amlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    catalog = "; ".join(f"{k}: {v[1]}" for k, v in SCENARIOS.items())
    p = sub.add_parser("generate", help="write a scenario spinor to an AMF1 file", epilog=f"scenarios: {catalog}")
    _add_system(p)
    p.add_argument("--out", required=True, help="output .amf path (a .json sidecar is written next to it)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("decompose", help="angular momentum balance with self-fields")
    _add_system(p)
    p.add_argument("--in", dest="input", default=None, help="read the spinor from an AMF1 file instead")
    p.add_argument("--self-field", action="store_true", help="fields sourced by the spinor (the only mode)")
    p.add_argument("--check", action="store_true", help="exit 1 unless the cancellation check passes")
    p.add_argument("--e-scan", type=_floats, default=None, help="comma-separated charges, one report each")
    p.add_argument("--tol", type=float, default=0.01, help="tolerance in units of hbar (default 0.01)")
    p.add_argument("--far-levels", type=int, default=5, help="nested exterior levels for field integrals")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="run a verification suite over a resolution ladder")
    p.add_argument("--suite", choices=sorted(SUITES) + ["all"], required=True)
    p.add_argument("--n", type=_ints, default=None, help="resolution ladder, e.g. 48,96")
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gauge-scan", help="total J under seeded random gauge transformations")
    _add_system(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--check", action="store_true", help="exit 1 if the deviation exceeds --tol")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gauge_scan)

    p = sub.add_parser("scf", help="self-consistent residual-descent iteration")
    _add_system(p, n=24, coupling=-0.1)
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--mix", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--history", default=None, help="CSV path for the iteration history")
    p.add_argument("--save-psi", default=None, help="AMF1 path for the final spinor")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scf)

    p = sub.add_parser("rerun", help="replay the config echoed in a report")
    p.add_argument("report")
    p.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, UnknownScenarioError) as exc:
        print(f"amlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, AmlabError, ValueError, ArithmeticError, MemoryError) as exc:
        print(f"amlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
