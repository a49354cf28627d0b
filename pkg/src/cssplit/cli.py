"""Command-line driver: ``cssplit <command> [options]``.

Exit codes: 0 when every verdict passes, 1 when any fails, 2 on a
configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction

from . import experiments as ex
from .spectral import get_discretization, write_nodes_csv, write_snapshot
from .splitting import certify_AC, certify_DC, diagnostic_split_certificate, make_split
from .stability import DEFAULT_WINDOW, region_scan
from .stencil import SchemeSpec, as_fraction, make_stencils
from .stepper import run, write_timeseries

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("cssplit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _floats(count: int):
    def parse(text: str):
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers") from exc
        if len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers")
        return vals

    return parse


def _ints(count: int):
    def parse(text: str):
        try:
            vals = tuple(int(v) for v in text.split(","))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated integers") from exc
        if len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated integers")
        return vals

    return parse


def _spec(args) -> SchemeSpec:
    try:
        return SchemeSpec(args.k, args.beta)
    except ValueError as exc:
        raise ex.ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- commands
def cmd_coeffs(args) -> int:
    st = make_stencils(_spec(args))
    rows = [(name, q, v) for name, vec in (("a", st.a), ("b", st.b), ("c", st.c)) for q, v in enumerate(vec)]
    if args.format == "csv":
        print("operator,q,numerator,denominator")
        for name, q, v in rows:
            print(f"{name},{q},{v.numerator},{v.denominator}")
    else:
        print(f"k = {st.k}, beta = {st.spec.beta}  (coefficients oldest level first)")
        for name, vec in (("A", st.a), ("B", st.b), ("C", st.c)):
            print(f"  {name}: " + ", ".join(str(v) for v in vec))
    return EXIT_OK


def _cert_block(title, cert) -> list:
    lines = [f"[{title}]"]
    lines.append(f"  min value      : {cert.min_value:.12g}")
    lines.append(f"  argmin y=cos t : {cert.argmin_y:.12g}")
    if cert.forced_zeros:
        lines.append(f"  factors (1-y)  : {cert.forced_zeros} divided out")
    lines.append(f"  coprime        : {cert.coprime}")
    mods = ", ".join(f"{abs(r):.9f}" for r in cert.denominator_roots if abs(r) > 0)
    lines.append(f"  root moduli    : {mods or '-'}")
    lines.append(f"  holomorphic    : {cert.holomorphic}")
    lines.append(f"  verdict        : {'PASS' if cert.lemma_holds else 'FAIL'}")
    return lines


def cmd_certify(args) -> int:
    spec = _spec(args)
    try:
        split = make_split(spec, args.eta)
    except ValueError as exc:
        raise ex.ConfigError(str(exc)) from exc
    certs = {"A/C": certify_AC(make_stencils(spec))}
    if split.canonical:
        certs["D/C"] = certify_DC(split)
    elif spec.k > 1:
        certs["D/C (F=0, diagnostic)"] = diagnostic_split_certificate(spec, args.eta)
    ok = all(c.lemma_holds for c in certs.values())
    if args.json:
        payload = {
            "k": spec.k,
            "beta": str(spec.beta),
            "eta": str(split.eta),
            "kappa": str(split.kappa),
            "canonical": split.canonical,
            "d": [str(v) for v in split.d],
            "certificates": {name: c.as_dict() for name, c in certs.items()},
            "passed": ok,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"k = {spec.k}, beta = {spec.beta}, eta = {split.eta}, kappa = {split.kappa}")
        print("d = (" + ", ".join(str(v) for v in split.d) + ")")
        for name, c in certs.items():
            print("\n".join(_cert_block(name, c)))
        print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_region(args) -> int:
    spec = _spec(args)
    try:
        raster = region_scan(spec, args.window, args.res, tol=args.tol)
    except ValueError as exc:
        raise ex.ConfigError(str(exc)) from exc
    if args.out:
        raster.write_csv(args.out)
    if args.pgm:
        raster.write_pgm(args.pgm)
    if args.text:
        print(raster.to_text())
    nx, ny = args.res
    print(f"stable cells: {raster.stable_count} of {nx * ny}")
    return EXIT_OK


def _config(args, name: str) -> ex.ExperimentConfig:
    overrides = {"name": name, "out_dir": getattr(args, "out_dir", None)}
    if args.config:
        return ex.load_config(args.config, **overrides)
    return ex.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_run(args) -> int:
    cfg = _config(args, "run")
    os.makedirs(cfg.out_dir, exist_ok=True)
    rc = ex.build_run_config(cfg)
    disc = get_discretization(cfg.n_modes)
    stride = cfg.snapshot_stride

    def snapshot(state):
        if stride and state.n % stride == 0:
            tag = f"{state.n:06d}"
            write_snapshot(os.path.join(cfg.out_dir, f"u1_{tag}.bin"), state.velocity.u1, state.t)
            write_snapshot(os.path.join(cfg.out_dir, f"u2_{tag}.bin"), state.velocity.u2, state.t)
            write_snapshot(os.path.join(cfg.out_dir, f"p_{tag}.bin"), state.pressure.p, state.t)

    result = run(rc, stride=cfg.record_stride, callback=snapshot)
    write_timeseries(os.path.join(cfg.out_dir, "timeseries.csv"), result)
    if result.state is not None and result.stable:
        u = result.state.velocity
        write_nodes_csv(
            os.path.join(cfg.out_dir, "final_nodes.csv"),
            disc,
            {"u1": u.u1, "u2": u.u2, "p": result.state.pressure.p, "vorticity": disc.vorticity(u)},
        )
    if result.stable:
        last = result.records[-1]
        msg = f"stable: step {last.step}, t = {last.time:.6g}, energy = {last.energy:.6e}"
        if last.err_u is not None:
            msg += f", err_u = {last.err_u:.3e}, err_p = {last.err_p:.3e}"
        print(msg)
        return EXIT_OK
    b = result.blowup
    print(f"blowup: step {b.step}, t = {b.time:.6g}, |u| = {b.norm:.3e}")
    return EXIT_FAIL


def cmd_converge(args) -> int:
    cfg = _config(args, "converge")
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = ex.run_convergence(cfg)
    report.write_csv(os.path.join(cfg.out_dir, "convergence.csv"))
    summary = report.summary()
    with open(os.path.join(cfg.out_dir, "convergence.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print("dt,err_u_L2,err_p_L2,div_norm,diverged")
    for r in report.rows:
        print(f"{r.dt:.6g},{r.err_u:.6e},{r.err_p:.6e},{r.div:.6e},{int(r.diverged)}")
    for key, slope in report.slopes.items():
        print(f"slope {key}: {slope:.4f}")
    for key, ok in report.checks.items():
        print(f"{key}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_example1(args) -> int:
    if args.config:
        cfg = ex.load_config(args.config, name="example1", out_dir=args.out_dir)
        cells, N, nu, out_dir = cfg.example1_cells, cfg.n_modes, cfg.nu, cfg.out_dir
    else:
        cells = tuple(ex.Example1Cell.parse(c) for c in args.cell) if args.cell else ex.DEFAULT_EXAMPLE1_CELLS
        N, nu, out_dir = args.n_modes, args.nu, args.out_dir or "out"
    outcomes = ex.run_example1(cells, N=N, nu=nu, out_dir=out_dir)
    with open(os.path.join(out_dir, "verdicts.csv"), "w") as fh:
        fh.write("label,k,beta,dt,t_end,expect,verdict,initial_energy,max_energy,final_energy,pass\n")
        for o in outcomes:
            c = o.cell
            fh.write(
                f"{c.label},{c.k},{c.beta},{c.dt!r},{c.t_end!r},{c.expect},\"{o.verdict}\","
                f"{o.initial_energy!r},{o.max_energy!r},{o.final_energy!r},{int(o.passed)}\n"
            )
    for o in outcomes:
        print(f"{o.cell.label}: expect {o.cell.expect}, got {o.verdict} -> {'PASS' if o.passed else 'FAIL'}")
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_FAIL


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cssplit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scheme_args(sp, beta_default=None):
        sp.add_argument("--k", type=int, required=True, help="order")
        sp.add_argument("--beta", type=_fraction, required=beta_default is None, default=beta_default, help="shift, e.g. 3 or 29/10")

    sp = sub.add_parser("coeffs", help="exact stencil coefficients")
    scheme_args(sp)
    sp.add_argument("--format", choices=("csv", "pretty"), default="pretty")
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("certify", help="multiplier certificates")
    scheme_args(sp)
    sp.add_argument("--eta", type=_fraction, default=Fraction(71, 100))
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("region", help="linear stability raster")
    scheme_args(sp)
    sp.add_argument("--window", type=_floats(4), default=DEFAULT_WINDOW, help="re_min,re_max,im_min,im_max")
    sp.add_argument("--res", type=_ints(2), default=(256, 256), help="NX,NY")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out", help="CSV output (re,im,stable)")
    sp.add_argument("--pgm", help="binary PGM output")
    sp.add_argument("--text", action="store_true", help="print a plain-text raster")
    sp.set_defaults(func=cmd_region)

    for name, func, help_ in (
        ("run", cmd_run, "single time-stepping run"),
        ("converge", cmd_converge, "dt-ladder convergence study"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out-dir")
        sp.set_defaults(func=func)

    sp = sub.add_parser("example1", help="stability dichotomy on the vortex initial data")
    sp.add_argument("--config")
    sp.add_argument("--out-dir")
    sp.add_argument("--cell", action="append", help="k:beta:dt:t_end:expect[:mode]; repeatable")
    sp.add_argument("--n-modes", type=int, default=64)
    sp.add_argument("--nu", type=float, default=0.005)
    sp.set_defaults(func=cmd_example1)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
