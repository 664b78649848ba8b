"""Command-line front end: ``bernclass <command> ...``.

Every numeric artifact is deterministic JSON (or CSV) that embeds the
command configuration and the horizon used.  Exit codes: 0 on success,
1 on input errors, 2 when ``--strict`` is given and a verdict is
Inconclusive.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from ._numbers import dump_number
from .classes import Status, first_class_verdict, markushevich_split, second_class_verdict
from .error_sequences import (ErrorSeq, beurling_witness, from_rate, realize_bernstein,
                              separation_witness)
from .geometry import (box_dimension_profile, coarea_check, level_set_measure, thm215_cover)
from .minimax import (Basis, LacunaryTruncation, SampledFn, absolute_value,
                      bernstein_nondiff_circle, bernstein_nondiff_sampled, best_uniform_approx,
                      chebyshev_T, en_profile, markov_constant)
from .rates import (Gauge, Role, default_horizon, double_log_gauge, equivalent,
                    gauge_integrability, log_gauge, parse_rate, power_gauge, rate_from_dict,
                    separating_profile, sigma, xi_stretch)
from .wiener import WienerElement, evaluate, wiener_En, wiener_En_profile, wiener_norm


class UsageError(Exception):
    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# input helpers


def _read_json(path: str, flag: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(flag, f"cannot read {path}: {exc}") from exc


def _rate(text: str, role: Role, flag: str):
    """A rate from the mini-grammar, or from a JSON file carrying its certificate."""
    if text.endswith(".json"):
        d = _read_json(text, flag)
        try:
            rate = rate_from_dict(d.get("rate", d))
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(flag, f"bad rate file: {exc}") from exc
        return rate if rate.role is role else rate.with_role(role)
    try:
        return parse_rate(text, role)
    except ValueError as exc:
        raise UsageError(flag, str(exc)) from exc


def _errors(text: str, flag: str) -> ErrorSeq:
    if text.endswith(".csv"):
        try:
            return ErrorSeq.from_csv(Path(text).read_text())
        except (OSError, ValueError, IndexError) as exc:
            raise UsageError(flag, f"cannot read {text}: {exc}") from exc
    if text.endswith(".json"):
        d = _read_json(text, flag)
        try:
            return ErrorSeq.from_dict(d.get("errors", d))
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(flag, f"bad error sequence: {exc}") from exc
    return from_rate(_rate(text, Role.SCALE, flag))


def _element(path: str, flag: str) -> WienerElement:
    d = _read_json(path, flag)
    try:
        return WienerElement.from_dict(d.get("element", d))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(flag, f"bad Wiener element: {exc}") from exc


def _gauge(text: str, flag: str) -> Gauge:
    kind, _, params = text.partition(":")
    try:
        vals = [float(v) for v in params.split(",")] if params else []
        if kind == "power":
            return power_gauge(*(vals or [1.0]))
        if kind == "log":
            return log_gauge(*(vals or [1.0]))
        if kind == "double-log":
            return double_log_gauge(*(vals or [1.0, 1.0]))
    except (TypeError, ValueError) as exc:
        raise UsageError(flag, str(exc)) from exc
    raise UsageError(flag, f"unknown gauge {text!r}; use power:A, log:K or double-log:S,EPS")


def _sampled(text: str, samples: int, flag: str) -> SampledFn:
    if text == "abs":
        return absolute_value(samples)
    if text.startswith("cheb:"):
        try:
            return chebyshev_T(int(text[5:]), samples)
        except ValueError as exc:
            raise UsageError(flag, str(exc)) from exc
    if text == "bernstein-nondiff":
        return bernstein_nondiff_sampled(samples)
    if text == "bernstein-nondiff-circle":
        return bernstein_nondiff_circle(samples)
    if text.endswith(".csv"):
        try:
            return SampledFn.from_csv(Path(text).read_text(), name=Path(text).stem)
        except (OSError, ValueError, IndexError) as exc:
            raise UsageError(flag, f"cannot read {text}: {exc}") from exc
    raise UsageError(flag, f"unknown function {text!r}; use abs, cheb:M, bernstein-nondiff, "
                           "bernstein-nondiff-circle or a CSV file")


def _int_expr(text: str) -> int:
    """Integers like 4096 or 2^12."""
    if "^" in text:
        base, exp = text.split("^", 1)
        return int(base) ** int(exp)
    return int(text)


def _scales(text: str, flag: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(flag, f"expected LO..HI or a comma list, got {text!r}") from exc


def _subset(text: str | None, flag: str) -> tuple[float, float] | None:
    if text is None:
        return None
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(flag, f"expected A,B, got {text!r}") from exc
    return a, b


# ---------------------------------------------------------------------------
# output helpers


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "plot", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _jsonable(x: Any):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit(args: argparse.Namespace, payload: dict, table: list[dict] | None = None) -> None:
    doc = {"config": _config(args), "horizon": args.horizon, "version": __version__}
    doc.update(payload)
    if getattr(args, "format", "json") == "csv" and table:
        cols = list(table[0])
        head = [f"# config: {json.dumps(_jsonable(doc['config']), sort_keys=True)}",
                f"# horizon: {args.horizon}", f"# version: {__version__}"]
        lines = head + [",".join(cols)] + [",".join(str(_jsonable(r[c])) for c in cols) for r in table]
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n", args.out)


def _svg(path: str, xs, ys, xlabel: str, ylabel: str, title: str, loglog: bool = True) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "bernstein-classes"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, ys, "o-", ms=3)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# commands


def cmd_rates(args) -> int:
    if args.action == "sigma":
        kappa = _rate(args.kappa, Role.WEIGHT, "--kappa")
        s = sigma(kappa, args.horizon)
        vals = [{"n": n, "sigma": s(n)} for n in range(args.n, args.n + args.count)]
        _emit(args, {"sigma": vals, "closed_tail": kappa.has_closed_tail}, vals)
    elif args.action == "equiv":
        a, b = _rate(args.phi, Role.SCALE, "--phi"), _rate(args.psi, Role.SCALE, "--psi")
        if args.sigma:
            a = sigma(a.with_role(Role.WEIGHT), args.horizon)
        c = equivalent(a, b, args.horizon)
        _emit(args, {"relation": c.relation.value, "certified": c.certified,
                     "ratio_min": c.ratio_min, "ratio_max": c.ratio_max})
    elif args.action == "xi":
        phi = _rate(args.phi, Role.SCALE, "--phi")
        xi = xi_stretch(phi, args.n_max)
        rows = [{"n": xi.n_min + j, "xi": x, "product": p}
                for j, (x, p) in enumerate(zip(xi.xi, xi.products))]
        _emit(args, {"threshold": xi.threshold, "holds": xi.holds,
                     "nondecreasing": xi.nondecreasing(),
                     "product_min": min(xi.products), "product_max": max(xi.products)}, rows)
    elif args.action == "gauge":
        v = gauge_integrability(_gauge(args.gauge, "--gauge"), args.s)
        _emit(args, v.to_dict())
    elif args.action == "profile":
        prof = separating_profile(_rate(args.kappa, Role.WEIGHT, "--kappa"), args.blocks,
                                  args.horizon)
        rows = [{"block": b.index, "start": b.start, "end": b.end, "alpha": b.alpha,
                 "running_sum": b.running_sum, "h_end": b.h_end} for b in prof.blocks]
        _emit(args, {"blocks": rows, "checks": prof.checks, "extent": prof.extent}, rows)
    return 0


def cmd_construct(args) -> int:
    if args.kind == "bernstein":
        if args.target is None:
            raise UsageError("--target", "required for bernstein")
        f = realize_bernstein(_errors(args.target, "--target"))
        _emit(args, {"element": f.to_dict()})
    elif args.kind == "separation":
        if args.phi is None or args.phi_prime is None:
            raise UsageError("--phi", "separation needs --phi and --phi-prime")
        E = separation_witness(_rate(args.phi, Role.SCALE, "--phi"),
                               _rate(args.phi_prime, Role.SCALE, "--phi-prime"),
                               args.base, args.horizon)
        _emit(args, {"errors": E.to_dict()})
    else:
        if args.kappa is None:
            raise UsageError("--kappa", "required for beurling")
        E = beurling_witness(_rate(args.kappa, Role.WEIGHT, "--kappa"), args.blocks, args.horizon)
        _emit(args, {"errors": E.to_dict()})
    return 0


def cmd_classify(args) -> int:
    if args.scale is None and args.weight is None:
        raise UsageError("--scale", "give --scale and/or --weight")
    E = _errors(args.errors, "--errors")
    out, inconclusive = {}, False
    if args.scale is not None:
        v = second_class_verdict(E, _rate(args.scale, Role.SCALE, "--scale"), rho=args.rho,
                                 horizon=args.horizon)
        out["second"] = v.to_dict()
        inconclusive |= v.status is Status.INCONCLUSIVE
    if args.weight is not None:
        v = first_class_verdict(E, _rate(args.weight, Role.WEIGHT, "--weight"),
                                horizon=args.horizon)
        out["first"] = v.to_dict()
        inconclusive |= v.status is Status.INCONCLUSIVE
    _emit(args, out)
    return 2 if args.strict and inconclusive else 0


def cmd_split(args) -> int:
    f = _element(args.input, "--in")
    res = markushevich_split(f, _rate(args.scale, Role.SCALE, "--scale"), args.rho,
                             args.boundaries, args.horizon)
    if args.out_prefix:
        for j, part in ((1, res.f1), (2, res.f2)):
            Path(f"{args.out_prefix}{j}.json").write_text(
                json.dumps({"config": _config(args), "horizon": args.horizon,
                            "element": part.to_dict()}, sort_keys=True, indent=2) + "\n")
    _emit(args, {"boundaries": list(res.boundaries), "identity": res.identity_ok,
                 "witnesses1": res.witnesses1.to_dict(), "witnesses2": res.witnesses2.to_dict(),
                 "horizon_exhausted": res.horizon_exhausted})
    return 0


def cmd_wiener(args) -> int:
    f = _element(args.input, "--in")
    if args.action == "en":
        v = wiener_En(f, args.i)
        _emit(args, {"i": args.i, "E": dump_number(v), "value": float(v)})
    elif args.action == "norm":
        v = wiener_norm(f)
        _emit(args, {"norm": dump_number(v), "value": float(v)})
    elif args.action == "profile":
        vals = wiener_En_profile(f, args.n_max)
        rows = [{"n": n, "E_n": dump_number(v)} for n, v in enumerate(vals, start=1)]
        _emit(args, {"profile": rows}, rows)
    else:
        ev = evaluate(f, args.t, args.cutoff)
        _emit(args, {"t": args.t, "value": [complex(v).real for v in ev.value],
                     "imag": [complex(v).imag for v in ev.value],
                     "remainder_bound": float(ev.remainder_bound)})
    return 0


def cmd_minimax(args) -> int:
    basis = Basis(args.basis)
    if args.action == "markov":
        r = markov_constant(basis, args.n, _subset(args.subset, "--subset"))
        _emit(args, {"value": r.value, "lower": r.lower, "upper": r.upper, "gap": r.gap,
                     "method": r.method, "at": r.at})
        return 0
    f = _sampled(args.fn, args.samples, "--fn")
    if args.action == "approx":
        a = best_uniform_approx(f, args.n, basis)
        _emit(args, {"error": a.error, "errors": list(a.errors), "method": a.method,
                     "tag": a.tag, "alternation": list(a.alternation),
                     "coefficients": a.coefficients.tolist(), "warnings": list(a.warnings)})
    else:
        E = en_profile(f, args.n_max, basis)
        rows = [{"n": n, "E_n": float(v)} for n, v in enumerate(E.prefix, start=1)]
        if args.plot:
            pos = [r for r in rows if r["E_n"] > 0]
            _svg(args.plot, [r["n"] for r in pos], [r["E_n"] for r in pos], "n", "E_n",
                 f"best approximation errors of {f.name or args.fn}")
        _emit(args, {"profile": rows}, rows)
    return 0


def cmd_graph(args) -> int:
    if args.action == "boxdim":
        f = _sampled(args.fn, args.samples, "--fn")
        b = box_dimension_profile(f, _scales(args.scales, "--scales"))
        rows = [{"exponent": j, "scale": 2.0**-j, "count": c} for j, c in zip(b.exponents, b.counts)]
        if args.plot:
            _svg(args.plot, [r["scale"] for r in rows], [r["count"] for r in rows],
                 "box side", "boxes", f"box counts, slope {b.slope:.3f}")
        _emit(args, b.to_dict(), rows)
    elif args.action == "cover":
        f = bernstein_nondiff_circle(args.samples)
        g = LacunaryTruncation.of_degree(args.n)
        tc = thm215_cover(f, g, args.n * g.coefficient_sum, g.deviation,
                          _gauge(args.gauge, "--gauge"), args.k)
        _emit(args, tc.to_dict())
    elif args.action == "level":
        f = _sampled(args.fn, args.samples, "--fn")
        c = float(np.median(f.scalar)) if args.c is None else args.c
        est = level_set_measure(f, c, _gauge(args.gauge, "--gauge"))
        _emit(args, {"level": c, "components": len(est.components), "pieces": est.pieces,
                     "psi_sum": est.psi_sum, "delta": est.delta})
    else:
        f = _sampled(args.fn, args.samples, "--fn")
        _emit(args, coarea_check(f, _gauge(args.gauge, "--gauge"), levels=args.levels).to_dict())
    return 0


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kappa = parse_rate("1/n^2", Role.WEIGHT)
    s = sigma(kappa, args.horizon)
    phi, phi_p = parse_rate("1/n"), parse_rate("n^-0.5")
    E = separation_witness(phi, phi_p, 4, args.horizon)
    v_member = second_class_verdict(E, phi_p, horizon=args.horizon)
    v_non = second_class_verdict(E, phi, horizon=args.horizon)
    markov = [{"n": n, "trig": markov_constant(Basis.TRIG, n).value,
               "chebyshev": markov_constant(Basis.CHEBYSHEV, n).value} for n in (2, 4, 8)]
    bd = box_dimension_profile(bernstein_nondiff_sampled(2**16), range(4, 11))
    summary = {
        "sigma_1_over_n2_at_1": s(1),
        "sigma_equivalent_to_1_over_n": equivalent(s, phi, args.horizon).relation.value,
        "separation": {"phi_prime": v_member.status.value, "phi": v_non.status.value},
        "markov": markov,
        "box_dimension": bd.to_dict(),
    }
    doc = {"config": _config(args), "horizon": args.horizon, "version": __version__}
    doc.update(summary)
    (out / "report.json").write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")
    _svg(str(out / "boxdim.svg"), [2.0**-j for j in bd.exponents], bd.counts, "box side",
         "boxes", f"box counts, slope {bd.slope:.3f}")
    sys.stdout.write(f"wrote {out / 'report.json'} and {out / 'boxdim.svg'}\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bernclass", description="Bernstein-class experiments")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--horizon", type=int, default=None,
                        help="largest index scanned (default: BERNSTEIN_HORIZON or 10^6)")
    common.add_argument("--out", help="write the artifact here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--seed", type=int, default=0,
                        help="recorded in the config; no command draws random numbers")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("rates", parents=[common], help="Sigma map, equivalence, xi, gauges")
    r.add_argument("action", choices=["sigma", "equiv", "xi", "gauge", "profile"])
    r.add_argument("--kappa", default="1/n^2")
    r.add_argument("--phi", default="1/n")
    r.add_argument("--psi", default="1/n")
    r.add_argument("--sigma", action="store_true", help="compare Sigma(phi) with psi")
    r.add_argument("--n", type=int, default=1)
    r.add_argument("--count", type=int, default=1)
    r.add_argument("--n-max", type=int, default=1000)
    r.add_argument("--gauge", default="power:1")
    r.add_argument("--s", type=float, default=1.0)
    r.add_argument("--blocks", type=int, default=3)
    r.set_defaults(func=cmd_rates)

    c = sub.add_parser("construct", parents=[common], help="build witnesses and realizations")
    c.add_argument("kind", choices=["bernstein", "separation", "beurling"])
    c.add_argument("--target")
    c.add_argument("--phi")
    c.add_argument("--phi-prime")
    c.add_argument("--kappa")
    c.add_argument("--base", type=int, default=4)
    c.add_argument("--blocks", type=int, default=3)
    c.set_defaults(func=cmd_construct)

    k = sub.add_parser("classify", parents=[common], help="class membership verdicts")
    k.add_argument("--errors", required=True, help="CSV/JSON error sequence or a rate expression")
    k.add_argument("--scale", help="scale function of the second class")
    k.add_argument("--weight", help="weight function of the first class")
    k.add_argument("--rho", type=float, default=0.5)
    k.add_argument("--strict", action="store_true", help="exit 2 on an Inconclusive verdict")
    k.set_defaults(func=cmd_classify)

    s = sub.add_parser("split", parents=[common], help="split an element into two class members")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--scale", default="1/n")
    s.add_argument("--rho", type=float, default=0.5)
    s.add_argument("--boundaries", type=int, default=24)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_split)

    w = sub.add_parser("wiener", parents=[common], help="Wiener-model queries")
    w.add_argument("action", choices=["en", "norm", "profile", "eval"])
    w.add_argument("--in", dest="input", required=True)
    w.add_argument("--i", type=int, default=1)
    w.add_argument("--n-max", type=int, default=20)
    w.add_argument("--t", type=float, default=0.0)
    w.add_argument("--cutoff", type=int, default=64)
    w.set_defaults(func=cmd_wiener)

    m = sub.add_parser("minimax", parents=[common], help="uniform approximation and Markov constants")
    m.add_argument("action", choices=["approx", "profile", "markov"])
    m.add_argument("--fn", default="abs")
    m.add_argument("--samples", type=_int_expr, default=4001)
    m.add_argument("--basis", choices=[b.value for b in Basis], default="chebyshev")
    m.add_argument("--n", type=int, default=4)
    m.add_argument("--n-max", type=int, default=16)
    m.add_argument("--subset", help="A,B: restrict the Markov constant to [A, B]")
    m.add_argument("--plot", help="SVG path for the error profile")
    m.set_defaults(func=cmd_minimax)

    g = sub.add_parser("graph", parents=[common], help="graph geometry experiments")
    g.add_argument("action", choices=["boxdim", "cover", "level", "coarea"])
    g.add_argument("--fn", default="bernstein-nondiff")
    g.add_argument("--samples", type=_int_expr, default=2**18)
    g.add_argument("--scales", default="4..12", help="dyadic exponents, e.g. 4..12")
    g.add_argument("--n", type=int, default=16)
    g.add_argument("--k", type=float, default=1.0)
    g.add_argument("--gauge", default="log:1")
    g.add_argument("--c", type=float)
    g.add_argument("--levels", type=int, default=256)
    g.add_argument("--plot", help="SVG path for the log-log plot")
    g.set_defaults(func=cmd_graph)

    rp = sub.add_parser("report", parents=[common], help="summary report with a plot")
    rp.add_argument("--out-dir", default="report")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.horizon is None:
        args.horizon = default_horizon()
    if args.horizon < 1:
        sys.stderr.write("bernclass: error: --horizon: must be >= 1\n")
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"bernclass: error: {exc}\n")
        return 1
    except (ValueError, OverflowError) as exc:
        sys.stderr.write(f"bernclass: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
