"""Command line interface: ``ghsdensity <subcommand> ...``.

Exit status 0 when every enabled check passed, 1 when a check failed (the
report is still written) and 2 for input or configuration errors (nothing is
written). Every JSON report embeds its effective configuration and the
sha256 of its inputs; outputs are written atomically.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import artifacts as art
from .errors import ArgumentError, ConfigurationError, GhsError, InputError

log = logging.getLogger("ghsdensity")

GHS_WHAT = ("gh", "bs", "doubling", "poincare")
DEFAULT_FUNCTIONS = "coord-x,coord-y,dist"
# the remaining approx checks (monotone error, shrinking E/F mass) are observations
ASSERTED_APPROX_CHECKS = ("triangle", "grad_inf_finite", "sup_norm")


# -- argument parsing ------------------------------------------------------------------


def _positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0 or not np.isfinite(x):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return x


def _nonneg_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return x


def _add_domain_args(p):
    p.add_argument("--shape", choices=("square", "disk", "slit-disk", "comb"))
    p.add_argument("--h", type=_positive_float, help="mesh size")
    p.add_argument("--side", type=_positive_float, default=1.0, help="square side")
    p.add_argument("--radius", type=_positive_float, default=1.0, help="disk radius")
    p.add_argument("--slit-depth", type=float, default=0.9)
    p.add_argument("--slit-width", type=float, default=0.0)
    p.add_argument("--teeth", type=_nonneg_int, default=3)
    p.add_argument("--tooth-width", type=_positive_float, default=0.15)
    p.add_argument("--tooth-height", type=float, default=0.65)
    p.add_argument("--corridor-width", type=_positive_float, default=0.35)


def _add_sampling_args(p):
    p.add_argument("--samples", type=_nonneg_int, default=200, help="number of sampled pairs/balls")
    p.add_argument("--seed", type=int, default=7)


def _add_decomp_args(p):
    p.add_argument("--C", type=float, default=None,
                   help="GHS constant; default: estimated (or read from --ghs)")
    p.add_argument("--ghs", default=None, help="check report supplying C")
    p.add_argument("--recomponent", choices=("after-each-peel", "at-end"), default="after-each-peel")
    p.add_argument("--b0-policy", choices=("relax", "strict"), default="relax")
    p.add_argument("--order", default=None, help="peel order: ascending, descending or ids a,b,...")
    p.add_argument("--overlap-cap", type=_nonneg_int, default=64)


def build_parser():
    parser = argparse.ArgumentParser(prog="ghsdensity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", default=None, help="JSON file of option values (flag names as keys)")
        subs[name] = p
        return p

    p = add("gen", "generate a grid domain as a metric measure graph")
    _add_domain_args(p)
    p.add_argument("--out", default=None, help="output file (default stdout)")

    p = add("cover", "build and verify the Whitney-type cover")
    p.add_argument("domain", nargs="?")
    p.add_argument("--overlap-cap", type=_nonneg_int, default=100)
    p.add_argument("--out", default=None)

    p = add("chain", "chain of Whitney balls joining two balls")
    p.add_argument("cover", nargs="?")
    p.add_argument("--ball-a", type=_nonneg_int, default=None)
    p.add_argument("--ball-b", type=_nonneg_int, default=None)
    p.add_argument("--c", type=_positive_float, default=4.0, help="hypothesis constant")
    p.add_argument("--cap", type=_nonneg_int, default=200, help="maximal chain length")
    p.add_argument("--out", default=None)

    p = add("qh", "quasihyperbolic distance and geodesic between two vertices")
    p.add_argument("domain", nargs="?")
    p.add_argument("--from", dest="source", type=_nonneg_int, default=None)
    p.add_argument("--to", dest="target", type=_nonneg_int, default=None)
    p.add_argument("--out", default=None)

    p = add("gromov", "sampled Gromov delta of the quasihyperbolic metric")
    p.add_argument("domain", nargs="?")
    _add_sampling_args(p)
    p.add_argument("--out", default=None)

    p = add("check", "estimate the hypothesis constants")
    p.add_argument("domain", nargs="?")
    p.add_argument("--what", default="gh,bs,doubling,poincare")
    _add_sampling_args(p)
    p.add_argument("--p", type=_positive_float, default=2.0)
    p.add_argument("--functions", default=DEFAULT_FUNCTIONS, help="Poincare test functions")
    p.add_argument("--exhaustive", action="store_true", help="all pairs (small graphs only)")
    p.add_argument("--out", default=None)

    p = add("decompose", "scale-m decomposition of the domain")
    p.add_argument("cover", nargs="?")
    p.add_argument("--m", type=int, default=None)
    _add_decomp_args(p)
    _add_sampling_args(p)
    p.add_argument("--out", default=None)

    p = add("pou", "partition of unity for a decomposition")
    p.add_argument("decomp", nargs="?")
    p.add_argument("--out", default=None)

    p = add("approx", "density experiment: approximants over a range of scales")
    p.add_argument("domain", nargs="?")
    p.add_argument("--v", default="dist-alpha:0.75", help="target function name or JSON file")
    p.add_argument("--p", type=_positive_float, default=2.0)
    p.add_argument("--m", default="4:7", help="scale range lo:hi")
    p.add_argument("--N0", type=_nonneg_int, default=5, help="chain depth for D_m'")
    _add_decomp_args(p)
    _add_sampling_args(p)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)

    p = add("pipeline", "run every stage and write all artifacts to a directory")
    p.add_argument("domain", nargs="?", help="existing domain file (else generated from flags)")
    _add_domain_args(p)
    p.add_argument("--m", default="4:7", help="scale range lo:hi")
    p.add_argument("--v", default="dist-alpha:0.75")
    p.add_argument("--p", type=_positive_float, default=2.0)
    p.add_argument("--N0", type=_nonneg_int, default=5)
    _add_decomp_args(p)
    _add_sampling_args(p)
    p.add_argument("--outdir", default=None)
    return parser, subs


def _apply_config_file(parser, subs, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        raise ConfigurationError("no subcommand given")
    if getattr(args, "config", None):
        text = art.read_text(args.config)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: malformed JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{args.config}: expected a JSON object")
        sp = subs[args.command]
        dests = {a.dest for a in sp._actions} - {"help", "config"}
        values = {}
        for key, val in doc.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest == "from":
                dest = "source"
            elif dest == "to":
                dest = "target"
            if dest not in dests:
                raise ConfigurationError(f"{args.config}: unknown key {key!r} for {args.command}")
            # strings go through the flag's type converter, like command-line values
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                val = str(val)
            values[dest] = val
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _config_dict(args):
    """Effective options; output locations are left out so artifacts do not depend on them."""
    skip = ("verbose", "config", "out", "outdir", "csv")
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            flag = {"source": "--from", "target": "--to"}.get(n, n)
            raise ConfigurationError(f"{args.command}: missing required argument {flag}")


# -- loading helpers --------------------------------------------------------------------


def _load_domain(path):
    from .mmgraph import graph_from_json

    text = art.read_text(path)
    return graph_from_json(text), text


def _load_cover(path):
    from .whitney import WhitneyCover

    doc, text = art.load_report(path, "cover")
    dpath, dtext = art.resolve_input(doc, "domain", path)
    from .mmgraph import graph_from_json

    g = graph_from_json(dtext)
    try:
        cover = WhitneyCover.from_dict(g, doc["cover"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: bad cover artifact ({exc})") from None
    return cover, doc, text


def _emit(text, out):
    if out:
        art.write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _domain_spec(args):
    from .domains import DomainSpec

    _require(args, "shape", "h")
    return DomainSpec(args.shape, args.h, side=args.side, radius=args.radius,
                      slit_depth=args.slit_depth, slit_width=args.slit_width, teeth=args.teeth,
                      tooth_width=args.tooth_width, tooth_height=args.tooth_height,
                      corridor_width=args.corridor_width)


def _parse_order(text):
    if text is None or text in ("ascending", "descending"):
        return text
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise ArgumentError(f"bad peel order {text!r}") from None


def _resolve_C(args, g):
    """GHS constant: explicit ``--C``, else a ``--ghs`` report, else a fresh estimate."""
    from .ghs import ghs_report, round_up_half

    if args.C is not None:
        if not args.C >= 1:
            raise ArgumentError("--C must be at least 1")
        return float(args.C), {"source": "flag"}
    if args.ghs:
        doc, text = art.load_report(args.ghs, "check")
        try:
            C = float(doc["C"])
        except (KeyError, TypeError, ValueError):
            raise ConfigurationError(f"{args.ghs} has no GHS constant") from None
        return C, {"source": "report", **art.input_ref(args.ghs, text)}
    rep = ghs_report(g, args.samples, args.seed)
    return rep.C, {"source": "estimate", "C_GH": rep.C_GH, "C_BS": rep.C_BS,
                   "samples": args.samples, "seed": args.seed, "rounded": round_up_half(rep.C)}


def _decomp_config(args, m, C):
    from .decomp import DecompositionConfig

    return DecompositionConfig(m, C=C, b0_policy=args.b0_policy, recomponent=args.recomponent,
                               order=_parse_order(args.order), overlap_cap=args.overlap_cap)


def _target_function(g, spec):
    from .sobolev import named_function

    if os.path.exists(spec):
        text = art.read_text(spec)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{spec}: malformed JSON: {exc.msg}") from None
        vals = doc.get("values") if isinstance(doc, dict) else doc
        try:
            v = np.asarray(vals, dtype=np.float64)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{spec}: expected a list of numbers") from None
        if v.shape != (g.n,) or not np.isfinite(v).all():
            raise ConfigurationError(f"{spec}: expected {g.n} finite values")
        return v, art.input_ref(spec, text)
    return named_function(g, spec), None


# -- subcommands ------------------------------------------------------------------------


def cmd_gen(args):
    from .domains import generate

    g = generate(_domain_spec(args))
    _emit(g.to_json(), args.out)
    return 0


def _cover_doc(g, domain_ref, config, overlap_cap):
    from .whitney import build_cover, verify_cover

    cover = build_cover(g)
    report = verify_cover(cover, overlap_cap)
    doc = art.envelope("cover", config, {"domain": domain_ref},
                       {"report": report, "cover": cover.to_dict()})
    return cover, doc, report["pass"]


def cmd_cover(args):
    _require(args, "domain")
    g, text = _load_domain(args.domain)
    _, doc, ok = _cover_doc(g, art.input_ref(args.domain, text), _config_dict(args), args.overlap_cap)
    _emit(art.dumps(doc), args.out)
    return 0 if ok else 1


def cmd_chain(args):
    from .whitney import build_chain, chain_qh_bound

    _require(args, "cover", "ball_a", "ball_b")
    cover, _, text = _load_cover(args.cover)
    for b in (args.ball_a, args.ball_b):
        if b >= len(cover):
            raise ArgumentError(f"ball {b} does not exist (cover has {len(cover)} balls)")
    chain = build_chain(cover, args.ball_a, args.ball_b, c=args.c, cap=args.cap)
    doc = art.envelope("chain", _config_dict(args), {"cover": art.input_ref(args.cover, text)},
                       {"chain": chain.as_dict(), "qh_bound": chain_qh_bound(cover, chain)})
    _emit(art.dumps(doc), args.out)
    return 0


def cmd_qh(args):
    from .qhyp import qh_geodesic

    _require(args, "domain", "source", "target")
    g, text = _load_domain(args.domain)
    for v in (args.source, args.target):
        if v >= g.n:
            raise ArgumentError(f"vertex {v} does not exist")
        if g.boundary[v]:
            raise ArgumentError(f"vertex {v} is a boundary vertex")
    dist, path = qh_geodesic(g, args.source, args.target)
    doc = art.envelope("qh", _config_dict(args), {"domain": art.input_ref(args.domain, text)},
                       {"distance": dist, "path": [int(v) for v in path]})
    _emit(art.dumps(doc), args.out)
    return 0


def cmd_gromov(args):
    from .qhyp import gromov_delta

    _require(args, "domain")
    g, text = _load_domain(args.domain)
    rep = gromov_delta(g, args.samples, args.seed)
    doc = art.envelope("gromov", _config_dict(args), {"domain": art.input_ref(args.domain, text)},
                       {"report": rep.as_dict()})
    _emit(art.dumps(doc), args.out)
    return 0


def _check_body(g, args):
    from .ghs import doubling_constant, ghs_report, poincare_constant
    from .sobolev import discrete_gradient, named_function

    what = [w.strip() for w in args.what.split(",") if w.strip()]
    for w in what:
        if w not in GHS_WHAT:
            raise ArgumentError(f"unknown check {w!r}; expected some of {','.join(GHS_WHAT)}")
    body, ok = {}, True
    if "gh" in what or "bs" in what:
        rep = ghs_report(g, args.samples, args.seed, exhaustive=args.exhaustive)
        body["ghs"] = rep.as_dict()
        body["C"] = rep.C
        ok &= bool(rep.C_GH >= 1 - 1e-9 and np.isfinite(rep.C_BS))
    if "doubling" in what:
        body["doubling"] = doubling_constant(g, args.samples, args.seed).as_dict()
    if "poincare" in what:
        funcs = {}
        for name in args.functions.split(","):
            u = named_function(g, name.strip())
            funcs[name.strip()] = (u, discrete_gradient(g, u))
        rep = poincare_constant(g, funcs, args.p, args.samples, args.seed)
        body["poincare"] = rep.as_dict()
        ok &= not rep.violations
    body["pass"] = bool(ok)
    return body, ok


def cmd_check(args):
    _require(args, "domain")
    g, text = _load_domain(args.domain)
    body, ok = _check_body(g, args)
    doc = art.envelope("check", _config_dict(args), {"domain": art.input_ref(args.domain, text)}, body)
    _emit(art.dumps(doc), args.out)
    return 0 if ok else 1


def _decomp_doc(cover, m, C, c_info, args, inputs):
    from . import decomp as dm
    from .errors import DecompositionError

    cfg = _decomp_config(args, m, C)
    try:
        dec = dm.decompose(cover, cfg)
    except DecompositionError as exc:
        body = {"pass": False, "error": str(exc), "witness": exc.witness, "C_info": c_info}
        return None, art.envelope("decomposition", cfg.as_dict(), inputs, body), False
    rep = dm.full_report(dec)
    body = {"decomposition": dm.to_dict(dec), "report": rep, "C_info": c_info, "pass": rep["pass"]}
    return dec, art.envelope("decomposition", cfg.as_dict(), inputs, body), rep["pass"]


def cmd_decompose(args):
    _require(args, "cover", "m")
    cover, _, text = _load_cover(args.cover)
    C, c_info = _resolve_C(args, cover.g)
    _, doc, ok = _decomp_doc(cover, args.m, C, c_info, args, {"cover": art.input_ref(args.cover, text)})
    _emit(art.dumps(doc), args.out)
    return 0 if ok else 1


def _pou_doc(dec, inputs):
    from .pou import build_pou, verify_pou

    pou = build_pou(dec)
    rep = verify_pou(pou, dec)
    doc = art.envelope("pou", dec.config.as_dict(), inputs,
                       {"report": rep, "functions": pou.to_dict(), "pass": rep["pass"]})
    return pou, doc, rep["pass"]


def cmd_pou(args):
    from . import decomp as dm
    from .decomp import DecompositionConfig

    _require(args, "decomp")
    ddoc, dtext = art.load_report(args.decomp, "decomposition")
    if "decomposition" not in ddoc:
        raise ConfigurationError(f"{args.decomp} records a failed decomposition")
    cpath, _ = art.resolve_input(ddoc, "cover", args.decomp)
    cover, _, _ = _load_cover(cpath)
    try:
        cfg = DecompositionConfig(**ddoc["config"])
        dec = dm.from_dict(cover, ddoc["decomposition"], cfg)
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{args.decomp}: bad decomposition artifact ({exc})") from None
    _, doc, ok = _pou_doc(dec, {"decomposition": art.input_ref(args.decomp, dtext)})
    _emit(art.dumps(doc), args.out)
    return 0 if ok else 1


def _approx_report(cover, args, C, inputs, c_info):
    from .approx import convergence_experiment, parse_m_range
    from .decomp import check_mesh_window

    ms = parse_m_range(args.m)
    for m in ms:
        check_mesh_window(cover.g, m)
    v, vref = _target_function(cover.g, args.v)
    if vref is not None:
        inputs = {**inputs, "v": vref}
    rep = convergence_experiment(cover, v, args.p, ms, C, v_name=args.v, N0=args.N0)
    ok = all(rep.checks[k] for k in ASSERTED_APPROX_CHECKS)
    doc = art.envelope("approx", _config_dict(args), inputs,
                       {"report": rep.as_dict(), "C": C, "C_info": c_info, "pass": ok})
    return rep, doc, ok


def cmd_approx(args):
    from .whitney import build_cover

    _require(args, "domain")
    g, text = _load_domain(args.domain)
    cover = build_cover(g)
    C, c_info = _resolve_C(args, g)
    rep, doc, ok = _approx_report(cover, args, C, {"domain": art.input_ref(args.domain, text)}, c_info)
    csv_text = rep.to_csv()
    _emit(art.dumps(doc), args.out)
    if args.csv:
        art.write_atomic(args.csv, csv_text)
    return 0 if ok else 1


def cmd_pipeline(args):
    """All stages in memory first; files are written only once everything succeeded."""
    from .approx import parse_m_range
    from .decomp import check_mesh_window, core_component
    from .domains import generate
    from .mmgraph import graph_from_json

    _require(args, "outdir")
    config = _config_dict(args)
    if args.domain:
        g, dtext = _load_domain(args.domain)
    else:
        g = generate(_domain_spec(args))
        dtext = g.to_json()
        g = graph_from_json(dtext)
    ms = parse_m_range(args.m)
    for m in ms:
        check_mesh_window(g, m)
    files = {"domain.json": dtext}
    dref = {"path": "domain.json", "sha256": art.sha256_text(dtext)}

    log.info("cover")
    cover, cdoc, ok_cover = _cover_doc(g, dref, config, 100)
    for m in ms:
        core_component(cover, m)
    ctext = art.dumps(cdoc)
    files["cover.json"] = ctext
    cref = {"path": "cover.json", "sha256": art.sha256_text(ctext)}

    check_args = argparse.Namespace(what="gh,bs,doubling,poincare", samples=args.samples,
                                    seed=args.seed, p=args.p, functions=DEFAULT_FUNCTIONS,
                                    exhaustive=False)
    log.info("hypothesis checks")
    body, ok_check = _check_body(g, check_args)
    files["check.json"] = art.dumps(art.envelope("check", config, {"domain": dref}, body))
    kref = {"path": "check.json", "sha256": art.sha256_text(files["check.json"])}
    if args.C is not None:
        C, c_info = float(args.C), {"source": "flag"}
    else:
        C, c_info = float(body["C"]), {"source": "report", **kref}

    stages = {"cover": ok_cover, "check": ok_check}
    for m in ms:
        log.info("decomposition m=%d", m)
        dec, ddoc, ok = _decomp_doc(cover, m, C, c_info, args, {"cover": cref})
        name = f"decomp_m{m}.json"
        files[name] = art.dumps(ddoc)
        stages[f"decompose:{m}"] = ok
        if dec is None:
            continue
        _, pdoc, pok = _pou_doc(dec, {"decomposition": {"path": name,
                                                        "sha256": art.sha256_text(files[name])}})
        files[f"pou_m{m}.json"] = art.dumps(pdoc)
        stages[f"pou:{m}"] = pok
    rep, adoc, ok_approx = _approx_report(cover, args, C, {"domain": dref}, c_info)
    files["approx.json"] = art.dumps(adoc)
    files["approx.csv"] = rep.to_csv()
    stages["approx"] = ok_approx
    ok = all(stages.values())
    summary = art.envelope("pipeline", config,
                           {name: {"path": name, "sha256": art.sha256_text(t)}
                            for name, t in sorted(files.items())},
                           {"stages": stages, "C": C, "approx_rows": [r.as_dict() for r in rep.rows],
                            "approx_checks": rep.checks, "pass": ok})
    for name, text in files.items():
        art.write_atomic(os.path.join(args.outdir, name), text)
    art.write_atomic(os.path.join(args.outdir, "report.json"), art.dumps(summary))
    return 0 if ok else 1


COMMANDS = {"gen": cmd_gen, "cover": cmd_cover, "chain": cmd_chain, "qh": cmd_qh,
            "gromov": cmd_gromov, "check": cmd_check, "decompose": cmd_decompose,
            "pou": cmd_pou, "approx": cmd_approx, "pipeline": cmd_pipeline}


def main(argv=None):
    parser, subs = build_parser()
    try:
        args = _apply_config_file(parser, subs, argv)
    except InputError as exc:
        print(f"ghsdensity: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"ghsdensity: error: {exc}", file=sys.stderr)
        return 2
    except GhsError as exc:
        print(f"ghsdensity: check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
