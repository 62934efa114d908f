"""Command-line experiment runner: ``isoslice <command> [options]``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for
malformed input (bad files, specs, ids or options).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import sampling
from .constants import CONSTANTS, resolve
from .io import MalformedInput, body_from_dict, body_to_json, dump_json, generate_body, load_json, quasi_corpus
from .logconcave import body_from_density, density_from_config, l_equivalence_check
from .report import Report, render_csv
from .sampling import isotropic_constant_body, isotropic_transform, volume

EXIT_OK, EXIT_FAIL, EXIT_MALFORMED = 0, 1, 2

CONFIG_KEYS = {"seed", "samples", "threads", "format", "out", "constants"}


def _load_body(source: str, seed: int):
    if os.path.exists(source):
        return body_from_dict(load_json(source), source)
    if ":" in source:
        return generate_body(source, seed)
    raise MalformedInput(f"{source}: no such file or generator spec")


def _load_quasi(source: str):
    from .quasi import QuasiBody

    if os.path.exists(source):
        d = load_json(source)
        if not isinstance(d, dict) or "pieces" not in d:
            raise MalformedInput(f"{source}: expected an object with 'pieces'")
        extra = set(d) - {"pieces", "C", "label"}
        if extra:
            raise MalformedInput(f"{source}: unknown keys {sorted(extra)}")
        pieces = [body_from_dict(p, f"{source}: pieces[{i}]") for i, p in enumerate(d["pieces"])]
        try:
            return QuasiBody(pieces, d.get("C"), str(d.get("label", os.path.basename(source))))
        except ValueError as exc:
            raise MalformedInput(f"{source}: {exc}") from None
    for n in (2, 3, 4):
        for Q in quasi_corpus(n):
            if Q.label == source:
                return Q
    raise MalformedInput(f"{source}: no such file or quasi-body name (e.g. cube+cross:3)")


def _load_subspace(source: str, n: int):
    from .sections import Subspace

    if source.startswith("random:"):
        parts = source.split(":")
        try:
            k, seed = int(parts[1]), int(parts[2])
        except (IndexError, ValueError):
            raise MalformedInput(f"invalid subspace spec {source!r} (random:k:seed)") from None
        if not 1 <= k <= n:
            raise MalformedInput(f"subspace dimension {k} out of range for n = {n}")
        return Subspace.random(n, k, seed)
    d = load_json(source)
    try:
        basis = d["basis"] if isinstance(d, dict) else d
        return Subspace.from_basis(basis)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"{source}: {exc}") from None


def _load_density(source: str):
    d = load_json(source)
    if not isinstance(d, dict):
        raise MalformedInput(f"{source}: expected an object")
    try:
        return density_from_config(d)
    except MalformedInput:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"{source}: {exc}") from None


# ---------------------------------------------------------------------------
# commands: each returns (payload for JSON, list of reports)

def cmd_verify(args, consts):
    from .verify import Corpus, UnknownId, run_verify

    ids = [i.strip() for i in args.ids.split(",") if i.strip()] if args.ids else None
    if args.corpus == "default":
        dims = tuple(int(x) for x in args.dims.split(",")) if args.dims else (2, 3, 4)
        corpus = Corpus.default(dims, tuple(n for n in dims if n <= 3) or (2,))
    else:
        data = load_json(args.corpus)
        items = data.get("bodies") if isinstance(data, dict) else data
        if not isinstance(items, list):
            raise MalformedInput(f"{args.corpus}: expected a list of bodies or {{\"bodies\": [...]}}")
        corpus = Corpus.from_bodies([body_from_dict(b, f"{args.corpus}: bodies[{i}]") for i, b in enumerate(items)])
    try:
        suite = run_verify(ids, corpus, args.seed, args.samples, consts)
    except UnknownId as exc:
        raise MalformedInput(str(exc)) from None
    return suite.to_dict(), suite.reports


def cmd_perturb(args, consts):
    from .pipeline import perturb_body

    K = _load_body(args.body, args.seed)
    res = perturb_body(K, consts["c_alpha"], args.samples or 100_000, args.seed)
    rep = res.to_report("thm-1.2", getattr(K, "label", None) or args.body, {"seed": args.seed})
    rep.check("finite distance", np.isfinite(res.d_G.value))
    rep.check("d_G <= factor * alpha", res.d_G.value <= consts["dG_over_alpha_max"] * res.alpha)
    lo, hi = consts["L_T_range"]
    rep.check("L_T in band", lo <= res.L_T.value <= hi)
    return rep.to_dict(), [rep]


def cmd_quasi_perturb(args, consts):
    from .quasi import quasi_perturb

    Q = _load_quasi(args.body)
    res = quasi_perturb(Q, consts["c3"], args.samples or 100_000, args.seed)
    rep = res.to_report("thm-1.4", Q.label, {"seed": args.seed})
    rep.check("finite distance", np.isfinite(res.d_G.value))
    rep.check("L_T below threshold", res.L_T.value <= consts["quasi_L_max"])
    return rep.to_dict(), [rep]


def cmd_project(args, consts):
    from .sections import marginal_moment_check, projection_perturb

    K = _load_body(args.body, args.seed)
    E = _load_subspace(args.subspace, K.dim)
    _, Kt = isotropic_transform(K, args.samples or 100_000, args.seed)
    try:
        res = projection_perturb(Kt, E)
    except ValueError as exc:
        raise MalformedInput(str(exc)) from None
    rep = marginal_moment_check(Kt, E, args.samples or 100_000, args.seed)
    rep.body = getattr(K, "label", None) or args.body
    rep.values.update(L_T=res.L_T, d_G=res.d_G, **res.extra)
    rep.check("projection d_G below threshold", res.d_G.value <= consts["projection_dG_max"])
    return rep.to_dict(), [rep]


def cmd_near_origin(args, consts):
    from .sections import NearOriginError, near_origin_perturb

    K = _load_body(args.body, args.seed)
    label = getattr(K, "label", None) or args.body
    try:
        _, rep = near_origin_perturb(K, args.gamma, args.beta, args.delta, consts["c_prime"],
                                     args.samples or 100_000, args.seed)
    except NearOriginError as exc:
        rep = Report("prop-5.3", label, {"gamma": args.gamma, "beta": args.beta, "delta": args.delta})
        rep.values["hypothesis"] = exc.kind
        rep.check(f"hypothesis ({exc.kind})", False, str(exc))
    rep.body = label
    return rep.to_dict(), [rep]


def cmd_lk(args, consts):
    K = _load_body(args.body, args.seed)
    n = args.samples or 100_000
    L = isotropic_constant_body(K, n, args.seed)
    rep = Report("lk", getattr(K, "label", None) or args.body, {"seed": args.seed, "n_samples": n})
    rep.values.update(L_K=L, volume=volume(K, n, args.seed), dim=K.dim)
    rep.check("finite isotropic constant", np.isfinite(L.value) and L.value > 0)
    return rep.to_dict(), [rep]


def cmd_kf(args, consts):
    f = _load_density(args.density)
    rep = l_equivalence_check(f, args.samples or 200_000, args.seed)
    rep.id = "kf"
    rep.body = f.name
    Kf = body_from_density(f)
    from .sampling import sphere_quadrature

    q = sphere_quadrature(f.dim)
    rep.values["radial_min"] = float(np.min(1 / Kf._gauge(q.points)))
    rep.values["radial_max"] = float(np.max(1 / Kf._gauge(q.points)))
    return rep.to_dict(), [rep]


def cmd_gen(args, consts):
    K = generate_body(args.spec, args.seed)
    return json.loads(body_to_json(K)), []


def cmd_render(args, consts):
    reports = []
    for path in args.reports:
        d = load_json(path)
        items = d["reports"] if isinstance(d, dict) and "reports" in d else (d if isinstance(d, list) else [d])
        for r in items:
            try:
                reports.append(Report.from_dict(r))
            except (ValueError, TypeError, KeyError) as exc:
                raise MalformedInput(f"{path}: {exc}") from None
    return None, reports


COMMANDS = {
    "verify": cmd_verify, "perturb": cmd_perturb, "quasi-perturb": cmd_quasi_perturb,
    "project": cmd_project, "near-origin": cmd_near_origin, "lk": cmd_lk, "kf": cmd_kf,
    "gen": cmd_gen, "render": cmd_render,
}
NEEDS_SEED = {"verify", "perturb", "quasi-perturb", "project", "near-origin", "lk", "kf"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="master seed (required for Monte Carlo commands)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    g.add_argument("--samples", type=int, default=None, help="Monte Carlo sample budget")
    g.add_argument("--out", default=None, help="output file (default: stdout)")
    g.add_argument("--format", choices=("json", "csv"), default=None, help="output format (default json)")
    g.add_argument("--config", default=None, help="JSON file with option defaults and constant overrides")
    g.add_argument("--c-alpha", dest="c_alpha", type=float, default=None)
    g.add_argument("--c-prime", dest="c_prime", type=float, default=None)
    g.add_argument("--c3", dest="c3", type=float, default=None)

    p = _Parser(prog="isoslice", description="Isomorphic slicing experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("verify", parents=[common], help="run verification checks")
    s.add_argument("--ids", default=None, help="comma-separated result ids (default: all)")
    s.add_argument("--corpus", default="default", help="'default' or a JSON file of bodies")
    s.add_argument("--dims", default=None, help="dimensions of the default corpus, e.g. 2,3")
    s = sub.add_parser("perturb", parents=[common], help="perturb a convex body")
    s.add_argument("--body", required=True, help="body JSON file or generator spec")
    s = sub.add_parser("quasi-perturb", parents=[common], help="perturb a quasi-convex body")
    s.add_argument("--body", required=True, help="quasi-body JSON file or corpus name")
    s = sub.add_parser("project", parents=[common], help="projection-marginal perturbation")
    s.add_argument("--body", required=True)
    s.add_argument("--subspace", required=True, help="JSON basis file or random:k:seed")
    s = sub.add_parser("near-origin", parents=[common], help="near-origin perturbation")
    s.add_argument("--body", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s = sub.add_parser("lk", parents=[common], help="isotropic constant of a body")
    s.add_argument("--body", required=True)
    s = sub.add_parser("kf", parents=[common], help="K_f of a density and L_f against L_Kf")
    s.add_argument("--density", required=True, help="density JSON file")
    s = sub.add_parser("gen", parents=[common], help="generate a body JSON file")
    s.add_argument("spec", help="ball:n, cube:n, cross:n, lp:n:p, random-hpoly:n:m, random-vpoly:n:m, ellipsoid:n:cond")
    s = sub.add_parser("render", parents=[common], help="flatten report files to CSV")
    s.add_argument("reports", nargs="*", help="report JSON files")
    return p


def _apply_config(args):
    """Merge --config defaults under explicit flags; return the constants."""
    overrides = {}
    if args.config:
        cfg = load_json(args.config)
        if not isinstance(cfg, dict):
            raise MalformedInput(f"{args.config}: expected an object")
        extra = set(cfg) - CONFIG_KEYS
        if extra:
            raise MalformedInput(f"{args.config}: unknown keys {sorted(extra)}")
        for key in ("seed", "samples", "threads", "format", "out"):
            if key in cfg and getattr(args, key) is None:
                setattr(args, key, cfg[key])
        overrides.update(cfg.get("constants", {}))
    for key in ("c_alpha", "c_prime", "c3"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    try:
        return resolve(overrides)
    except KeyError as exc:
        raise MalformedInput(str(exc.args[0])) from None


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        consts = _apply_config(args)
        if args.command in NEEDS_SEED and args.seed is None:
            raise MalformedInput(f"{args.command}: --seed is required")
        if args.seed is None:
            args.seed = 0
        if args.samples is not None and args.samples < 2:
            raise MalformedInput("--samples must be at least 2")
        sampling.set_threads(args.threads)
        payload, reports = COMMANDS[args.command](args, consts)
    except MalformedInput as exc:
        print(f"isoslice: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    fmt = args.format or "json"
    if args.command == "render" or fmt == "csv":
        if args.command == "gen":
            print("isoslice: gen writes JSON only", file=sys.stderr)
            return EXIT_MALFORMED
        _emit(render_csv(reports), args.out)
    else:
        _emit(dump_json(payload), args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
