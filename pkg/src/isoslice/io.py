"""JSON forms of bodies, body generators and the default test corpora."""
from __future__ import annotations

import json
import math

import numpy as np
from scipy.stats import special_ortho_group

from .convex_bodies import (
    Ball, Body, Box, CrossPolytope, Ellipsoid, HPolytope, Intersection, LpBall,
    Transformed, VPolytope,
)

__all__ = [
    "MalformedInput", "body_from_dict", "body_to_json", "load_json", "dump_json",
    "generate_body", "default_corpus", "quasi_corpus", "labelled",
]


class MalformedInput(ValueError):
    """Input file or specification that does not match the expected schema."""


_FIELDS = {
    "ball": {"radius"},
    "box": {"half_widths"},
    "cross": {"radii"},
    "lp": {"p", "radius"},
    "ellipsoid": {"form"},
    "hpoly": {"normals", "offsets"},
    "vpoly": {"vertices"},
    "transformed": {"base", "matrix"},
    "intersection": {"bodies"},
}


def body_from_dict(d: dict, where: str = "body") -> Body:
    """Build a body from its JSON dictionary; unknown keys are rejected."""
    if not isinstance(d, dict):
        raise MalformedInput(f"{where}: expected an object")
    kind = d.get("kind")
    if kind not in _FIELDS:
        raise MalformedInput(f"{where}.kind: unknown body kind {kind!r}")
    allowed = _FIELDS[kind] | {"kind", "dim", "label"}
    extra = set(d) - allowed
    if extra:
        raise MalformedInput(f"{where}: unknown keys {sorted(extra)}")
    missing = _FIELDS[kind] - set(d) - ({"radius"} if kind in ("ball", "lp") else set())
    if missing:
        raise MalformedInput(f"{where}: missing keys {sorted(missing)}")
    try:
        if kind == "ball":
            body = Ball(int(d["dim"]), float(d.get("radius", 1.0)))
        elif kind == "box":
            body = Box(d["half_widths"])
        elif kind == "cross":
            body = CrossPolytope(d["radii"])
        elif kind == "lp":
            body = LpBall(int(d["dim"]), float(d["p"]), float(d.get("radius", 1.0)))
        elif kind == "ellipsoid":
            body = Ellipsoid(d["form"])
        elif kind == "hpoly":
            body = HPolytope(d["normals"], d["offsets"])
        elif kind == "vpoly":
            body = VPolytope(d["vertices"], symmetrize=True)
        elif kind == "transformed":
            body = Transformed(body_from_dict(d["base"], f"{where}.base"), np.asarray(d["matrix"], dtype=float))
        else:
            body = Intersection(*[body_from_dict(b, f"{where}.bodies[{i}]") for i, b in enumerate(d["bodies"])])
    except MalformedInput:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"{where}: {exc}") from None
    if "dim" in d and int(d["dim"]) != body.dim:
        raise MalformedInput(f"{where}.dim: declared {d['dim']} but data has dimension {body.dim}")
    if "label" in d:
        body.label = str(d["label"])
    return body


def dump_json(obj) -> str:
    """Stable JSON text: sorted keys, UTF-8, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def body_to_json(body: Body) -> str:
    d = body.to_dict()
    if getattr(body, "label", None):
        d["label"] = body.label
    return dump_json(d)


def load_json(path: str):
    """Read a JSON file, turning syntax errors into line-level diagnostics."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror}") from None


def labelled(body: Body, label: str) -> Body:
    body.label = label
    return body


def _int(tok, what):
    try:
        v = int(tok)
    except ValueError:
        raise MalformedInput(f"{what} must be an integer, got {tok!r}") from None
    if v < 1:
        raise MalformedInput(f"{what} must be positive")
    return v


def generate_body(spec: str, seed: int = 0) -> Body:
    """Body from a generator spec such as ``cube:3`` or ``random-hpoly:3:18``.

    Specs: ball:n, cube:n, cross:n, lp:n:p, random-hpoly:n:m, random-vpoly:n:m,
    ellipsoid:n:cond.  Random polytopes come in +- pairs, so they are
    centrally symmetric with the origin inside.
    """
    parts = spec.split(":")
    kind, args = parts[0], parts[1:]
    arity = {"ball": 1, "cube": 1, "cross": 1, "lp": 2, "random-hpoly": 2, "random-vpoly": 2, "ellipsoid": 2}
    if kind not in arity or len(args) != arity[kind]:
        raise MalformedInput(f"invalid body spec {spec!r}")
    n = _int(args[0], "dimension")
    rng = np.random.default_rng(seed)
    if kind == "ball":
        body = Ball(n)
    elif kind == "cube":
        body = Box.cube(n)
    elif kind == "cross":
        body = CrossPolytope.regular(n)
    elif kind == "lp":
        try:
            p = float(args[1])
        except ValueError:
            raise MalformedInput(f"p must be a number, got {args[1]!r}") from None
        if not p >= 1:
            raise MalformedInput("p must be at least 1")
        body = LpBall(n, p)
    elif kind == "random-hpoly":
        m = _int(args[1], "facet count")
        if m < 2 * n or m % 2:
            raise MalformedInput("facet count must be even and at least 2n")
        while True:
            N = rng.standard_normal((m // 2, n))
            N /= np.linalg.norm(N, axis=1, keepdims=True)
            if np.linalg.matrix_rank(N) == n:
                break
        b = rng.uniform(0.8, 1.2, m // 2)
        body = HPolytope(np.concatenate([N, -N]), np.concatenate([b, b]))
    elif kind == "random-vpoly":
        m = _int(args[1], "point count")
        if m < 2 * n or m % 2:
            raise MalformedInput("point count must be even and at least 2n")
        while True:
            P = rng.standard_normal((m // 2, n))
            if np.linalg.matrix_rank(P) == n:
                break
        body = VPolytope(P, symmetrize=True)
    else:
        try:
            cond = float(args[1])
        except ValueError:
            raise MalformedInput(f"condition must be a number, got {args[1]!r}") from None
        if not cond >= 1:
            raise MalformedInput("condition must be at least 1")
        axes = np.geomspace(1.0, cond, n)
        Q = special_ortho_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
        body = Ellipsoid.from_axes(axes, Q)
    return labelled(body, spec)


def default_corpus(n: int) -> list[Body]:
    """Ball, cube, cross-polytope, l_1.5 and l_3 balls, a random h-polytope
    with 2 n^2 facets, and an elongated box."""
    bodies = [generate_body(s, seed=n) for s in
              (f"ball:{n}", f"cube:{n}", f"cross:{n}", f"lp:{n}:1.5", f"lp:{n}:3",
               f"random-hpoly:{n}:{2 * n * n}")]
    bodies.append(labelled(Box([4.0] + [1.0] * (n - 1)), f"long-box:{n}"))
    return bodies


def quasi_corpus(n: int):
    """Unions cube ∪ 2.5 cross and cube ∪ long box, as quasi-convex bodies."""
    from .quasi import QuasiBody

    long_box = Box([3.0] + [0.5] * (n - 1))
    return [
        QuasiBody([Box.cube(n), CrossPolytope.regular(n, 2.5)], label=f"cube+cross:{n}"),
        QuasiBody([Box.cube(n), long_box], label=f"cube+long-box:{n}"),
    ]
