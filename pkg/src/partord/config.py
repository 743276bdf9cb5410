"""Run configuration: one JSON document fully determines a run.

Sections: ``seed``, ``topology``, ``latency``, ``ordering``,
``application``, ``limits``. ``normalize`` fills defaults and rejects
anything unknown, naming the offending key; ``build`` turns the normalized
document into a ``SimConfig``. The normalized document is echoed into the
run report.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

from .apps.backtrack import KarpZhang, KZTolerance, NQueens, SyntheticTree
from .apps.chatter import Chatter, PulseChatter
from .apps.linsolve import ColoredSolver, LinearSystem, grid_laplacian_system
from .event_order import ConstantTolerance, UnorderedGate, gate_cdc, gate_fdc, gate_rcdc, gate_rfdc
from .graph import (TopologyError, build_topology, complete_graph, grid_graph, make_coloring,
                    path_graph, ring_graph)
from .pulse_order import ConstantDelays
from .simnet import ConfigError, Fixed, Geometric, SimConfig, Uniform

SECTIONS = ("seed", "topology", "latency", "ordering", "application", "limits")
EVENT_GATES = ("fdc", "rfdc", "cdc", "rcdc", "none")


def _fail(key: str, msg: str):
    raise ConfigError(f"{key}: {msg}")


def _section(doc: dict, key: str, defaults: dict, where: str) -> dict:
    raw = doc.get(key, {})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        _fail(where, "expected an object")
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        _fail(f"{where}.{unknown[0]}", "unknown key")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(raw))
    return out


def _int(sec: dict, key: str, where: str, lo: int | None = None, optional: bool = False):
    v = sec[key]
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{where}.{key}", f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(f"{where}.{key}", f"must be >= {lo}")
    return v


def _choice(sec: dict, key: str, where: str, options) -> str:
    v = sec[key]
    if v not in options:
        _fail(f"{where}.{key}", f"expected one of {', '.join(map(str, options))}, got {v!r}")
    return v


def _bool(sec: dict, key: str, where: str) -> bool:
    if not isinstance(sec[key], bool):
        _fail(f"{where}.{key}", "expected true or false")
    return sec[key]


def _mu(v, where: str):
    if v in ("inf", "kz"):
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or math.isnan(v):
        _fail(where, f"expected a nonnegative number, \"inf\" or \"kz\", got {v!r}")
    return "inf" if math.isinf(v) else v


_TOPOLOGY = {"kind": "complete", "n": 4, "rows": None, "cols": None, "edges": None,
             "coloring": None}
_LATENCY = {"kind": "uniform", "lo": 1, "hi": 10, "d": 1, "mean": 5.0}
_ORDERING = {"gate": None, "mu": 0, "attach": "full", "literal_eq5": False,
             "literal_counts": False, "delays": None}
_LIMITS = {"max_events": 1_000_000, "horizon": None, "fault_at": None}
_APPS = {
    "backtrack": {"kind": "backtrack", "tree": None, "root": 1, "throttle": True},
    "linsolve": {"kind": "linsolve", "method": "gauss-seidel", "n": None, "entries": None,
                 "b": None, "x0": None, "eps": 1e-8, "grid": None, "shift": 1.0,
                 "residual": "tree", "max_iterations": 200},
    "chatter": {"kind": "chatter", "tokens": 2, "ttl": 4, "fanout": 0.3},
    "pulse-chatter": {"kind": "pulse-chatter", "rounds": 6, "burst": 3, "quiet": None},
}
_TREES = {
    "synthetic": {"kind": "synthetic", "seed": 0, "leaves": 15, "maxb": 3},
    "queens": {"kind": "queens", "size": 4},
}


def normalize(doc: dict) -> dict:
    """Validate ``doc`` and return it with every default filled in."""
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        _fail(unknown[0], "unknown section")
    out: dict = {"seed": doc.get("seed", 0)}
    if isinstance(out["seed"], bool) or not isinstance(out["seed"], int):
        _fail("seed", "expected an integer")

    app_raw = doc.get("application")
    if not isinstance(app_raw, dict):
        _fail("application", "missing or not an object")
    kind = app_raw.get("kind")
    if kind not in _APPS:
        _fail("application.kind", f"expected one of {', '.join(_APPS)}, got {kind!r}")
    app = _section(doc, "application", _APPS[kind], "application")
    out["application"] = app
    pulse = kind in ("linsolve", "pulse-chatter")

    if kind == "backtrack":
        tree = app["tree"] or {"kind": "synthetic"}
        if not isinstance(tree, dict) or tree.get("kind") not in _TREES:
            _fail("application.tree.kind", f"expected one of {', '.join(_TREES)}")
        app["tree"] = _section({"t": tree}, "t", _TREES[tree["kind"]], "application.tree")
        for k in app["tree"]:
            if k != "kind":
                _int(app["tree"], k, "application.tree", lo=0 if k == "seed" else 1)
        _int(app, "root", "application", lo=1)
        _bool(app, "throttle", "application")
    elif kind == "linsolve":
        _choice(app, "method", "application", ("jacobi", "gauss-seidel"))
        _choice(app, "residual", "application", ("tree", "oracle"))
        _int(app, "max_iterations", "application", lo=0)
        if not (isinstance(app["eps"], (int, float)) and 0 < app["eps"] < 1):
            _fail("application.eps", "must lie in (0, 1)")
        if app["grid"] is None and app["entries"] is None:
            _fail("application.entries", "give entries (with n and b) or grid")
        if app["grid"] is not None:
            g = app["grid"]
            if not (isinstance(g, list) and len(g) == 2 and all(isinstance(x, int) and x >= 1 for x in g)):
                _fail("application.grid", "expected [rows, cols]")
        else:
            _int(app, "n", "application", lo=1)
            if not isinstance(app["b"], list) or len(app["b"]) != app["n"]:
                _fail("application.b", f"expected a list of {app['n']} numbers")
            if app["x0"] is not None and (not isinstance(app["x0"], list) or len(app["x0"]) != app["n"]):
                _fail("application.x0", f"expected a list of {app['n']} numbers")
            for e in app["entries"]:
                if not (isinstance(e, list) and len(e) == 3):
                    _fail("application.entries", f"expected [row, col, value] triples, got {e!r}")
    elif kind == "chatter":
        _int(app, "tokens", "application", lo=0)
        _int(app, "ttl", "application", lo=1)
    else:
        _int(app, "rounds", "application", lo=1)
        _int(app, "burst", "application", lo=0)
        _int(app, "quiet", "application", lo=0, optional=True)

    tdef = dict(_TOPOLOGY, kind="matrix", n=None) if kind == "linsolve" else _TOPOLOGY
    topo = _section(doc, "topology", tdef, "topology")
    kinds = ("complete", "ring", "path", "grid", "edges", "matrix")
    _choice(topo, "kind", "topology", kinds)
    if topo["kind"] == "matrix" and kind != "linsolve":
        _fail("topology.kind", "matrix topology is only for linsolve")
    if kind == "linsolve" and topo["kind"] != "matrix":
        _fail("topology.kind", "linsolve takes its topology from the matrix")
    if topo["kind"] == "grid":
        _int(topo, "rows", "topology", lo=1)
        _int(topo, "cols", "topology", lo=1)
    elif topo["kind"] in ("complete", "ring", "path", "edges"):
        _int(topo, "n", "topology", lo=1)
    if topo["kind"] == "edges" and not isinstance(topo["edges"], list):
        _fail("topology.edges", "expected a list of [i, j] pairs")
    if topo["coloring"] is not None and not isinstance(topo["coloring"], list):
        _fail("topology.coloring", "expected a list of colors, node 1 first")
    out["topology"] = topo

    lat = _section(doc, "latency", _LATENCY, "latency")
    _choice(lat, "kind", "latency", ("uniform", "fixed", "geometric"))
    out["latency"] = lat

    order = _section(doc, "ordering", _ORDERING, "ordering")
    if pulse:
        if order["gate"] is None:
            order["gate"] = "psdc"
        if order["gate"] != "psdc":
            _fail("ordering.gate", f"pulse-driven application {kind} needs gate psdc")
        d = order["delays"]
        if d is None:
            d = "linsolve" if kind == "linsolve" else {"rho": 1, "delta": 0}
        if d == "linsolve":
            if kind != "linsolve":
                _fail("ordering.delays", "linsolve delays need the linsolve application")
        else:
            if not isinstance(d, dict) or set(d) - {"rho", "delta"}:
                _fail("ordering.delays", "expected \"linsolve\" or {\"rho\": r, \"delta\": d}")
            d = {"rho": d.get("rho", 1), "delta": d.get("delta", 0)}
            _int(d, "rho", "ordering.delays", lo=1)
            _int(d, "delta", "ordering.delays", lo=0)
        order["delays"] = d
        if kind == "pulse-chatter" and app["quiet"] is None:
            app["quiet"] = (d["rho"] - 1) if isinstance(d, dict) else 0
    else:
        if order["gate"] is None:
            order["gate"] = "rcdc"
        if order["gate"] == "psdc":
            _fail("ordering.gate", f"event-driven application {kind} needs an event gate")
        _choice(order, "gate", "ordering", EVENT_GATES)
        if order["delays"] is not None:
            _fail("ordering.delays", "delays apply to pulse-driven applications only")
        order["mu"] = _mu(order["mu"], "ordering.mu")
        if order["mu"] == "kz" and kind != "backtrack":
            _fail("ordering.mu", "the kz policy needs the backtrack application")
        _choice(order, "attach", "ordering", ("full", "sparse"))
        _bool(order, "literal_eq5", "ordering")
        _bool(order, "literal_counts", "ordering")
    out["ordering"] = order

    lim = _section(doc, "limits", _LIMITS, "limits")
    _int(lim, "max_events", "limits", lo=1)
    _int(lim, "horizon", "limits", lo=1, optional=True)
    _int(lim, "fault_at", "limits", lo=1, optional=True)
    out["limits"] = lim
    return out


def load(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from exc
    return normalize(doc)


# -- building -----------------------------------------------------------------


def _topology(t: dict):
    k = t["kind"]
    try:
        if k == "complete":
            return complete_graph(t["n"])
        if k == "ring":
            return ring_graph(t["n"])
        if k == "path":
            return path_graph(t["n"])
        if k == "grid":
            return grid_graph(t["rows"], t["cols"])
        return build_topology(t["n"], t["edges"])
    except TopologyError as exc:
        raise ConfigError(f"topology: {exc}") from exc


def _system(a: dict) -> LinearSystem:
    try:
        if a["grid"] is not None:
            return grid_laplacian_system(a["grid"][0], a["grid"][1], a["shift"], a["eps"])
        return LinearSystem.from_coo(a["n"], a["entries"], a["b"], a["x0"], a["eps"])
    except ValueError as exc:
        raise ConfigError(f"application.entries: {exc}") from exc


def _app(cfg: dict):
    a = cfg["application"]
    k = a["kind"]
    if k == "backtrack":
        t = a["tree"]
        src = (SyntheticTree(t["seed"], t["leaves"], t["maxb"]) if t["kind"] == "synthetic"
               else NQueens(t["size"]))
        return KarpZhang(src, root_holder=a["root"], throttle=a["throttle"])
    if k == "linsolve":
        system = _system(a)
        coloring = None
        if cfg["topology"]["coloring"] is not None:
            try:
                coloring = make_coloring(cfg["topology"]["coloring"])
            except TopologyError as exc:
                raise ConfigError(f"topology.coloring: {exc}") from exc
        try:
            return ColoredSolver(system, a["method"], coloring, a["residual"], a["max_iterations"])
        except ValueError as exc:
            raise ConfigError(f"topology.coloring: {exc}") from exc
    if k == "chatter":
        return Chatter(a["tokens"], a["ttl"], a["fanout"])
    return PulseChatter(a["rounds"], a["burst"], a["quiet"])


def _gate(o: dict):
    g, mu = o["gate"], o["mu"]
    if g == "none":
        return UnorderedGate()
    if g == "fdc":
        return gate_fdc()
    if g == "cdc":
        return gate_cdc(o["attach"])
    policy = KZTolerance() if mu == "kz" else ConstantTolerance(math.inf if mu == "inf" else mu)
    if g == "rfdc":
        return gate_rfdc(policy)
    return gate_rcdc(policy, o["attach"], literal_eq5=o["literal_eq5"],
                     literal_counts=o["literal_counts"])


def _latency(l: dict):
    try:
        if l["kind"] == "uniform":
            return Uniform(l["lo"], l["hi"])
        if l["kind"] == "fixed":
            return Fixed(l["d"])
        return Geometric(l["mean"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"latency: {exc}") from exc


def build(cfg: dict, seed: int | None = None) -> SimConfig:
    """SimConfig for a normalized config, optionally with another seed."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = seed
    app = _app(cfg)
    lim = cfg["limits"]
    if app.framework == "pulse":
        d = cfg["ordering"]["delays"]
        delays = app.delays() if d == "linsolve" else ConstantDelays(d["rho"], d["delta"])
        topo = app.topo if isinstance(app, ColoredSolver) else _topology(cfg["topology"])
        horizon = lim["horizon"]
        if horizon is None:
            # the policies are periodic in the iteration, ten periods cover every case
            horizon = 10 * app.schedule.period if isinstance(app, ColoredSolver) else 100
        return SimConfig(topo, app, "psdc", delays, _latency(cfg["latency"]), cfg["seed"],
                         lim["max_events"], horizon, lim["fault_at"], echo=cfg)
    topo = _topology(cfg["topology"])
    if cfg["application"]["kind"] == "backtrack" and cfg["application"]["root"] > topo.n:
        _fail("application.root", f"node {cfg['application']['root']} not in 1..{topo.n}")
    return SimConfig(topo, app, _gate(cfg["ordering"]), None, _latency(cfg["latency"]),
                     cfg["seed"], lim["max_events"], 100, lim["fault_at"], echo=cfg)


# -- bundled demos ------------------------------------------------------------

DEMOS: dict[str, list[dict]] = {
    "kz-complete4": [{
        "seed": 1,
        "topology": {"kind": "complete", "n": 4},
        "latency": {"kind": "uniform", "lo": 1, "hi": 20},
        "ordering": {"gate": "rcdc", "mu": "kz"},
        "application": {"kind": "backtrack", "tree": {"kind": "synthetic", "seed": 7, "leaves": 60}},
    }],
    "kz-ring8": [{
        "seed": 1,
        "topology": {"kind": "ring", "n": 8},
        "latency": {"kind": "uniform", "lo": 1, "hi": 20},
        "ordering": {"gate": "rcdc", "mu": "kz", "attach": "sparse"},
        "application": {"kind": "backtrack", "tree": {"kind": "queens", "size": 5}},
    }],
    "jacobi-2x2": [{
        "seed": 1,
        "latency": {"kind": "uniform", "lo": 1, "hi": 10},
        "application": {"kind": "linsolve", "method": "jacobi", "n": 2,
                        "entries": [[1, 1, 2], [1, 2, 1], [2, 1, 1], [2, 2, 2]],
                        "b": [3, 3], "x0": [0, 0]},
    }],
    "gauss-seidel-grid9": [{
        "seed": 1,
        "latency": {"kind": "uniform", "lo": 1, "hi": 10},
        "application": {"kind": "linsolve", "method": "gauss-seidel", "grid": [3, 3]},
    }],
    "sync-vs-async": [
        {
            "seed": 1,
            "topology": {"kind": "ring", "n": 8},
            "latency": {"kind": "uniform", "lo": 1, "hi": 20},
            "ordering": {"gate": "psdc", "delays": {"rho": 1, "delta": 0}},
            "application": {"kind": "pulse-chatter", "rounds": 12, "burst": 2},
        },
        {
            "seed": 1,
            "topology": {"kind": "ring", "n": 8},
            "latency": {"kind": "uniform", "lo": 1, "hi": 20},
            "ordering": {"gate": "psdc", "delays": {"rho": 3, "delta": 2}},
            "application": {"kind": "pulse-chatter", "rounds": 12, "burst": 2},
        },
    ],
}


def demo(name: str) -> list[dict]:
    if name not in DEMOS:
        raise ConfigError(f"demo: unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    return [normalize(copy.deepcopy(d)) for d in DEMOS[name]]
