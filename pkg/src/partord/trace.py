"""Append-only execution trace and its JSON Lines encoding.

Record kinds:

* ``local``    -- a node event with no input message (initial or self-triggered)
* ``send``     -- message ``msg`` leaves ``node`` for ``peer``
* ``deliver``  -- ``msg`` from ``peer`` triggers an event at ``node``
* ``postpone`` -- ``msg`` arrived at ``node`` but the gate held it back
* ``release``  -- a postponed ``msg`` passes the gate (a ``deliver`` follows)
* ``pulse``    -- ``node`` generates the pulse of rank ``rank``

Event-driven records carry the node-local event time ``t``; pulse-driven
records carry ``rank`` (for ``deliver`` this is the rank of the pulse the
event feeds, i.e. one more than the last pulse generated).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, TextIO

KINDS = frozenset({"send", "deliver", "postpone", "release", "pulse", "local"})
FIELDS = ("kind", "seq", "node", "peer", "msg", "t", "rank", "mu", "rho", "attach")


class MalformedTrace(ValueError):
    pass


@dataclass(slots=True)
class TraceRecord:
    kind: str
    seq: int
    node: int
    peer: int | None = None
    msg: int | None = None
    t: int | None = None
    rank: int | None = None
    mu: float | int | None = None
    rho: int | None = None
    attach: dict | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            if name == "mu" and value == math.inf:
                value = "inf"
            out[name] = value
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TraceRecord":
        unknown = set(d) - set(FIELDS)
        if unknown:
            raise MalformedTrace(f"unknown trace fields {sorted(unknown)}")
        try:
            kind = d["kind"]
            seq = int(d["seq"])
            node = int(d["node"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTrace(f"record missing kind/seq/node: {d}") from exc
        if kind not in KINDS:
            raise MalformedTrace(f"unknown record kind {kind!r}")
        mu = d.get("mu")
        if mu == "inf":
            mu = math.inf
        return cls(kind, seq, node, d.get("peer"), d.get("msg"), d.get("t"),
                   d.get("rank"), mu, d.get("rho"), d.get("attach"))

    @property
    def is_control(self) -> bool:
        return bool(self.attach) and "control" in self.attach


@dataclass
class Trace:
    n: int
    records: list[TraceRecord] = field(default_factory=list)
    edges: list[tuple[int, int]] | None = None

    def add(self, kind: str, node: int, **kw: Any) -> TraceRecord:
        rec = TraceRecord(kind, len(self.records), node, **kw)
        self.records.append(rec)
        return rec

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def pulse_driven(self) -> bool:
        return any(r.kind == "pulse" for r in self.records)

    def dumps(self) -> str:
        header = {"kind": "header", "n": self.n}
        if self.edges is not None:
            header["edges"] = [list(e) for e in self.edges]
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, fp: TextIO) -> None:
        fp.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls.read(text.splitlines())

    @classmethod
    def read(cls, lines: Iterable[str]) -> "Trace":
        n = None
        edges = None
        records: list[TraceRecord] = []
        for lineno, line in enumerate(lines, 1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(f"line {lineno}: {exc}") from exc
            if not isinstance(d, dict):
                raise MalformedTrace(f"line {lineno}: expected an object")
            if d.get("kind") == "header":
                n = int(d["n"])
                if "edges" in d:
                    edges = [tuple(e) for e in d["edges"]]
                continue
            records.append(TraceRecord.from_dict(d))
        if n is None:
            n = max((max(r.node, r.peer or 0) for r in records), default=1)
        trace = cls(n, records, edges)
        validate(trace)
        return trace


def validate(trace: Trace) -> None:
    """Structural well-formedness: seq order, delivery/release references."""
    sent: dict[int, int] = {}
    postponed: set[int] = set()
    delivered: set[int] = set()
    last_seq = -1
    for r in trace.records:
        if r.seq <= last_seq:
            raise MalformedTrace(f"seq {r.seq} is not increasing")
        last_seq = r.seq
        if not 1 <= r.node <= trace.n:
            raise MalformedTrace(f"seq {r.seq}: node {r.node} out of range")
        if r.kind == "send":
            if r.msg is None or r.peer is None:
                raise MalformedTrace(f"seq {r.seq}: send without msg/peer")
            if r.msg in sent:
                raise MalformedTrace(f"seq {r.seq}: message id {r.msg} sent twice")
            sent[r.msg] = r.peer
        elif r.kind in ("deliver", "postpone", "release"):
            if r.msg not in sent:
                raise MalformedTrace(f"seq {r.seq}: {r.kind} of unsent message {r.msg}")
            if sent[r.msg] != r.node:
                raise MalformedTrace(
                    f"seq {r.seq}: message {r.msg} addressed to {sent[r.msg]} reaches {r.node}")
            if r.kind == "postpone":
                postponed.add(r.msg)
            elif r.kind == "release" and r.msg not in postponed:
                raise MalformedTrace(f"seq {r.seq}: release of message {r.msg} never postponed")
            elif r.kind == "deliver":
                if r.msg in delivered:
                    raise MalformedTrace(f"seq {r.seq}: message {r.msg} delivered twice")
                delivered.add(r.msg)
        elif r.kind == "pulse" and r.rank is None:
            raise MalformedTrace(f"seq {r.seq}: pulse without rank")
