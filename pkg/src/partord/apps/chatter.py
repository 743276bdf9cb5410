"""Synthetic traffic generators used to exercise the gates."""

from __future__ import annotations

from dataclasses import dataclass

from .base import EventApp, PulseApp


@dataclass
class _Chat:
    node: int
    received: int = 0
    sent: int = 0
    started: bool = False


class Chatter(EventApp):
    """Every node injects up to ``tokens`` tokens toward distinct
    neighbors; a token hops to a random neighbor until its time-to-live
    runs out. Some hops fan out to two neighbors so chains overtake direct
    messages. One event never sends twice to the same neighbor."""

    name = "chatter"

    def __init__(self, tokens: int = 2, ttl: int = 4, fanout: float = 0.3):
        self.tokens = tokens
        self.ttl = ttl
        self.fanout = fanout

    def init_node(self, i, topo):
        return _Chat(i)

    def on_event(self, ctx, src, payload):
        st = ctx.state
        nbrs = ctx.neighbors
        if payload is None:
            st.started = True
        if not nbrs:
            return
        if payload is None:
            for j in ctx.rng.sample(list(nbrs), min(self.tokens, len(nbrs))):
                ctx.send(j, {"tag": "tok", "ttl": self.ttl})
                st.sent += 1
            return
        st.received += 1
        ttl = payload["ttl"] - 1
        if ttl <= 0:
            return
        width = 2 if ctx.rng.random() < self.fanout else 1
        for j in ctx.rng.sample(list(nbrs), min(width, len(nbrs))):
            ctx.send(j, {"tag": "tok", "ttl": ttl})
            st.sent += 1

    def done(self, states):
        if not all(s.started for s in states[1:]):
            return False
        return sum(s.sent for s in states[1:]) == sum(s.received for s in states[1:])

    def metrics(self, states):
        return {"received": sum(s.received for s in states[1:])}


@dataclass
class _PChat:
    node: int
    rounds: int = 0
    received: int = 0


class PulseChatter(PulseApp):
    """``rounds`` pulses per node; each pulse sends 0..burst messages to
    random neighbors. The last ``quiet`` pulses send nothing, so messages
    with a minimum delay larger than one can still be accepted before the
    receivers stop."""

    name = "pulse-chatter"

    def __init__(self, rounds: int = 6, burst: int = 3, quiet: int = 0):
        self.rounds = rounds
        self.burst = burst
        self.quiet = quiet

    def init_node(self, i, topo):
        return _PChat(i)

    def on_deliver(self, ctx, src, payload):
        ctx.state.received += 1

    def on_pulse(self, ctx, rank):
        ctx.state.rounds = rank
        if not ctx.neighbors or rank > self.rounds - self.quiet:
            return
        for _ in range(ctx.rng.randint(0, self.burst)):
            ctx.send(ctx.rng.choice(ctx.neighbors), {"tag": "p", "r": rank})

    def finished(self, state):
        return state.rounds >= self.rounds

    def metrics(self, states):
        return {"received": sum(s.received for s in states[1:])}
