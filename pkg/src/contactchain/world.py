"""Scenario files and the simulated world they describe."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .actors.authority import HealthAuthorityActor
from .actors.config import KDC_ADDR, ProtocolConfig, ZoneMap
from .actors.evidence import Directory
from .actors.kdc import KdcActor
from .actors.place import PlaceActor
from .actors.protocol import (check_status, check_zone, contact_handshake, renew_credentials, run_test,
                              visit_place)
from .actors.user import UserActor
from .ledger import LedgerStatus
from .raft import Role
from .simnet import DAY, HOUR, MINUTE, SECOND, LinkModel, Simulator
from .wire import Location

_UNITS = {"d": DAY, "h": HOUR, "m": MINUTE, "s": SECOND, "ms": 1}
_TIME_RE = re.compile(r"(\d+)(ms|d|h|m|s)")


class ScenarioError(ValueError):
    pass


def parse_time(value) -> int:
    """Milliseconds from an int or a string such as ``"2d10h"`` or ``"90m"``."""
    if isinstance(value, bool):
        raise ScenarioError(f"not a time: {value!r}")
    if isinstance(value, int):
        return value
    text = str(value).replace(" ", "")
    if text.isdigit():
        return int(text)
    parts = _TIME_RE.findall(text)
    if not parts or "".join(n + u for n, u in parts) != text:
        raise ScenarioError(f"cannot parse time {value!r}")
    return sum(int(n) * _UNITS[u] for n, u in parts)


EVENT_TYPES = ("contact", "visit", "test", "partition", "crash", "recover", "query", "zone_query")


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    validators: int = 5
    duration: int = 3 * DAY
    latency: tuple[int, int] = (5, 20)
    loss: float = 0.0
    zones: dict[int, tuple[float, float]] = field(default_factory=lambda: {0: (0.0, 0.0)})
    users: list[str] = field(default_factory=list)
    places: dict[str, int] = field(default_factory=dict)  # name -> zone id
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    events: list[dict] = field(default_factory=list)
    sweep: dict | None = None  # figure presets carry sweep parameters instead of events

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "Scenario":
        if not isinstance(raw, dict):
            raise ScenarioError("scenario must be a mapping")
        known = {"name", "seed", "validators", "duration", "link", "zones", "users", "places", "protocol",
                 "events", "sweep"}
        extra = set(raw) - known
        if extra:
            raise ScenarioError(f"unknown scenario keys: {sorted(extra)}")
        sc = cls(name=str(raw.get("name", "scenario")), seed=int(raw.get("seed", 0)),
                 validators=int(raw.get("validators", 5)), duration=parse_time(raw.get("duration", "3d")))
        if sc.validators < 1:
            raise ScenarioError("need at least one validator")
        link = raw.get("link") or {}
        sc.latency = tuple(link.get("latency_ms", (5, 20)))
        sc.loss = float(link.get("loss", 0.0))
        if "zones" in raw:
            sc.zones = {int(z["id"]): (float(z.get("lat", 0.0)), float(z.get("lon", 0.0))) for z in raw["zones"]}
        users = raw.get("users", [])
        if isinstance(users, int):
            users = [f"citizen:{i}" for i in range(users)]
        sc.users = [str(u) for u in users]
        if len(set(sc.users)) != len(sc.users):
            raise ScenarioError("duplicate user labels")
        sc.places = {str(p["name"]): int(p.get("zone", 0)) for p in raw.get("places", [])}
        for name, z in sc.places.items():
            if z not in sc.zones:
                raise ScenarioError(f"place {name} is in unknown zone {z}")
        sc.protocol = _protocol(raw.get("protocol") or {})
        sc.sweep = raw.get("sweep")
        sc.events = [_event(e, sc) for e in raw.get("events", [])]
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        p = Path(path)
        if not p.is_file():
            raise ScenarioError(f"scenario file not found: {path}")
        try:
            raw = yaml.safe_load(p.read_text())
        except yaml.YAMLError as e:
            raise ScenarioError(f"{path}: {e}") from None
        return cls.from_dict(raw)

    def with_overrides(self, seed: int | None = None, aggregation: bool | None = None,
                       bloom: bool | None = None) -> "Scenario":
        proto = self.protocol
        if aggregation is not None:
            proto = replace(proto, aggregation=aggregation)
        if bloom is not None:
            proto = replace(proto, bloom=bloom)
        return replace(self, seed=self.seed if seed is None else seed, protocol=proto)


def _protocol(raw: dict) -> ProtocolConfig:
    kw: dict[str, Any] = {}
    for key in ("th1", "th2"):
        if key in raw:
            kw[key] = float(raw[key])
    if "weights" in raw:
        w = raw["weights"]
        kw["weights"] = (float(w[0]), float(w[1]))
    for key in ("aggregation", "bloom"):
        if key in raw:
            kw[key] = bool(raw[key])
    if raw.get("group_size") is not None:
        kw["group_size"] = int(raw["group_size"])
    for key, attr in (("epoch", "epoch_ms"), ("window", "window_ms"), ("upload_jitter", "upload_jitter_ms"),
                      ("stay", "stay_ms"), ("contamination", "contamination_ms"),
                      ("update_interval", "update_interval_ms")):
        if key in raw:
            kw[attr] = parse_time(raw[key])
    if "unknown_zone" in raw:
        from .wire import ZoneCategory
        v = raw["unknown_zone"]
        kw["unknown_zone"] = None if v in (None, "unknown") else ZoneCategory[str(v).upper()]
    try:
        return ProtocolConfig(**kw)
    except ValueError as e:
        raise ScenarioError(str(e)) from None


def _event(raw: dict, sc: Scenario) -> dict:
    if not isinstance(raw, dict) or raw.get("type") not in EVENT_TYPES:
        raise ScenarioError(f"bad event {raw!r}; type must be one of {EVENT_TYPES}")
    ev = dict(raw)
    ev["at"] = parse_time(raw.get("at", 0))
    for key in ("a", "b", "user"):
        if key in ev and ev[key] not in sc.users:
            raise ScenarioError(f"event refers to unknown user {ev[key]!r}")
    if "place" in ev and ev["place"] not in sc.places:
        raise ScenarioError(f"event refers to unknown place {ev['place']!r}")
    if "zone" in ev and int(ev["zone"]) not in sc.zones:
        raise ScenarioError(f"event refers to unknown zone {ev['zone']!r}")
    if ev["type"] == "partition":
        ev["until"] = parse_time(raw["until"])
    return ev


@dataclass
class EventLog:
    at: int
    type: str
    detail: dict
    outcome: Any


class World:
    """Every actor of one scenario wired onto one simulator."""

    def __init__(self, sc: Scenario):
        self.scenario = sc
        self.seed = sc.seed
        self.cfg = sc.protocol
        self.sim = Simulator(sc.seed, LinkModel(sc.latency, sc.loss))
        self.rng = self.sim.substream("sessions")
        self.zone_map = ZoneMap()
        for z, (lat, lon) in sorted(sc.zones.items()):
            self.zone_map.add(z, lat, lon)

        self.kdc = KdcActor(self.cfg, self.sim.substream("kdc"))
        self.sim.register(KDC_ADDR, lambda src, data: None)
        self.validators = [HealthAuthorityActor(i, sc.validators, self.sim, self.cfg) for i in range(sc.validators)]
        self.users: dict[str, UserActor] = {}
        for i, label in enumerate(sc.users):
            self.add_user(label)
        self.places: dict[str, PlaceActor] = {}
        for name, zone in sc.places.items():
            self.add_place(name, zone)
        self.kdc.ledger_view = lambda: self.gateway.status_chain
        for v in self.validators:
            v.kdc = self.kdc
            v.start()
        self._publish()
        self.log: list[EventLog] = []
        self._schedule_renewals()
        for ev in sc.events:
            self.sim.schedule(ev["at"], self._fire, ev)

    # -- construction
    def add_user(self, label: str) -> UserActor:
        u = UserActor(len(self.users), label, self.cfg)
        u.install(*self.kdc.enroll(label, self.sim.now))
        self.users[label] = u
        return u

    def add_place(self, name: str, zone: int) -> PlaceActor:
        p = PlaceActor(len(self.places), name, zone, self.zone_map.location(zone), self.cfg)
        p.sk, p.cert = self.kdc.enroll_place(name, self.sim.now)
        p.attach(self.sim)
        self.places[name] = p
        return p

    def _publish(self) -> None:
        """Refresh the public directory every validator consults."""
        self.directory = Directory(self.kdc.pk, tuple(v.pk for v in self.validators),
                                   frozenset(p.pk.to_bytes() for p in self.places.values()), self.zone_map)
        for v in self.validators:
            v.directory = self.directory
            v.place_addr = {p.pk.to_bytes(): p.addr for p in self.places.values()}

    def _schedule_renewals(self) -> None:
        t = self.cfg.epoch_end(self.sim.now)
        while t <= self.scenario.duration:
            self.sim.schedule(t, self._renew_all)
            t += self.cfg.epoch_ms

    def _renew_all(self) -> None:
        for u in self.users.values():
            u.purge(self.sim.now)
            renew_credentials(self, u)

    # -- views
    @property
    def gateway(self) -> HealthAuthorityActor:
        """Validator that answers ledger queries from users and places."""
        return self.validators[0]

    def leader(self) -> HealthAuthorityActor | None:
        best = None
        for v in self.validators:
            if v.raft.alive and v.raft.role == Role.LEADER and (best is None or v.raft.term > best.raft.term):
                best = v
        return best

    def user(self, label: str) -> UserActor:
        return self.users[label]

    def status_of(self, label: str) -> LedgerStatus:
        """Ledger status of the user's newest key, as the gateway sees it (no trace traffic)."""
        return self.gateway.status_chain.blocks[-1].lookup(self.kdc.latest(label)) \
            if self.gateway.status_chain.blocks else LedgerStatus.NOT_FOUND

    def run(self, until: int | None = None):
        return self.sim.run_until(self.scenario.duration if until is None else until)

    # -- scripted events
    def _fire(self, ev: dict) -> None:
        kind = ev["type"]
        if kind == "contact":
            loc = self._location(ev)
            out = contact_handshake(self, self.users[ev["a"]], self.users[ev["b"]], loc)
        elif kind == "visit":
            out = visit_place(self, self.users[ev["user"]], self.places[ev["place"]])
        elif kind == "test":
            ha = self.validators[int(ev.get("authority", 0)) % len(self.validators)]
            out = run_test(self, self.users[ev["user"]], ha, bool(ev.get("positive", True)))
        elif kind == "partition":
            groups = [[f"v{i}" for i in g] for g in ev["groups"]]
            self.sim.partition(groups, self.sim.now, ev["until"])
            out = None
        elif kind == "crash":
            self.validators[int(ev["validator"])].raft.crash()
            out = None
        elif kind == "recover":
            self.validators[int(ev["validator"])].raft.recover()
            out = None
        elif kind == "query":
            out = check_status(self, self.users[ev["user"]])
        else:
            out = check_zone(self, self.users[ev["user"]], int(ev["zone"]))
        self.log.append(EventLog(self.sim.now, kind, {k: v for k, v in ev.items() if k not in ("type", "at")}, out))

    def _location(self, ev: dict) -> Location:
        if "lat" in ev:
            return Location.from_degrees(float(ev["lat"]), float(ev["lon"]))
        return self.zone_map.location(int(ev.get("zone", self.zone_map.ids()[0])))


def random_scenario(seed: int, users: int = 8, days: int = 3, contacts_per_day: int = 6) -> Scenario:
    """Small randomly scripted scenario, used by property tests."""
    rng = random.Random(f"scenario:{seed}")
    labels = [f"citizen:{i}" for i in range(users)]
    events = []
    for d in range(days):
        for _ in range(contacts_per_day):
            a, b = rng.sample(labels, 2)
            events.append({"type": "contact", "at": d * DAY + rng.randrange(HOUR, 20 * HOUR), "a": a, "b": b})
    events.sort(key=lambda e: e["at"])
    return Scenario(name=f"random-{seed}", seed=seed, duration=(days + 1) * DAY, users=labels,
                    events=[dict(e) for e in events])
