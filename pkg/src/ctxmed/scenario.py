"""Scenario files: simulated services, communities and the process to run.

Paths inside a scenario are relative to the scenario file::

    kb = "kb.toml"
    rounds = 3
    seed = 7
    t_max = 1000
    qos_weights = [1, 1, 1]

    [services.FlightBooking]
    descriptor = "FlightBooking.xml"
    failure_schedule = [2]          # 1-based invocation numbers
    recovery_at = 3                 # optional round number
    outputs.reserve = { Prix_de_ReservationReturn = "1575.20" }

    [[communities]]
    name = "FlightBooking"
    functionality = "FlightBooking"
    master = "MasterFlightBooking.xml"
    slaves = [{ service = "UKFlightBooking", qos = [0.99, 0.98, 200], bid = true }]

    [process]
    steps = [{ id = "book_flight", service = "FlightBooking", operation = "reserve" }]
    edges = [{ from = "book_flight.ArrivalDate", to = "book_hotel.CheckInDate" }]
    inputs = { "book_flight.DepartureDate" = "20/12/2012" }

``bid`` may be ``"random"``, drawn from a generator seeded with ``seed``.
"""
from __future__ import annotations

import random
from pathlib import Path
from typing import Any, Optional

import tomli

from .community import Community, QoS, SlaveEntry
from .composition import Scenario, ServiceStub, Step
from .descriptor import load_descriptor
from .errors import ParseError
from .ontology import KnowledgeBase, load_knowledge_base_file


def _stub(name: str, cfg: dict[str, Any], base: Path) -> ServiceStub:
    try:
        descriptor = load_descriptor(base / cfg["descriptor"])
    except KeyError:
        raise ParseError(f"service {name!r} needs a descriptor path") from None
    if descriptor.service_name != name:
        raise ParseError(f"service {name!r} points at descriptor of {descriptor.service_name!r}")
    canned = {}
    for op_name, parts in cfg.get("outputs", {}).items():
        for part, raw in parts.items():
            canned[(op_name, part)] = str(raw)
    for op in descriptor.operations:
        for p in op.outputs:
            if (op.name, p.name) not in canned:
                raise ParseError(f"service {name!r} has no canned value for {op.name}.{p.name}")
    schedule = cfg.get("failure_schedule", [])
    if any(not isinstance(i, int) or i < 1 for i in schedule):
        raise ParseError(f"service {name!r}: failure_schedule holds 1-based invocation numbers")
    return ServiceStub(descriptor, canned, frozenset(schedule), cfg.get("recovery_at"))


def _community(cfg: dict[str, Any], services: dict[str, ServiceStub], base: Path, doc: dict, rng) -> Community:
    try:
        name, master_path = cfg["name"], cfg["master"]
    except KeyError:
        raise ParseError("a community needs a name and a master descriptor") from None
    master = load_descriptor(base / master_path)
    weights = tuple(float(w) for w in doc.get("qos_weights", (1, 1, 1)))
    if len(weights) != 3:
        raise ParseError("qos_weights must hold three numbers")
    community = Community(
        name,
        cfg.get("functionality", master.functionality),
        master,
        weights=weights,
        t_max=float(doc.get("t_max", 1000)),
    )
    for entry in cfg.get("slaves", []):
        service = entry.get("service")
        if service not in services:
            raise ParseError(f"community {name!r}: unknown slave service {service!r}")
        try:
            qos = QoS(*entry["qos"])
        except (KeyError, TypeError):
            raise ParseError(f"community {name!r}: slave {service} needs qos = [availability, reliability, ms]") from None
        bid = entry.get("bid", True)
        if bid == "random":
            bid = rng.random() < 0.5
        community.add(SlaveEntry(services[service].descriptor, qos, bids=bool(bid)))
    return community


def parse_scenario(doc: dict[str, Any], base: Path, seed: Optional[int] = None, adopt: bool = True) -> Scenario:
    seed = int(doc.get("seed", 0)) if seed is None else seed
    rng = random.Random(seed)
    services = {name: _stub(name, cfg, base) for name, cfg in doc.get("services", {}).items()}
    communities = [_community(c, services, base, doc, rng) for c in doc.get("communities", [])]

    process = doc.get("process")
    if not isinstance(process, dict):
        raise ParseError("scenario needs a [process] table")
    steps = []
    for s in process.get("steps", []):
        try:
            steps.append(Step(s.get("id", s["service"]), s["service"], s["operation"]))
        except KeyError:
            raise ParseError(f"process step {s!r} needs service and operation") from None
    edges = []
    for e in process.get("edges", []):
        try:
            edges.append((e["from"], e["to"]))
        except KeyError:
            raise ParseError(f"process edge {e!r} needs from and to") from None
    inputs = {}
    for ref, raw in process.get("inputs", {}).items():
        step_id, sep, part = ref.partition(".")
        if not sep:
            raise ParseError(f"process input {ref!r} must look like step.part")
        inputs[(step_id, part)] = str(raw)
    rounds = int(doc.get("rounds", 1))
    if rounds < 1:
        raise ParseError("rounds must be at least 1")
    return Scenario(services, communities, tuple(steps), tuple(edges), inputs, rounds, seed, adopt)


def load_scenario(
    path: str | Path,
    kb_path: Optional[str | Path] = None,
    seed: Optional[int] = None,
    adopt: bool = True,
) -> tuple[KnowledgeBase, Scenario]:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: malformed scenario: {exc}") from None
    if kb_path is None:
        if "kb" not in doc:
            raise ParseError(f"{path}: no knowledge base given")
        kb_path = path.parent / doc["kb"]
    kb = load_knowledge_base_file(kb_path)
    try:
        return kb, parse_scenario(doc, path.parent, seed=seed, adopt=adopt)
    except (TypeError, AttributeError) as exc:
        raise ParseError(f"{path}: malformed scenario: {exc}") from None


def data_dir() -> Path:
    """Directory of the bundled travel-planning fixtures."""
    return Path(__file__).parent / "data" / "travel"


__all__ = ["load_scenario", "parse_scenario", "data_dir"]
