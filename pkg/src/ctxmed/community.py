"""Communities of web services: master/slave registry, bidding, selection and context adoption."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum
from typing import Iterable, Mapping, Optional, Protocol

from .context import Context
from .descriptor import AnnotatedDescriptor, Operation
from .errors import (
    CommunityError,
    ConceptNotCovered,
    ConflictingAnnotations,
    EmptyCommunity,
    InvalidWeights,
    NoBidders,
    NoSupportAvailable,
    NotRecovered,
    OutOfRange,
)
from .ontology import KnowledgeBase, static_context

log = logging.getLogger(__name__)

Weights = tuple[float, float, float]
DEFAULT_WEIGHTS: Weights = (1.0, 1.0, 1.0)


def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


@dataclass(frozen=True)
class QoS:
    availability: float
    reliability: float
    response_time: float  # milliseconds

    def __post_init__(self) -> None:
        for name in ("availability", "reliability"):
            value = _dec(getattr(self, name))
            if not value.is_finite() or not 0 <= value <= 1:
                raise OutOfRange(f"{name} must lie in [0, 1], got {value}")
        rt = _dec(self.response_time)
        if not rt.is_finite() or rt <= 0:
            raise OutOfRange(f"response_time must be positive, got {rt}")


class SlaveState(str, Enum):
    MEMBER = "member"
    BIDDER = "bidder"
    PRIMARY = "primary"
    SUPPORT = "support"
    FAILED = "failed"


@dataclass
class SlaveEntry:
    descriptor: AnnotatedDescriptor
    qos: QoS
    state: SlaveState = SlaveState.MEMBER
    # scripted answer to a call for bids
    bids: bool = True

    @property
    def name(self) -> str:
        return self.descriptor.service_name


@dataclass(frozen=True)
class BidResponse:
    slave_name: str
    positive: bool


@dataclass
class Community:
    name: str
    functionality: str
    master: AnnotatedDescriptor
    slaves: list[SlaveEntry] = field(default_factory=list)
    weights: Weights = DEFAULT_WEIGHTS
    t_max: float = 1000.0
    primary: Optional[str] = None

    def __post_init__(self) -> None:
        if self.master.functionality != self.functionality:
            raise CommunityError(
                f"master {self.master.service_name} offers {self.master.functionality!r}, "
                f"community {self.name} groups {self.functionality!r}"
            )
        for s in self.slaves:
            self._check_member(s)

    def _check_member(self, entry: SlaveEntry) -> None:
        if entry.descriptor.functionality != self.functionality:
            raise CommunityError(f"slave {entry.name} does not offer {self.functionality!r}")

    def add(self, entry: SlaveEntry) -> None:
        self._check_member(entry)
        self.slaves.append(entry)

    def slave(self, name: str) -> SlaveEntry:
        for s in self.slaves:
            if s.name == name:
                return s
        raise CommunityError(f"community {self.name} has no slave {name!r}")

    def in_state(self, state: SlaveState) -> list[SlaveEntry]:
        return [s for s in self.slaves if s.state is state]

    def support(self) -> list[str]:
        return [s.name for s in self._ranked(self.in_state(SlaveState.SUPPORT))]

    def score(self, entry: SlaveEntry) -> Decimal:
        return qos_score(entry.qos, self.weights, self.t_max)

    def _ranked(self, entries: Iterable[SlaveEntry]) -> list[SlaveEntry]:
        # tie-break on the smaller name
        return sorted(entries, key=lambda s: (-self.score(s), s.name))

    def mark_failed(self, name: str) -> None:
        entry = self.slave(name)
        entry.state = SlaveState.FAILED
        log.info("slave %s of %s marked failed", name, self.name)


def extract_context(kb: KnowledgeBase, failed: AnnotatedDescriptor) -> dict[str, Context]:
    """Static context per concept of the failed service; dynamic modifiers are left out."""
    found: dict[str, Context] = {}
    for op, part in failed.iter_parts():
        ctx = static_context(kb, part.annotation)
        previous = found.get(ctx.concept)
        if previous is None:
            found[ctx.concept] = ctx
        elif previous.items() != ctx.items():
            raise ConflictingAnnotations(
                f"{failed.service_name}: concept {ctx.concept} is annotated both "
                f"{previous} and {ctx} (part {op.name}.{part.name})"
            )
    return found


def adopt_context(kb: KnowledgeBase, master: AnnotatedDescriptor, failed: AnnotatedDescriptor) -> AnnotatedDescriptor:
    """Return ``master`` with every part's modifier terms replaced by the failed service's terms."""
    extract_context(kb, failed)
    terms = {}
    for _, part in failed.iter_parts():
        terms.setdefault(part.concept_name, part.annotation.static_terms)
    missing = [c for c in master.concepts() if c not in terms]
    if missing:
        raise ConceptNotCovered(
            f"{failed.service_name} has no context for master concept(s) {', '.join(missing)}"
        )

    def rewrite(op: Operation) -> Operation:
        return replace(
            op,
            inputs=tuple(replace(p, annotation=p.annotation.with_terms(terms[p.concept_name])) for p in op.inputs),
            outputs=tuple(replace(p, annotation=p.annotation.with_terms(terms[p.concept_name])) for p in op.outputs),
        )

    return replace(master, operations=tuple(rewrite(op) for op in master.operations))


def call_for_bids(
    community: Community,
    exclude: Iterable[str] = (),
    responses: Optional[Mapping[str, bool]] = None,
) -> list[BidResponse]:
    """Solicit every slave not in ``exclude``; failed slaves and absent answers count as negative.

    ``responses`` overrides the scripted answers stored on the entries.
    """
    if not community.slaves:
        raise EmptyCommunity(f"community {community.name} has no slaves")
    skip = set(exclude)
    out = []
    for entry in community.slaves:
        if entry.name in skip:
            continue
        answer = entry.bids if responses is None else responses.get(entry.name, False)
        positive = bool(answer) and entry.state is not SlaveState.FAILED
        if positive and entry.state is SlaveState.MEMBER:
            entry.state = SlaveState.BIDDER
        out.append(BidResponse(entry.name, positive))
    return out


def qos_score(q: QoS, weights: Weights = DEFAULT_WEIGHTS, t_max: float = 1000.0) -> Decimal:
    wa, wr, wt = (_dec(w) for w in weights)
    if min(wa, wr, wt) < 0 or wa + wr + wt <= 0:
        raise InvalidWeights(f"weights must be nonnegative with a positive sum, got {weights}")
    rt, limit = _dec(q.response_time), _dec(t_max)
    if not 0 < rt <= limit:
        raise OutOfRange(f"response time {rt} ms outside (0, {limit}]")
    return wa * _dec(q.availability) + wr * _dec(q.reliability) + wt * (1 - rt / limit)


def select_substitute(
    community: Community,
    bids: Iterable[BidResponse],
    weights: Optional[Weights] = None,
    t_max: Optional[float] = None,
) -> tuple[str, list[str]]:
    if weights is not None:
        community.weights = tuple(weights)
    if t_max is not None:
        community.t_max = t_max
    positive = {b.slave_name for b in bids if b.positive}
    if not positive:
        raise NoBidders(f"no slave of {community.name} answered the call for bids")
    ranked = community._ranked(community.slave(n) for n in positive)
    for entry in community.slaves:
        if entry.state in (SlaveState.PRIMARY, SlaveState.SUPPORT, SlaveState.BIDDER):
            entry.state = SlaveState.MEMBER
    ranked[0].state = SlaveState.PRIMARY
    for entry in ranked[1:]:
        entry.state = SlaveState.SUPPORT
    community.primary = ranked[0].name
    return ranked[0].name, [e.name for e in ranked[1:]]


def promote_support(community: Community) -> str:
    if community.primary is not None and community.slave(community.primary).state is not SlaveState.FAILED:
        raise CommunityError(f"primary {community.primary} of {community.name} has not failed")
    candidates = community._ranked(community.in_state(SlaveState.SUPPORT))
    if not candidates:
        raise NoSupportAvailable(f"community {community.name} has no support slave left")
    candidates[0].state = SlaveState.PRIMARY
    community.primary = candidates[0].name
    return candidates[0].name


class Rebindable(Protocol):
    substituted: bool
    recovered: bool

    def rebind_original(self) -> None: ...


def reinstate_original(community: Community, binding: Rebindable) -> None:
    """Hand the step back to the recovered original service.

    The master keeps its adopted context: it already equals the original's.
    """
    if not binding.substituted:
        return
    if not binding.recovered:
        raise NotRecovered("the original service has not recovered")
    binding.rebind_original()
    for entry in community.slaves:
        if entry.state in (SlaveState.PRIMARY, SlaveState.SUPPORT, SlaveState.BIDDER):
            entry.state = SlaveState.MEMBER
    community.primary = None


def availability_downtime(percent) -> float:
    """Days of downtime per year allowed by an availability percentage (99 -> 3.65)."""
    p = _dec(percent)
    if not p.is_finite() or not 0 <= p <= 100:
        raise OutOfRange(f"availability must lie in [0, 100], got {percent}")
    return float(Decimal(365) * (100 - p) / 100)
