"""Process graphs over simulated services: mediation, watchdog, substitution and verification.

The composition is a sequence of steps. Each step is bound either to its
original service or, after a failure, to a community proxy fronted by the
community master. Data edges connect an output part of one step to an input
part of a later one; a mediator converts values on edges whose endpoint
contexts differ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .community import (
    Community,
    adopt_context,
    call_for_bids,
    promote_support,
    reinstate_original,
    select_substitute,
)
from .context import Context, context_equal
from .descriptor import AnnotatedDescriptor, ContextAnnotation, Direction, MessagePart
from .errors import (
    CommunityError,
    CtxMedError,
    NoBidders,
    NoCommunity,
    NotFound,
    ScenarioError,
    ServiceFailure,
    UnboundStep,
)
from .mediation import convert, needs_mediation, render_value
from .ontology import KnowledgeBase, full_context
from .semantic_object import SemanticObject, build_semantic_object

log = logging.getLogger(__name__)

EVENT_KINDS = (
    "INVOKE", "MEDIATE", "FAIL", "CFP", "BID", "SELECT", "ADOPT", "CONVERT", "REBIND", "PROMOTE", "CHECK",
)


@dataclass
class ServiceStub:
    """A simulated service answering with canned outputs.

    ``failure_schedule`` holds 1-based invocation numbers that fail;
    ``recovery_at`` is the round from which a failed service is usable again.
    """

    descriptor: AnnotatedDescriptor
    canned_outputs: Mapping[tuple[str, str], str]
    failure_schedule: frozenset[int] = frozenset()
    recovery_at: Optional[int] = None
    invocations: int = 0

    @property
    def name(self) -> str:
        return self.descriptor.service_name

    def invoke(self, op_name: str, inputs: Mapping[str, str]) -> dict[str, str]:
        op = self.descriptor.operation(op_name)
        self.invocations += 1
        if self.invocations in self.failure_schedule:
            raise ServiceFailure(f"{self.name} failed at invocation {self.invocations}")
        return {p.name: self.canned_outputs[(op_name, p.name)] for p in op.outputs}


@dataclass(frozen=True)
class Step:
    id: str
    service: str
    operation: str


@dataclass(frozen=True)
class DataEdge:
    from_step: str
    from_part: str
    to_step: str
    to_part: str
    concept: str

    def __str__(self) -> str:
        return f"{self.from_step}.{self.from_part}->{self.to_step}.{self.to_part}"


@dataclass(frozen=True)
class MediatorNode:
    edge: DataEdge
    source_context: Context
    target_context: Context


@dataclass
class CommunityProxy:
    """Community endpoint standing in for a failed service.

    Its parts expose the master's annotations (adopted or not); calls are
    forwarded to the community's current primary slave with conversion both ways.
    """

    community: Community
    interface: AnnotatedDescriptor

    @property
    def master(self) -> AnnotatedDescriptor:
        return self.community.master

    @property
    def label(self) -> str:
        return f"proxy({self.master.service_name}/{self.community.primary})"


@dataclass
class Binding:
    service: str
    proxy: Optional[CommunityProxy] = None
    recovered: bool = False

    @property
    def substituted(self) -> bool:
        return self.proxy is not None

    def rebind_original(self) -> None:
        self.proxy = None

    @property
    def label(self) -> str:
        return self.proxy.label if self.proxy else self.service


@dataclass
class ProcessGraph:
    steps: tuple[Step, ...]
    edges: tuple[DataEdge, ...]
    interfaces: Mapping[str, AnnotatedDescriptor]
    mediators: tuple[MediatorNode, ...] = ()
    bindings: dict[str, Binding] = field(default_factory=dict)

    def __post_init__(self) -> None:
        order = {s.id: i for i, s in enumerate(self.steps)}
        if len(order) != len(self.steps):
            raise ValueError("duplicate step ids")
        for e in self.edges:
            if e.from_step not in order or e.to_step not in order:
                raise ValueError(f"edge {e} references an unknown step")
            # execution follows step order, so edges must point forward
            if order[e.from_step] >= order[e.to_step]:
                raise ValueError(f"edge {e} does not follow step order")
        for s in self.steps:
            self.bindings.setdefault(s.id, Binding(s.service))

    def step(self, step_id: str) -> Step:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise UnboundStep(f"no step {step_id!r}")

    def mediator_for(self, edge: DataEdge) -> Optional[MediatorNode]:
        for m in self.mediators:
            if m.edge == edge:
                return m
        return None

    def copy(self) -> ProcessGraph:
        return replace(self, bindings={k: replace(b) for k, b in self.bindings.items()})

    def endpoint_part(self, step_id: str, part_name: str, direction: Direction) -> MessagePart:
        step = self.step(step_id)
        iface = self.interfaces.get(step_id)
        if iface is None:
            raise UnboundStep(f"step {step_id!r} has no bound descriptor")
        return iface.operation(step.operation).part(part_name, direction)

    def endpoint_annotation(self, step_id: str, part_name: str, direction: Direction) -> ContextAnnotation:
        part = self.endpoint_part(step_id, part_name, direction)
        binding = self.bindings.get(step_id)
        if binding is None:
            raise UnboundStep(f"step {step_id!r} is not bound")
        if binding.proxy is None:
            return part.annotation
        return part_for_concept(binding.proxy.master, part.concept_name, direction).annotation


def part_for_concept(d: AnnotatedDescriptor, concept: str, direction: Direction) -> MessagePart:
    """First part of ``d`` annotated with ``concept``, preferring the given direction."""
    parts = [p for _, p in d.iter_parts() if p.concept_name == concept]
    for p in parts:
        if p.direction == direction:
            return p
    if parts:
        return parts[0]
    raise NotFound(f"{d.service_name} has no part for concept {concept}")


def build_graph(
    steps: Iterable[Step],
    edges: Iterable[tuple[str, str]],
    descriptors: Mapping[str, AnnotatedDescriptor],
) -> ProcessGraph:
    """Assemble a graph from ``step.part`` edge references; concepts come from the annotations."""
    steps = tuple(steps)
    by_id = {s.id: s for s in steps}
    interfaces = {}
    for s in steps:
        if s.service not in descriptors:
            raise UnboundStep(f"step {s.id!r} is bound to unknown service {s.service!r}")
        interfaces[s.id] = descriptors[s.service]
    data_edges = []
    for src, dst in edges:
        (fs, _, fp), (ts, _, tp) = src.partition("."), dst.partition(".")
        if fs not in by_id or ts not in by_id:
            raise UnboundStep(f"edge {src} -> {dst} references an unknown step")
        out_part = interfaces[fs].operation(by_id[fs].operation).part(fp, Direction.OUTPUT)
        in_part = interfaces[ts].operation(by_id[ts].operation).part(tp, Direction.INPUT)
        if out_part.concept_name != in_part.concept_name:
            raise ValueError(f"edge {src} -> {dst} joins {out_part.concept_name} to {in_part.concept_name}")
        data_edges.append(DataEdge(fs, fp, ts, tp, out_part.concept_name))
    return ProcessGraph(steps, tuple(data_edges), interfaces)


def edge_contexts(kb: KnowledgeBase, graph: ProcessGraph, edge: DataEdge) -> tuple[Context, Context]:
    src = full_context(kb, graph.endpoint_annotation(edge.from_step, edge.from_part, Direction.OUTPUT))
    dst = full_context(kb, graph.endpoint_annotation(edge.to_step, edge.to_part, Direction.INPUT))
    return src, dst


def detect_conflicts(kb: KnowledgeBase, graph: ProcessGraph) -> list[DataEdge]:
    """Edges whose endpoint contexts differ and are not reconciled by their mediator.

    A mediator only reconciles the contexts it was inserted for; if an
    endpoint's context changed since (e.g. after substitution) the edge is
    in conflict again.
    """
    out = []
    for edge in graph.edges:
        src, dst = edge_contexts(kb, graph, edge)
        mediator = graph.mediator_for(edge)
        if mediator is None:
            if needs_mediation(src, dst):
                out.append(edge)
        elif not (context_equal(mediator.source_context, src) and context_equal(mediator.target_context, dst)):
            out.append(edge)
    return out


def insert_mediators(kb: KnowledgeBase, graph: ProcessGraph) -> ProcessGraph:
    added = []
    for edge in graph.edges:
        if graph.mediator_for(edge) is not None:
            continue
        src, dst = edge_contexts(kb, graph, edge)
        if needs_mediation(src, dst):
            added.append(MediatorNode(edge, src, dst))
    if not added:
        return graph
    new = graph.copy()
    new.mediators = graph.mediators + tuple(added)
    return new


def verify_consistency(kb: KnowledgeBase, graph: ProcessGraph) -> bool:
    return not detect_conflicts(kb, graph)


@dataclass(frozen=True)
class TraceEvent:
    idx: int
    kind: str
    subject: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.idx} {self.kind} {self.subject} {self.detail}".rstrip()


class Trace:
    """Append-only event log."""

    def __init__(self) -> None:
        self.events: list[TraceEvent] = []

    def emit(self, kind: str, subject: str, detail: str = "") -> TraceEvent:
        assert kind in EVENT_KINDS, kind
        event = TraceEvent(len(self.events), kind, subject, detail)
        self.events.append(event)
        log.debug(event.line())
        return event

    def kinds(self) -> list[str]:
        return [e.kind for e in self.events]

    def render(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)


def _annotation_detail(d: AnnotatedDescriptor) -> str:
    seen: dict[str, str] = {}
    for _, p in d.iter_parts():
        seen.setdefault(p.concept_name, str(p.annotation))
    return " ".join(f"{c}='{a}'" for c, a in seen.items())


def substitute(
    kb: KnowledgeBase,
    graph: ProcessGraph,
    failed_step: str,
    community: Optional[Community],
    adopt: bool = True,
    trace: Optional[Trace] = None,
    detail: str = "",
) -> tuple[ProcessGraph, list[TraceEvent]]:
    """Replace the failed step's service by a community member.

    Events, in order: FAIL, CFP, BID per solicited slave, ADOPT (unless
    ``adopt`` is off), SELECT, REBIND. The step is rebound to a community
    proxy whose endpoints expose the master's (adopted) context.
    """
    trace = trace if trace is not None else Trace()
    start = len(trace.events)
    step = graph.step(failed_step)
    binding = graph.bindings[failed_step]
    failed = graph.interfaces[failed_step]
    trace.emit("FAIL", binding.service, detail or f"step={failed_step}")
    if community is None or community.functionality != failed.functionality:
        raise NoCommunity(f"no community offers {failed.functionality!r} for step {step.id}")

    trace.emit("CFP", community.master.service_name, f"community={community.name}")
    bids = call_for_bids(community, exclude=[binding.service])
    for bid in bids:
        trace.emit("BID", bid.slave_name, "positive" if bid.positive else "negative")
    if not any(b.positive for b in bids):
        raise NoBidders(f"no slave of {community.name} answered the call for bids")

    if adopt:
        before = community.master
        community.master = adopt_context(kb, community.master, failed)
        trace.emit(
            "ADOPT",
            community.master.service_name,
            f"from={failed.service_name} {_annotation_detail(before)} => {_annotation_detail(community.master)}",
        )

    primary, support = select_substitute(community, bids)
    score = community.score(community.slave(primary))
    trace.emit("SELECT", primary, f"score={score} support=[{','.join(support)}]")

    new = graph.copy()
    new.bindings[failed_step] = Binding(binding.service, CommunityProxy(community, failed))
    trace.emit("REBIND", failed_step, f"{binding.service} -> {new.bindings[failed_step].label}")
    return new, trace.events[start:]


@dataclass
class Scenario:
    """Everything a run needs: stubs, communities, the process and run options."""

    services: dict[str, ServiceStub]
    communities: list[Community]
    steps: tuple[Step, ...]
    edges: tuple[tuple[str, str], ...]
    inputs: dict[tuple[str, str], str] = field(default_factory=dict)
    rounds: int = 1
    seed: int = 0
    adopt: bool = True

    def community_for(self, functionality: str) -> Optional[Community]:
        for c in self.communities:
            if c.functionality == functionality:
                return c
        return None

    def graph(self) -> ProcessGraph:
        return build_graph(self.steps, self.edges, {n: s.descriptor for n, s in self.services.items()})


@dataclass
class ExecutionTrace:
    trace: Trace
    graph: ProcessGraph
    # per round: "step.part" -> value delivered to that input
    delivered: list[dict[str, str]]
    conflicts: list[DataEdge]

    @property
    def events(self) -> list[TraceEvent]:
        return self.trace.events

    @property
    def consistent(self) -> bool:
        return not self.conflicts

    def render(self) -> str:
        return self.trace.render()

    def final_values(self) -> dict[str, str]:
        return self.delivered[-1] if self.delivered else {}


class _Engine:
    def __init__(self, kb: KnowledgeBase, graph: ProcessGraph, scenario: Scenario) -> None:
        self.kb = kb
        self.graph = graph
        self.scenario = scenario
        self.trace = Trace()
        # edges that carried a value into a mismatched context at some round
        self.observed: list[DataEdge] = []

    def run(self) -> ExecutionTrace:
        delivered = []
        for rnd in range(1, self.scenario.rounds + 1):
            self._reinstate(rnd)
            delivered.append(self._round(rnd))
        conflicts = list(self.observed)
        conflicts += [e for e in detect_conflicts(self.kb, self.graph) if e not in conflicts]
        conflicts.sort(key=str)
        verdict = "CONSISTENT" if not conflicts else "INCONSISTENT " + ",".join(map(str, conflicts))
        self.trace.emit("CHECK", "composition", verdict)
        return ExecutionTrace(self.trace, self.graph, delivered, conflicts)

    def _reinstate(self, rnd: int) -> None:
        for step in self.graph.steps:
            binding = self.graph.bindings[step.id]
            stub = self.scenario.services[binding.service]
            if not binding.substituted or stub.recovery_at is None or rnd < stub.recovery_at:
                continue
            binding.recovered = True
            label = binding.label
            reinstate_original(binding.proxy.community, binding)
            self.trace.emit("REBIND", step.id, f"{label} -> {binding.service} round={rnd}")

    def _round(self, rnd: int) -> dict[str, str]:
        values: dict[tuple[str, str], SemanticObject] = {}
        delivered: dict[str, str] = {}
        for step in self.graph.steps:
            inputs = self._gather(step, values)
            for part, obj in inputs.items():
                delivered[f"{step.id}.{part}"] = render_value(obj)
            outputs = self._invoke(step, inputs, rnd)
            for part, obj in outputs.items():
                values[(step.id, part)] = obj
        return delivered

    def _gather(self, step: Step, values) -> dict[str, SemanticObject]:
        inputs: dict[str, SemanticObject] = {}
        iface = self.graph.interfaces[step.id]
        for (sid, part_name), raw in self.scenario.inputs.items():
            if sid != step.id:
                continue
            part = iface.operation(step.operation).part(part_name, Direction.INPUT)
            obj = build_semantic_object(self.kb, part, raw)
            inputs[part_name] = self._arrive(obj, step.id, part_name, f"input {step.id}.{part_name}")
        for edge in self.graph.edges:
            if edge.to_step != step.id:
                continue
            obj = values[(edge.from_step, edge.from_part)]
            mediator = self.graph.mediator_for(edge)
            if mediator is not None and context_equal(mediator.source_context, obj.context):
                self.trace.emit("MEDIATE", str(edge), edge.concept)
                obj = self._convert(obj, mediator.target_context, f"mediator {edge}")
            inputs[edge.to_part] = self._arrive(obj, step.id, edge.to_part, str(edge), edge)
        return inputs

    def _arrive(
        self, obj: SemanticObject, step_id: str, part: str, where: str, edge: Optional[DataEdge] = None
    ) -> SemanticObject:
        """Hand ``obj`` to an input endpoint, flagging it if the endpoint expects another context."""
        ann = self.graph.endpoint_annotation(step_id, part, Direction.INPUT)
        expected = full_context(self.kb, ann)
        if context_equal(obj.context, expected):
            return obj
        self.trace.emit("CHECK", where, f"conflict {obj.context} vs {expected} value={render_value(obj)}")
        if edge is not None and edge not in self.observed:
            self.observed.append(edge)
        try:
            # read naively in the receiver's context, which is what a composition without mediation does
            return SemanticObject(obj.concept, obj.value, obj.lexical_type, expected)
        except ValueError:
            return obj

    def _convert(self, obj: SemanticObject, target: Context, where: str) -> SemanticObject:
        out, report = convert(self.kb, obj, target)
        changes = "; ".join(report.lines())
        self.trace.emit("CONVERT", where, f"{render_value(obj)} -> {render_value(out)}" + (f" [{changes}]" if changes else ""))
        return out

    def _invoke(self, step: Step, inputs, rnd: int) -> dict[str, SemanticObject]:
        binding = self.graph.bindings[step.id]
        if binding.proxy is None:
            stub = self.scenario.services[binding.service]
            self.trace.emit("INVOKE", step.id, f"{stub.name}.{step.operation} round={rnd}")
            try:
                raw = stub.invoke(step.operation, {k: render_value(v) for k, v in inputs.items()})
            except ServiceFailure as exc:
                log.info("watchdog: %s", exc)
                self._substitute(step, f"step={step.id} invocation={stub.invocations} round={rnd}")
            else:
                op = stub.descriptor.operation(step.operation)
                return {p.name: build_semantic_object(self.kb, p, raw[p.name]) for p in op.outputs}
        return self._invoke_proxy(step, inputs, rnd)

    def _substitute(self, step: Step, detail: str) -> None:
        failed = self.graph.interfaces[step.id]
        community = self.scenario.community_for(failed.functionality)
        try:
            self.graph, _ = substitute(
                self.kb, self.graph, step.id, community, adopt=self.scenario.adopt, trace=self.trace, detail=detail
            )
        except CommunityError as exc:
            raise ScenarioError(f"cannot replace {failed.service_name}: {exc}") from exc

    def _invoke_proxy(self, step: Step, inputs, rnd: int) -> dict[str, SemanticObject]:
        proxy = self.graph.bindings[step.id].proxy
        community = proxy.community
        while True:
            slave = community.slave(community.primary)
            stub = self.scenario.services[slave.name]
            try:
                return self._through_proxy(step, proxy, stub, inputs, rnd)
            except ServiceFailure as exc:
                log.info("watchdog: %s", exc)
                community.mark_failed(slave.name)
                self.trace.emit("FAIL", slave.name, f"step={step.id} invocation={stub.invocations} round={rnd}")
                try:
                    promoted = promote_support(community)
                except CommunityError as err:
                    raise ScenarioError(f"cannot replace {slave.name}: {err}") from err
                self.trace.emit("PROMOTE", promoted, f"replaces={slave.name} support=[{','.join(community.support())}]")

    def _through_proxy(self, step: Step, proxy: CommunityProxy, stub: ServiceStub, inputs, rnd: int):
        master = proxy.master
        slave_desc = stub.descriptor
        try:
            slave_op = slave_desc.operation(step.operation)
        except NotFound:
            slave_op = slave_desc.operations[0]
        self.trace.emit("INVOKE", step.id, f"{proxy.label} {stub.name}.{slave_op.name} round={rnd}")
        raw_inputs = {}
        for part_name, obj in inputs.items():
            slave_part = part_for_concept(slave_desc, obj.concept, Direction.INPUT)
            target = full_context(self.kb, slave_part.annotation)
            converted = self._convert(obj, target, f"{proxy.label} in {step.id}.{part_name}")
            raw_inputs[slave_part.name] = render_value(converted)
        raw = stub.invoke(slave_op.name, raw_inputs)
        outputs = {}
        iface_op = proxy.interface.operation(step.operation)
        for part in iface_op.outputs:
            slave_part = part_for_concept(slave_desc, part.concept_name, Direction.OUTPUT)
            obj = build_semantic_object(self.kb, slave_part, raw[slave_part.name])
            community_ctx = full_context(self.kb, part_for_concept(master, part.concept_name, Direction.OUTPUT).annotation)
            outputs[part.name] = self._convert(obj, community_ctx, f"{proxy.label} out {step.id}.{part.name}")
        return outputs


def execute(kb: KnowledgeBase, graph: ProcessGraph, scenario: Scenario) -> ExecutionTrace:
    """Run every round of the scenario; the composition acts as the watchdog.

    A failing service is replaced through its community and the step retried;
    a failing primary slave is replaced by the best support slave. Anything
    unrecoverable raises ScenarioError.
    """
    for step in graph.steps:
        if graph.bindings[step.id].service not in scenario.services:
            raise UnboundStep(f"step {step.id!r} has no simulated service")
    try:
        return _Engine(kb, graph.copy(), scenario).run()
    except ScenarioError:
        raise
    except CtxMedError as exc:
        if isinstance(exc, CommunityError):
            raise ScenarioError(str(exc)) from exc
        raise
