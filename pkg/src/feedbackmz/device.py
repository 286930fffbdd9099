"""Optical devices as directed multigraphs, and single-photon history enumeration.

Nodes are sources, beam splitters (two in/out ports, a 2x2 unitary),
phase shifters (a pure delay), mirrors (a reflection coefficient) and
detectors. Edges carry a propagation delay. Directed cycles must pass
through a mirror; the number of mirror reflections along a path is its
pass count, which bounds the enumeration.
"""

import math
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

import numpy as np

from .errors import ParameterError, ValidationError
from .network import UnitaryMatrix, paper_beam_splitter
from .wavepacket import zeta

SOURCE = "source"
BEAM_SPLITTER = "beam_splitter"
PHASE_SHIFTER = "phase_shifter"
MIRROR = "mirror"
DETECTOR = "detector"
NODE_KINDS = (SOURCE, BEAM_SPLITTER, PHASE_SHIFTER, MIRROR, DETECTOR)

# (in-degree, out-degree) required for each kind
_DEGREES = {
    SOURCE: (0, 1),
    BEAM_SPLITTER: (2, 2),
    PHASE_SHIFTER: (1, 1),
    MIRROR: (1, 1),
    DETECTOR: (1, 0),
}


@dataclass(frozen=True)
class Node:
    name: str
    kind: str
    unitary: UnitaryMatrix = None
    delay: float = 0.0
    reflectivity: complex = -1.0


def source(name):
    return Node(name, SOURCE)


def beam_splitter(name, unitary=None):
    return Node(name, BEAM_SPLITTER, unitary=unitary or paper_beam_splitter())


def phase_shifter(name, delay):
    return Node(name, PHASE_SHIFTER, delay=delay)


def mirror(name, reflectivity=-1.0):
    return Node(name, MIRROR, reflectivity=complex(reflectivity))


def detector(name):
    return Node(name, DETECTOR)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    delay: float = 0.0
    src_port: int = 0
    dst_port: int = 0


@dataclass(frozen=True)
class Diagnostic:
    node: str
    rule: str
    message: str

    def __str__(self):
        return f"{self.node}: [{self.rule}] {self.message}"


@dataclass(frozen=True, eq=False)
class DeviceSpec:
    nodes: tuple
    edges: tuple
    inputs: tuple
    detectors: tuple
    name: str = "custom"
    _index: dict = field(init=False, repr=False)
    _out: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        index = {}
        for k, node in enumerate(self.nodes):
            index.setdefault(node.name, k)
        out = {}
        for edge in self.edges:
            out.setdefault(edge.src, []).append(edge)
        for name in out:
            out[name].sort(key=lambda e: (e.src_port, index.get(e.dst, len(index)), e.dst_port))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})

    def node(self, name):
        try:
            return self.nodes[self._index[name]]
        except KeyError:
            raise ParameterError(f"no node named {name!r} in device {self.name!r}") from None

    def index(self, name):
        return self._index[name]

    def out_edges(self, name):
        return self._out.get(name, ())


def validate_device(spec):
    """Return a list of Diagnostic; empty when every structural rule holds."""
    diags = []
    seen = set()
    for node in spec.nodes:
        if node.name in seen:
            diags.append(Diagnostic(node.name, "unique-name", "node name is used more than once"))
        seen.add(node.name)
        if node.kind not in NODE_KINDS:
            diags.append(Diagnostic(node.name, "kind", f"unknown node kind {node.kind!r}"))
        elif node.kind == BEAM_SPLITTER:
            if not isinstance(node.unitary, UnitaryMatrix) or node.unitary.dim != 2:
                diags.append(Diagnostic(node.name, "splitter-matrix", "beam splitter needs a 2x2 UnitaryMatrix"))
        elif node.kind == PHASE_SHIFTER:
            if not (math.isfinite(node.delay) and node.delay >= 0):
                diags.append(Diagnostic(node.name, "delay", f"phase-shifter delay must be >= 0, got {node.delay}"))
        elif node.kind == MIRROR:
            r = complex(node.reflectivity)
            if not (math.isfinite(r.real) and math.isfinite(r.imag)) or abs(r) > 1 + 1e-12:
                diags.append(Diagnostic(node.name, "reflectivity", f"mirror needs |r| <= 1, got {r}"))

    ins = {n.name: [] for n in spec.nodes}
    outs = {n.name: [] for n in spec.nodes}
    for k, edge in enumerate(spec.edges):
        label = f"{edge.src}->{edge.dst}"
        bad = False
        for end in (edge.src, edge.dst):
            if end not in ins:
                diags.append(Diagnostic(end, "edge-endpoint", f"edge {k} ({label}) references an unknown node"))
                bad = True
        if not (math.isfinite(edge.delay) and edge.delay >= 0):
            diags.append(Diagnostic(edge.src, "edge-delay", f"edge {k} ({label}) has delay {edge.delay} < 0"))
        if not bad:
            outs[edge.src].append(edge.src_port)
            ins[edge.dst].append(edge.dst_port)

    for node in spec.nodes:
        if node.kind not in _DEGREES:
            continue
        want_in, want_out = _DEGREES[node.kind]
        for what, ports, want in (("in", ins[node.name], want_in), ("out", outs[node.name], want_out)):
            if len(ports) != want:
                diags.append(Diagnostic(node.name, f"{what}-degree",
                                        f"{node.kind} needs {want} {what}-edges, has {len(ports)}"))
            elif sorted(ports) != list(range(want)):
                diags.append(Diagnostic(node.name, f"{what}-ports",
                                        f"{what}-edges must use ports {list(range(want))}, got {sorted(ports)}"))

    for name in spec.inputs:
        if name not in ins or spec.node(name).kind != SOURCE:
            diags.append(Diagnostic(name, "input-port", "designated input is not a source node"))
    for name in spec.detectors:
        if name not in ins or spec.node(name).kind != DETECTOR:
            diags.append(Diagnostic(name, "detector-port", "designated detector is not a detector node"))

    # every directed cycle must contain a mirror: the mirror-free subgraph is a DAG
    graph = TopologicalSorter()
    for edge in spec.edges:
        if edge.src in ins and edge.dst in ins:
            if MIRROR not in (spec.node(edge.src).kind, spec.node(edge.dst).kind):
                graph.add(edge.dst, edge.src)
    try:
        graph.prepare()
    except CycleError as exc:
        cycle = exc.args[1]
        diags.append(Diagnostic(cycle[0], "mirror-cycle",
                                "directed cycle without a mirror: " + " -> ".join(cycle)))
    return diags


def check_device(spec):
    diags = validate_device(spec)
    if diags:
        raise ValidationError("invalid device:\n" + "\n".join(str(d) for d in diags))
    return spec


@dataclass(frozen=True)
class HistoryAmplitude:
    """One single-photon path from a source to a detector."""

    nodes: tuple
    ports: tuple
    pass_count: int
    total_delay: float
    weight: complex
    splitter_count: int = 0
    mirror_count: int = 0
    shifter_count: int = 0
    shifter_delay: float = 0.0

    @property
    def source(self):
        return self.nodes[0]

    @property
    def detector(self):
        return self.nodes[-1]


def enumerate_histories(spec, source, detector, max_passes):
    """All paths ``source -> detector`` with at most ``max_passes`` mirror reflections.

    Paths through zero matrix elements are dropped. Output is sorted by the
    node-index sequence, then by the port sequence.
    """
    if isinstance(max_passes, bool) or not isinstance(max_passes, (int, np.integer)) or max_passes < 0:
        raise ParameterError(f"max_passes must be a non-negative integer, got {max_passes!r}")
    if source not in spec.inputs or spec.node(source).kind != SOURCE:
        raise ParameterError(f"{source!r} is not an input port of device {spec.name!r}")
    if detector not in spec.detectors or spec.node(detector).kind != DETECTOR:
        raise ParameterError(f"{detector!r} is not a detector port of device {spec.name!r}")

    found = []
    # iterative DFS; frame = (edge, nodes, ports, weight, delay, passes, n_bs, n_mirror, n_ps, ps_delay)
    stack = [(e, (source,), (e.src_port,), 1.0 + 0j, 0.0, 0, 0, 0, 0, 0.0)
             for e in reversed(spec.out_edges(source))]
    while stack:
        edge, nodes, ports, weight, delay, passes, n_bs, n_mir, n_ps, ps_delay = stack.pop()
        node = spec.node(edge.dst)
        nodes = nodes + (node.name,)
        delay = delay + edge.delay
        if node.kind == DETECTOR:
            if node.name == detector:
                found.append(HistoryAmplitude(nodes, ports, passes, delay, weight,
                                              n_bs, n_mir, n_ps, ps_delay))
            continue
        if node.kind == MIRROR:
            passes += 1
            n_mir += 1
            if passes > max_passes:
                continue
            weight = weight * node.reflectivity
        elif node.kind == PHASE_SHIFTER:
            delay = delay + node.delay
            n_ps += 1
            ps_delay = ps_delay + node.delay
        nxt = []
        for out in spec.out_edges(node.name):
            w = weight
            nb = n_bs
            if node.kind == BEAM_SPLITTER:
                coeff = node.unitary.entries[out.src_port, edge.dst_port]
                if coeff == 0:
                    continue
                w = weight * coeff
                nb += 1
            nxt.append((out, nodes, ports + (out.src_port,), w, delay, passes, nb, n_mir, n_ps, ps_delay))
        stack.extend(reversed(nxt))

    def key(h):
        return tuple(spec.index(n) for n in h.nodes), h.ports

    found.sort(key=key)
    return found


@dataclass(frozen=True)
class HistoryClass:
    """Histories that differ only in how often they cross phase shifters.

    ``coefficients[k]`` is the summed weight of members with ``k`` shifter
    crossings, so the class field is ``sum_k c_k zeta(t - base_delay - k dtau)``
    when all shifters share one delay.
    """

    base_delay: float
    coefficients: tuple
    members: tuple

    @property
    def vanishes(self):
        return all(abs(c) < 1e-15 for c in self.coefficients)


def group_histories(histories):
    """Group histories by the path delay left after removing shifter delays."""
    groups = {}
    for h in histories:
        key = round(h.total_delay - h.shifter_delay, 9)
        groups.setdefault(key, []).append(h)
    out = []
    for key in sorted(groups):
        members = tuple(groups[key])
        coeffs = [0j] * (max(h.shifter_count for h in members) + 1)
        for h in members:
            coeffs[h.shifter_count] += h.weight
        base = members[0].total_delay - members[0].shifter_delay
        out.append(HistoryClass(base, tuple(coeffs), members))
    return out


def history_field(h, p, detection_time):
    """Contribution ``weight * zeta(t - total_delay)`` of one history."""
    return h.weight * zeta(p, np.asarray(detection_time, dtype=float) - h.total_delay)


def single_photon_field(histories, p, t):
    """Sum of history fields at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    total = np.zeros(t.shape, dtype=complex)
    for h in histories:
        total = total + history_field(h, p, t)
    return total if total.ndim else complex(total)


def route_delay(spec, nodes, ports):
    """Total delay along an explicit route, given node names and out-ports."""
    total = 0.0
    for k in range(len(nodes) - 1):
        here, there, port = nodes[k], nodes[k + 1], ports[k]
        node = spec.node(here)
        if node.kind == PHASE_SHIFTER:
            total += node.delay
        match = [e for e in spec.out_edges(here) if e.dst == there and e.src_port == port]
        if len(match) != 1:
            raise ParameterError(f"no unique edge {here}[{port}] -> {there}")
        total += match[0].delay
    return total


# -- presets ------------------------------------------------------------------

@dataclass(frozen=True)
class Fig1Params:
    """Feedback interferometer settings.

    ``input_delay`` is the relative arrival delay of the two photons at
    detector 1 after one traversal. ``loop_delay`` is the round trip through
    the feedback coupler and mirror at zero input delay; every fixed path
    length scales with it.
    """

    input_delay: float = 0.0
    shifter_delay: float = 0.5
    loop_delay: float = 76.0
    mirror_reflectivity: complex = -1.0

    def __post_init__(self):
        for name in ("input_delay", "shifter_delay", "loop_delay"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real number, got {value!r}")
        if self.shifter_delay < 0:
            raise ParameterError(f"shifter_delay must be >= 0, got {self.shifter_delay}")
        if self.loop_delay < 0:
            raise ParameterError(f"loop_delay must be >= 0, got {self.loop_delay}")
        r = complex(self.mirror_reflectivity)
        if abs(r) > 1 + 1e-12:
            raise ParameterError(f"mirror_reflectivity needs |r| <= 1, got {r}")

    def replace(self, **changes):
        fields = dict(input_delay=self.input_delay, shifter_delay=self.shifter_delay,
                      loop_delay=self.loop_delay, mirror_reflectivity=self.mirror_reflectivity)
        fields.update(changes)
        return Fig1Params(**fields)


# Fixed path lengths in units of loop_delay / 76. The integers keep every
# history class outside the two interfering ones at least 26 loop units away
# from the detection gate for input and shifter delays up to 6 units.
_FIG1_LOOP_UNITS = 76
# (src, src_port, dst, dst_port, length units, carries the input delay)
_FIG1_EDGES = (
    ("in1", 0, "mz_a", 0, 79, False),
    ("in2", 0, "fb", 0, 1, False),
    ("mz_a", 0, "mz_b", 0, 0, False),
    ("mz_a", 1, "shifter", 0, 0, False),
    ("shifter", 0, "mz_b", 1, 0, False),
    ("mz_b", 0, "mix", 0, 80, True),
    ("mz_b", 1, "mix", 1, 42, False),
    ("fb", 0, "out", 1, 1, True),
    ("fb", 1, "mz_a", 1, 40, False),
    ("mix", 0, "det1", 0, 1, False),
    ("mix", 1, "out", 0, 80, False),
    ("out", 0, "mirror", 0, 75, False),
    ("mirror", 0, "fb", 1, 0, False),
    ("out", 1, "det2", 0, 1, False),
)

# one-traversal route of photon 1 to detector 1 and its two-traversal route
# to detector 2; the detection gate is read off these
_FIG1_GATE_ROUTES = {
    "det1": (("in1", "mz_a", "mz_b", "mix", "det1"), (0, 0, 1, 0)),
    "det2": (("in1", "mz_a", "mz_b", "mix", "out", "mirror", "fb", "mz_a", "mz_b", "mix", "out", "det2"),
             (0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 1)),
}


def build_fig1_device(p=None):
    """Recursive Mach-Zehnder feedback interferometer.

    A Mach-Zehnder stage (``mz_a``, ``mz_b``, one arm through ``shifter``)
    feeds a mixing coupler ``mix`` whose second output returns, via coupler
    ``out`` and a single mirror, to the feedback coupler ``fb`` and so back
    into the stage. Photon 1 enters at ``in1``, photon 2 at ``in2``.

    ``fb`` is a 50:50 coupler with a pi phase on its first output. That
    phase compensates the odd difference in mirror reflections between the
    two interfering processes when ``r = -1``.
    """
    p = p or Fig1Params()
    unit = p.loop_delay / _FIG1_LOOP_UNITS
    s = 1 / math.sqrt(2)
    nodes = (
        source("in1"), source("in2"),
        beam_splitter("mz_a"), phase_shifter("shifter", p.shifter_delay), beam_splitter("mz_b"),
        beam_splitter("fb", UnitaryMatrix(np.array([[s, -s], [s, s]], dtype=complex))),
        beam_splitter("mix"), beam_splitter("out"),
        mirror("mirror", p.mirror_reflectivity),
        detector("det1"), detector("det2"),
    )
    edges = tuple(
        Edge(a, b, units * unit + (p.input_delay if tau else 0.0), pa, pb)
        for a, pa, b, pb, units, tau in _FIG1_EDGES
    )
    return DeviceSpec(nodes, edges, ("in1", "in2"), ("det1", "det2"), name="fig1")


def fig1_detection_times(p, t0, spec=None):
    """Detection times ``(t1, t2)`` at which the history sum reproduces the
    closed-form law at reference time ``t0``.

    Each is ``t0`` plus the input and shifter delays the closed form carries
    in its arguments, plus the fixed route delay read from the device.
    """
    spec = spec or build_fig1_device(p)
    tau, dtau = p.input_delay, p.shifter_delay
    d1 = route_delay(spec, *_FIG1_GATE_ROUTES["det1"])
    d2 = route_delay(spec, *_FIG1_GATE_ROUTES["det2"])
    # d2 already contains the input delay twice through mz_b -> mix
    return t0 + tau + dtau + d1, t0 + tau + 2 * dtau + d2


def build_beam_splitter_device(unitary=None):
    """One 50:50 coupler between two sources and two detectors."""
    nodes = (source("in1"), source("in2"), beam_splitter("bs", unitary),
             detector("det1"), detector("det2"))
    edges = (Edge("in1", "bs", 0.0, 0, 0), Edge("in2", "bs", 0.0, 0, 1),
             Edge("bs", "det1", 0.0, 0, 0), Edge("bs", "det2", 0.0, 1, 0))
    return DeviceSpec(nodes, edges, ("in1", "in2"), ("det1", "det2"), name="beam_splitter")


def build_pass_through_device(delay1=0.0, delay2=0.0):
    """Two independent lines: each photon reaches its own detector by one route."""
    nodes = (source("in1"), source("in2"), detector("det1"), detector("det2"))
    edges = (Edge("in1", "det1", delay1), Edge("in2", "det2", delay2))
    return DeviceSpec(nodes, edges, ("in1", "in2"), ("det1", "det2"), name="pass_through")


PRESETS = {
    "fig1": build_fig1_device,
    "beam_splitter": lambda p=None: build_beam_splitter_device(),
    "pass_through": lambda p=None: build_pass_through_device(),
}


def preset(name, params=None):
    try:
        builder = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
    return builder(params)
