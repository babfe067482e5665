"""
Topology Generator
==================
Builds, validates, saves and loads agent interconnection graphs.

Topology families:
1. Ring-k: each agent linked to the degree/2 closest agents on each side of a
   ring ordered by id. Degree m-1 is the fully connected terminal case.
2. Special shapes: chain, ring, fully connected, star chain, ring chain.

Every topology carries two role sets: disconnected agents (never exchange
parameters, pure Self Learning) and empty agents (no local data). Together
they define the agent roles:
- R  (Regular): connected, with data
- D  (Disconnected): disconnected, with data
- E  (Empty): connected, no data
- ED (Empty + Disconnected): control agent, expected random guesser
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

import networkx as nx

logger = logging.getLogger(__name__)

ROLE_R = 'R'
ROLE_D = 'D'
ROLE_E = 'E'
ROLE_ED = 'ED'
ROLES = (ROLE_R, ROLE_D, ROLE_E, ROLE_ED)

SPECIAL_KINDS = ('chain', 'ring', 'fully_connected', 'star_chain', 'ring_chain')

Edge = Tuple[int, int]


class TopologyError(ValueError):
    """Invalid topology or generator parameters"""


class TopologyFormatError(TopologyError):
    """Malformed topology file, reported with the offending line number"""

    def __init__(self, message: str, lineno: int, source: str = '<topology>'):
        super().__init__(f"{source}:{lineno}: {message}")
        self.lineno = lineno
        self.source = source


def role_for(has_data: bool, is_connected: bool) -> str:
    """Map the (has_data, is_connected) pair to its role code"""
    if has_data:
        return ROLE_R if is_connected else ROLE_D
    return ROLE_E if is_connected else ROLE_ED


@dataclass(frozen=True)
class AgentProfile:
    """An agent's identity and role"""
    id: int
    role: str
    has_data: bool
    is_connected: bool

    def __post_init__(self):
        if self.role != role_for(self.has_data, self.is_connected):
            raise TopologyError(
                f"Agent {self.id}: role {self.role} inconsistent with "
                f"has_data={self.has_data}, is_connected={self.is_connected}")


@dataclass(frozen=True)
class Topology:
    """
    Undirected agent graph plus role sets.

    Edges are stored as (a, b) pairs with a < b, so symmetry is structural.
    """
    total_agents: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)
    disconnected: FrozenSet[int] = field(default_factory=frozenset)
    empty: FrozenSet[int] = field(default_factory=frozenset)
    label: str = ''

    def __post_init__(self):
        if self.total_agents < 1:
            raise TopologyError(f"total_agents must be positive, got {self.total_agents}")

        normalized = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"Self-loop on agent {a}")
            self._check_id(a)
            self._check_id(b)
            normalized.add((min(a, b), max(a, b)))
        object.__setattr__(self, 'edges', frozenset(normalized))

        for name in ('disconnected', 'empty'):
            ids = frozenset(int(i) for i in getattr(self, name))
            for agent in ids:
                self._check_id(agent)
            object.__setattr__(self, name, ids)

        for a, b in self.edges:
            if a in self.disconnected or b in self.disconnected:
                raise TopologyError(f"Disconnected agent has edge ({a}, {b})")

    def _check_id(self, agent: int):
        if not 0 <= agent < self.total_agents:
            raise TopologyError(
                f"Agent id {agent} out of range [0, {self.total_agents})")

    @cached_property
    def _adjacency(self) -> Dict[int, Tuple[int, ...]]:
        graph = self.to_networkx()
        return {agent: tuple(sorted(graph.neighbors(agent)))
                for agent in range(self.total_agents)}

    def to_networkx(self) -> nx.Graph:
        """Return the topology as a networkx Graph (nodes 0..total_agents-1)"""
        graph = nx.empty_graph(self.total_agents)
        graph.add_edges_from(sorted(self.edges))
        return graph

    def neighbors(self, agent: int) -> Tuple[int, ...]:
        """Neighbors of an agent, ascending"""
        self._check_id(agent)
        return self._adjacency[agent]

    def degree(self, agent: int) -> int:
        return len(self.neighbors(agent))

    def profile(self, agent: int) -> AgentProfile:
        self._check_id(agent)
        has_data = agent not in self.empty
        is_connected = agent not in self.disconnected
        return AgentProfile(agent, role_for(has_data, is_connected), has_data, is_connected)

    def profiles(self) -> List[AgentProfile]:
        return [self.profile(agent) for agent in range(self.total_agents)]

    @property
    def connected_count(self) -> int:
        return self.total_agents - len(self.disconnected)

    @property
    def agent_number(self) -> str:
        """Agent number notation used in result tables, e.g. '8+2'"""
        return f"{self.connected_count}+{len(self.disconnected)}"


# ==============================================================================
# Generators
# ==============================================================================

def _from_graph(graph: nx.Graph, total_agents: int, label: str) -> Topology:
    return Topology(total_agents=total_agents,
                    edges=frozenset(tuple(sorted(e)) for e in graph.edges()),
                    label=label)


def _total_with_disconnected(m: int, disconnected: Sequence[int]) -> int:
    # Disconnected agents listed beyond the ring are appended after it
    return max([m] + [int(i) + 1 for i in disconnected])


def gen_ring_k(m: int, degree: int, disconnected: Sequence[int] = (),
               empty: Sequence[int] = ()) -> Topology:
    """
    Connect each of m ring agents to its degree/2 closest neighbors on each side.

    Args:
        m: Number of ring agents (ids 0..m-1)
        degree: Even degree, or m-1 for the fully connected graph
        disconnected: Agent ids without edges; ids >= m are appended after the ring
        empty: Agent ids without local data

    Returns:
        Topology labeled 'topo<degree>'
    """
    if m < 2:
        raise TopologyError(f"Ring needs at least 2 agents, got {m}")
    if degree < 0 or degree > m - 1:
        raise TopologyError(f"Degree {degree} outside [0, {m - 1}]")
    if degree % 2 == 1 and degree != m - 1:
        raise TopologyError(
            f"Odd degree {degree} is only allowed for the fully connected case ({m - 1})")

    if degree == m - 1:
        graph = nx.complete_graph(m)
    else:
        graph = nx.circulant_graph(m, range(1, degree // 2 + 1))

    total = _total_with_disconnected(m, disconnected)
    topology = _from_graph(graph, total, f"topo{degree}")
    return annotate(topology, disconnected, empty)


def sweep_degrees(m: int) -> List[int]:
    """Degrees of the topology sweep: 0, 2, 4, ... and finally m-1"""
    if m < 2:
        raise TopologyError(f"Ring needs at least 2 agents, got {m}")
    degrees = list(range(0, m - 1, 2))
    degrees.append(m - 1)
    return degrees


def gen_sweep(m: int, disconnected: Sequence[int] = (),
              empty: Sequence[int] = ()) -> List[Topology]:
    """Generate the full family from the disconnected graph to the complete graph"""
    return [gen_ring_k(m, d, disconnected, empty) for d in sweep_degrees(m)]


def gen_special(kind: str, m: int, disconnected: Sequence[int] = (),
                empty: Sequence[int] = ()) -> Topology:
    """
    Generate one of the special topology shapes over agents 0..m-1.

    star_chain: hub 0 linked to every agent, plus the chain 1-2-...-(m-1).
    ring_chain: ring over the first ceil(m/2) agents, with the remaining
                agents chained off the last ring agent.
    """
    if kind not in SPECIAL_KINDS:
        raise TopologyError(f"Unknown topology kind '{kind}'. Valid kinds: {', '.join(SPECIAL_KINDS)}")
    if m < 2:
        raise TopologyError(f"Topology needs at least 2 agents, got {m}")

    if kind == 'chain':
        graph = nx.path_graph(m)
    elif kind == 'ring':
        graph = nx.cycle_graph(m)
    elif kind == 'fully_connected':
        graph = nx.complete_graph(m)
    elif kind == 'star_chain':
        graph = nx.star_graph(m - 1)
        nx.add_path(graph, range(1, m))
    else:
        ring_size = (m + 1) // 2
        graph = nx.empty_graph(m)
        if ring_size > 2:
            nx.add_cycle(graph, range(ring_size))
        else:
            nx.add_path(graph, range(ring_size))
        nx.add_path(graph, range(ring_size - 1, m))

    total = _total_with_disconnected(m, disconnected)
    return annotate(_from_graph(graph, total, kind), disconnected, empty)


def annotate(t: Topology, disconnected: Iterable[int] = (),
             empty: Iterable[int] = ()) -> Topology:
    """
    Attach role sets to a topology, removing every edge incident to a
    disconnected agent.
    """
    disconnected = frozenset(int(i) for i in disconnected)
    empty = frozenset(int(i) for i in empty)
    for agent in disconnected | empty:
        if not 0 <= agent < t.total_agents:
            raise TopologyError(f"Agent id {agent} out of range [0, {t.total_agents})")

    if not disconnected and not empty:
        return t

    all_disconnected = t.disconnected | disconnected
    edges = frozenset(e for e in t.edges
                      if e[0] not in all_disconnected and e[1] not in all_disconnected)
    return replace(t, edges=edges, disconnected=all_disconnected, empty=t.empty | empty)


# ==============================================================================
# Topology Files
# ==============================================================================

def _format_ids(ids: Iterable[int]) -> str:
    ids = sorted(ids)
    return ' '.join(str(i) for i in ids) if ids else '-'


def dumps(t: Topology) -> str:
    """Serialize a topology to the line-oriented text format"""
    lines = []
    if t.label:
        lines.append(f"# label {t.label}")
    lines.append(f"agents {t.total_agents}")
    lines.append(f"disconnected {_format_ids(t.disconnected)}")
    lines.append(f"empty {_format_ids(t.empty)}")
    for a, b in sorted(t.edges):
        lines.append(f"edge {a} {b}")
    return '\n'.join(lines) + '\n'


def _parse_int(token: str, lineno: int, source: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise TopologyFormatError(f"expected an integer, got '{token}'", lineno, source) from None
    if value < 0:
        raise TopologyFormatError(f"negative agent id {value}", lineno, source)
    return value


def loads(text: str, source: str = '<topology>', default_label: str = '') -> Topology:
    """Parse the text format. Errors carry the offending line number."""
    label = default_label
    total = None
    id_sets = {}
    edges = set()
    expected = ['agents', 'disconnected', 'empty']

    for lineno, raw in enumerate(text.split('\n'), 1):
        stripped = raw.strip()
        if stripped.startswith('# label '):
            label = stripped[len('# label '):].strip()
            continue
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        tokens = line.split()
        keyword, args = tokens[0], tokens[1:]

        if expected:
            if keyword != expected[0]:
                raise TopologyFormatError(f"expected '{expected[0]}', got '{keyword}'", lineno, source)
            expected.pop(0)
            if keyword == 'agents':
                if len(args) != 1:
                    raise TopologyFormatError("'agents' takes exactly one value", lineno, source)
                total = _parse_int(args[0], lineno, source)
                if total < 1:
                    raise TopologyFormatError("agent count must be positive", lineno, source)
            else:
                ids = [] if args == ['-'] else [_parse_int(a, lineno, source) for a in args]
                if not args:
                    raise TopologyFormatError(f"'{keyword}' needs ids or '-'", lineno, source)
                for agent in ids:
                    if agent >= total:
                        raise TopologyFormatError(
                            f"agent id {agent} out of range [0, {total})", lineno, source)
                if len(set(ids)) != len(ids):
                    raise TopologyFormatError(f"duplicate id in '{keyword}'", lineno, source)
                id_sets[keyword] = ids
            continue

        if keyword != 'edge':
            raise TopologyFormatError(f"unknown keyword '{keyword}'", lineno, source)
        if len(args) != 2:
            raise TopologyFormatError("'edge' takes exactly two ids", lineno, source)
        a = _parse_int(args[0], lineno, source)
        b = _parse_int(args[1], lineno, source)
        if a == b:
            raise TopologyFormatError(f"self-loop on agent {a}", lineno, source)
        if a >= total or b >= total:
            raise TopologyFormatError(
                f"edge ({a}, {b}) references an agent outside [0, {total})", lineno, source)
        if a > b:
            raise TopologyFormatError(f"edge endpoints must be ascending, got {a} {b}", lineno, source)
        if (a, b) in edges:
            raise TopologyFormatError(f"duplicate edge ({a}, {b})", lineno, source)
        if a in id_sets['disconnected'] or b in id_sets['disconnected']:
            raise TopologyFormatError(f"edge ({a}, {b}) touches a disconnected agent", lineno, source)
        edges.add((a, b))

    if expected:
        raise TopologyFormatError(f"missing '{expected[0]}' line", lineno, source)

    return Topology(total_agents=total, edges=frozenset(edges),
                    disconnected=frozenset(id_sets['disconnected']),
                    empty=frozenset(id_sets['empty']), label=label)


def save(t: Topology, path: Union[str, Path]) -> Path:
    """Write a topology file (ASCII, LF line endings)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='ascii', newline='\n') as f:
        f.write(dumps(t))
    logger.info(f"Saved topology {t.label or '(unlabeled)'} ({len(t.edges)} edges) to {path}")
    return path


def load(path: Union[str, Path]) -> Topology:
    """Read a topology file. The label falls back to the file stem."""
    path = Path(path)
    try:
        text = path.read_text(encoding='ascii')
    except UnicodeDecodeError as e:
        raise TopologyFormatError(f"non-ASCII content ({e.reason})", 1, str(path)) from None
    return loads(text, source=str(path), default_label=path.stem)
