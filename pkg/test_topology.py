import pytest

import topology
from topology import (AgentProfile, Topology, TopologyError, TopologyFormatError, annotate, gen_ring_k,
                      gen_special, gen_sweep, role_for, sweep_degrees)


def _ring_edges(m):
    return {tuple(sorted((i, (i + 1) % m))) for i in range(m)}


class TestRingTopology:

    def test_ring_degree_2(self):
        t = gen_ring_k(8, 2)
        assert t.edges == _ring_edges(8)
        assert len(t.edges) == 8
        assert t.label == 'topo2'

    def test_degree_0_has_no_edges(self):
        t = gen_ring_k(8, 0)
        assert t.edges == frozenset()
        assert all(t.degree(a) == 0 for a in range(8))

    def test_fully_connected_terminal_case(self):
        t = gen_ring_k(8, 7)
        assert len(t.edges) == 28
        assert all(t.degree(a) == 7 for a in range(8))

    def test_circulant_16_4(self):
        t = gen_ring_k(16, 4)
        assert len(t.edges) == 32
        assert all(t.degree(a) == 4 for a in range(16))
        # brute-force: neighbors at circular distance 1 and 2
        expected = {tuple(sorted((i, (i + d) % 16))) for i in range(16) for d in (1, 2)}
        assert t.edges == expected

    @pytest.mark.parametrize('m', [8, 16])
    def test_sweep_properties(self, m):
        family = gen_sweep(m)
        previous = None
        for t, d in zip(family, sweep_degrees(m)):
            assert all(t.degree(a) == d for a in range(m))
            assert len(t.edges) == m * d // 2
            for a in range(m):
                assert a not in t.neighbors(a)
                for b in t.neighbors(a):
                    assert a in t.neighbors(b)
            if previous is not None:
                assert previous.edges < t.edges
            previous = t

    def test_sweep_sizes(self):
        assert sweep_degrees(8) == [0, 2, 4, 6, 7]
        assert len(gen_sweep(8, [8, 9], [0, 4, 9])) == 5
        assert len(gen_sweep(16, [16, 17, 18, 19], [0, 5, 10, 18, 19])) == 9

    def test_rejects_odd_intermediate_degree(self):
        with pytest.raises(TopologyError, match='Odd degree'):
            gen_ring_k(8, 3)

    def test_rejects_degree_above_m_minus_1(self):
        with pytest.raises(TopologyError):
            gen_ring_k(8, 8)

    def test_rejects_single_agent(self):
        with pytest.raises(TopologyError):
            gen_ring_k(1, 0)

    def test_neighbors_are_sorted(self):
        assert gen_ring_k(8, 4).neighbors(0) == (1, 2, 6, 7)


class TestSpecialTopologies:

    def test_chain(self):
        assert gen_special('chain', 4).edges == {(0, 1), (1, 2), (2, 3)}

    def test_ring(self):
        assert gen_special('ring', 4).edges == {(0, 1), (1, 2), (2, 3), (0, 3)}

    def test_fully_connected(self):
        assert len(gen_special('fully_connected', 5).edges) == 10

    def test_star_chain(self):
        t = gen_special('star_chain', 5)
        assert t.edges == {(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4)}

    def test_ring_chain(self):
        t = gen_special('ring_chain', 8)
        assert t.edges == {(0, 1), (1, 2), (2, 3), (0, 3), (3, 4), (4, 5), (5, 6), (6, 7)}

    def test_unknown_kind(self):
        with pytest.raises(TopologyError, match='Unknown topology kind'):
            gen_special('hypercube', 8)


class TestRoles:

    def test_role_table(self):
        assert role_for(True, True) == 'R'
        assert role_for(True, False) == 'D'
        assert role_for(False, True) == 'E'
        assert role_for(False, False) == 'ED'

    def test_profile_rejects_inconsistent_role(self):
        with pytest.raises(TopologyError):
            AgentProfile(0, 'R', has_data=False, is_connected=True)

    def test_annotate_8_2(self):
        t = annotate(gen_special('ring', 10), disconnected=[8, 9], empty=[0, 4, 9])
        assert t.degree(8) == 0 and t.degree(9) == 0
        roles = {p.id: p.role for p in t.profiles()}
        assert roles[9] == 'ED'
        assert roles[8] == 'D'
        assert roles[0] == roles[4] == 'E'
        assert [a for a, r in roles.items() if r == 'R'] == [1, 2, 3, 5, 6, 7]
        assert t.agent_number == '8+2'

    def test_annotate_16_4(self):
        t = annotate(gen_special('fully_connected', 20), [16, 17, 18, 19], [0, 5, 10, 18, 19])
        roles = [p.role for p in t.profiles()]
        assert {a for a, r in enumerate(roles) if r == 'ED'} == {18, 19}
        assert {a for a, r in enumerate(roles) if r == 'D'} == {16, 17}
        assert {a for a, r in enumerate(roles) if r == 'E'} == {0, 5, 10}
        assert roles.count('R') == 13
        assert all(t.degree(a) == 0 for a in (16, 17, 18, 19))

    def test_annotate_identity(self):
        t = gen_ring_k(8, 4)
        assert annotate(t, [], []) is t

    def test_annotate_out_of_range(self):
        with pytest.raises(TopologyError, match='out of range'):
            annotate(gen_ring_k(8, 2), disconnected=[8])

    def test_disconnected_appended_after_ring(self):
        t = gen_ring_k(8, 2, disconnected=[8, 9], empty=[0, 4, 9])
        assert t.total_agents == 10
        assert t.edges == _ring_edges(8)
        assert t.profile(9).role == 'ED'

    def test_topology_rejects_edge_on_disconnected_agent(self):
        with pytest.raises(TopologyError):
            Topology(total_agents=3, edges=frozenset({(0, 1)}), disconnected=frozenset({1}))


class TestTopologyFiles:

    def test_round_trip(self, tmp_path):
        for t in gen_sweep(8, [8, 9], [0, 4, 9]):
            path = topology.save(t, tmp_path / f"{t.label}.txt")
            assert topology.load(path) == t

    def test_file_layout(self):
        text = topology.dumps(gen_ring_k(4, 2, disconnected=[4], empty=[0]))
        lines = text.splitlines()
        assert lines[:4] == ['# label topo2', 'agents 5', 'disconnected 4', 'empty 0']
        assert lines[4:] == ['edge 0 1', 'edge 0 3', 'edge 1 2', 'edge 2 3']
        assert text.endswith('\n') and '\r' not in text

    def test_label_falls_back_to_file_stem(self, tmp_path):
        path = tmp_path / 'my_graph.txt'
        path.write_text('agents 2\ndisconnected -\nempty -\nedge 0 1\n')
        assert topology.load(path).label == 'my_graph'

    def test_comments_and_blank_lines(self):
        t = topology.loads('agents 3  # three\n\ndisconnected -\nempty 2\n# edges\nedge 0 1\n')
        assert t.edges == {(0, 1)} and t.empty == {2}

    @pytest.mark.parametrize('text, lineno, message', [
        ('agents 4\ndisconnected -\nempty -\nedge 3 3\n', 4, 'self-loop'),
        ('agents 4\ndisconnected -\nempty -\nedge 0 4\n', 4, 'outside'),
        ('agents 4\ndisconnected -\nempty -\nedge 0 1\nedge 0 1\n', 5, 'duplicate edge'),
        ('agents 4\ndisconnected -\nempty -\nedge 2 1\n', 4, 'ascending'),
        ('agents 4\ndisconnected 3\nempty -\nedge 2 3\n', 4, 'disconnected'),
        ('agents 4\nempty -\n', 2, "expected 'disconnected'"),
        ('agents 4\ndisconnected -\nempty -\nnode 1\n', 4, 'unknown keyword'),
        ('agents 4\ndisconnected 7\nempty -\n', 2, 'out of range'),
    ])
    def test_malformed_files_report_line(self, text, lineno, message):
        with pytest.raises(TopologyFormatError, match=message) as exc:
            topology.loads(text)
        assert exc.value.lineno == lineno
