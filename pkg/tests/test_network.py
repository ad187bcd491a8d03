import numpy as np
import pytest

from multivirus_defense.errors import ConfigError, IndexOutOfRange, InvalidProbability, SelfLoop
from multivirus_defense.network import (
    complete,
    cycle,
    erdos_renyi,
    from_edge_list,
    path,
    read_edge_list,
    spectral_radius,
    write_edge_list,
)


def test_from_edge_list_deduplicates():
    net = from_edge_list(3, [(0, 1), (1, 0), (2, 1)])
    assert net.edges == ((0, 1), (1, 2))
    assert net.degrees.tolist() == [1, 2, 1]
    assert np.array_equal(net.adjacency, net.adjacency.T)


def test_from_edge_list_errors():
    with pytest.raises(IndexOutOfRange):
        from_edge_list(2, [(0, 2)])
    with pytest.raises(SelfLoop):
        from_edge_list(2, [(1, 1)])


def test_network_is_read_only():
    net = path(3)
    with pytest.raises(ValueError):
        net.adjacency[0, 2] = 1


def test_erdos_renyi_is_reproducible():
    a = erdos_renyi(30, 0.2, seed=5)
    b = erdos_renyi(30, 0.2, seed=5)
    assert a.edges == b.edges


def test_erdos_renyi_extremes():
    assert erdos_renyi(6, 0.0, seed=1).num_edges == 0
    assert erdos_renyi(6, 1.0, seed=1).num_edges == 15
    with pytest.raises(InvalidProbability):
        erdos_renyi(6, 1.5, seed=1)


def test_generators():
    assert complete(4).degrees.tolist() == [3, 3, 3, 3]
    assert cycle(5).num_edges == 5
    assert path(4).d_min == 1
    assert path(4).d_avg == pytest.approx(1.5)
    assert path(3).neighbors(1).tolist() == [0, 2]
    with pytest.raises(IndexOutOfRange):
        cycle(2)


def test_spectral_radius():
    assert spectral_radius(complete(5)) == pytest.approx(4.0)
    assert spectral_radius(cycle(6)) == pytest.approx(2.0)


def test_edge_list_file_round_trip(tmp_path):
    net = erdos_renyi(12, 0.3, seed=2)
    target = tmp_path / "net.txt"
    write_edge_list(net, target)
    assert read_edge_list(target).edges == net.edges


def test_edge_list_header_mismatch(tmp_path):
    target = tmp_path / "bad.txt"
    target.write_text("3 2\n0 1\n")
    with pytest.raises(ConfigError) as excinfo:
        read_edge_list(target)
    assert excinfo.value.line == 1


def test_edge_list_malformed_line(tmp_path):
    target = tmp_path / "bad.txt"
    target.write_text("3 1\n0 x\n")
    with pytest.raises(ConfigError) as excinfo:
        read_edge_list(target)
    assert excinfo.value.line == 2


def test_to_networkx():
    graph = cycle(4).to_networkx()
    assert graph.number_of_nodes() == 4
    assert graph.number_of_edges() == 4


def test_builder_sizes():
    assert complete(5).num_edges == 10
    assert path(5).num_edges == 4
    assert from_edge_list(3, [(0, 1)]).to_networkx().number_of_nodes() == 3
