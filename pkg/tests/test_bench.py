import pytest

from core.bench import BENCH_LINKAGES, bench, sink_family, size_family


def test_families():
    sizes = size_family([100, 1000], sinks=3)
    assert [s.classes for s in sizes] == [10, 100]
    assert all(s.linkages == BENCH_LINKAGES[:3] for s in sizes)

    sinks = sink_family([1, 5, 20], methods=500)
    assert [s.sinks for s in sinks] == [1, 5, 20]
    assert [len(s.linkages) for s in sinks] == [1, 5, 5]
    assert all(s.classes == 50 for s in sinks)


@pytest.mark.slow
def test_targeted_visits_fewer_methods_as_apps_grow(tmp_path):
    rows = bench(size_family([200, 800], sinks=3), tmp_path)

    assert len(rows) == 2
    assert all(r.agree for r in rows)
    assert rows[1].methods > rows[0].methods
    assert rows[1].targetvet_visited == rows[0].targetvet_visited
    assert rows[1].oracle_visited > rows[0].oracle_visited
    assert rows[1].visited_ratio < rows[0].visited_ratio


@pytest.mark.slow
def test_size_sweep_keeps_targeted_work_flat(tmp_path):
    rows = bench(size_family([1000, 5000, 10000], sinks=5), tmp_path)
    small, large = rows[0], rows[-1]

    assert [r.sinks for r in rows] == [5, 5, 5]
    assert all(r.agree for r in rows)
    assert large.methods >= 9 * small.methods

    visited = [r.targetvet_visited for r in rows]
    assert max(visited) <= 2 * min(visited)
    assert large.oracle_visited >= 8 * small.oracle_visited

    per_sink = [r.per_sink_ms for r in rows]
    assert max(per_sink) <= 2 * min(per_sink)

    assert large.targetvet_ms * 5 <= large.oracle_ms
