import pytest

from orthodict.parallel import group_spans, resolve_workers, run_tasks, tile_spans


class TestResolveWorkers:
    def test_explicit_value_wins(self, monkeypatch):
        monkeypatch.setenv("ORTHODICT_WORKERS", "5")
        assert resolve_workers(3) == 3

    def test_env_variable_default(self, monkeypatch):
        monkeypatch.setenv("ORTHODICT_WORKERS", "5")
        assert resolve_workers(None) == 5

    def test_falls_back_to_cpu_count(self, monkeypatch):
        monkeypatch.delenv("ORTHODICT_WORKERS", raising=False)
        assert resolve_workers(None) >= 1

    def test_rejects_garbage(self, monkeypatch):
        monkeypatch.setenv("ORTHODICT_WORKERS", "lots")
        with pytest.raises(ValueError):
            resolve_workers(None)
        with pytest.raises(ValueError):
            resolve_workers(0)


class TestSpans:
    def test_tile_spans_cover_exactly(self):
        spans = tile_spans(1000, 256)
        assert spans == [(0, 256), (256, 512), (512, 768), (768, 1000)]
        assert tile_spans(256, 256) == [(0, 256)]
        assert tile_spans(0, 256) == []

    def test_group_spans(self):
        spans = tile_spans(1000, 256)
        assert group_spans(spans, 2) == [spans[0:2], spans[2:4]]
        assert group_spans(spans, 0) == [[s] for s in spans]


class TestRunTasks:
    def test_results_in_argument_order(self):
        for workers in (1, 4):
            got = run_tasks(lambda x: x * x, range(20), workers)
            assert got == [x * x for x in range(20)]

    def test_exceptions_propagate(self):
        def boom(x):
            raise RuntimeError("nope")

        for workers in (1, 3):
            with pytest.raises(RuntimeError):
                run_tasks(boom, [1, 2], workers)
