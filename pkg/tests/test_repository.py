import asyncio

from core.persistence.repository import MetricsRepository


def run(coro):
    return asyncio.run(coro)


def test_app_metrics_upsert_keeps_one_row(tmp_path):
    async def scenario():
        async with MetricsRepository(str(tmp_path / "db" / "metrics.sqlite")) as repo:
            await repo.start_run("r1", "vet", {"forward_eval": {"k": 8}})
            await repo.upsert_app_metrics("r1", {"app": "ecb", "status": "failed", "error": "x"})
            await repo.upsert_app_metrics("r1", {"app": "ecb", "status": "ok", "sinks": 2, "vulnerable": 1})
            await repo.upsert_app_metrics("r1", {"app": "ecb", "analyzer": "oracle", "status": "ok"})
            await repo.finish_run("r1", apps=1, failed=0)
            return await repo.get_app_metrics("r1"), await repo.get_run("r1")

    rows, run_row = run(scenario())
    assert [(r["app"], r["analyzer"]) for r in rows] == [("ecb", "oracle"), ("ecb", "targetvet")]
    targeted = rows[1]
    assert targeted["status"] == "ok"
    assert targeted["sinks"] == 2 and targeted["vulnerable"] == 1
    assert targeted["error"] == ""
    assert run_row["command"] == "vet"
    assert run_row["apps"] == 1 and run_row["finished_at"] is not None


def test_bench_rows(tmp_path):
    row = {"seed": 1, "classes": 10, "methods": 100, "sinks": 5, "targetvet_ms": 3.0, "oracle_ms": 9.0,
           "targetvet_visited": 12, "oracle_visited": 100, "visited_ratio": 0.12}

    async def scenario():
        async with MetricsRepository(str(tmp_path / "metrics.sqlite")) as repo:
            await repo.start_run("b1", "bench", {})
            await repo.upsert_bench_row("b1", row)
            await repo.upsert_bench_row("b1", {**row, "oracle_ms": 11.0})
            return await repo.get_bench_rows("b1")

    rows = run(scenario())
    assert len(rows) == 1
    assert rows[0]["oracle_ms"] == 11.0


def test_missing_run_is_empty(tmp_path):
    async def scenario():
        async with MetricsRepository(str(tmp_path / "metrics.sqlite")) as repo:
            return await repo.get_run("nope"), await repo.get_app_metrics("nope")

    assert run(scenario()) == ({}, [])
