# core/persistence/repository.py
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import aiosqlite

logger = logging.getLogger("repository")

SCHEMA_PATH = Path(__file__).resolve().parent.parent.parent / "db" / "schema.sql"


class MetricsRepository:
    """Run, per-app and bench metrics in one sqlite file."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        self.db: Optional[aiosqlite.Connection] = None

    async def initialize(self):
        """Connect and ensure schema exists."""
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self.db = await aiosqlite.connect(self.db_path)
        self.db.row_factory = aiosqlite.Row
        await self.db.executescript(SCHEMA_PATH.read_text(encoding="utf-8"))
        await self.db.commit()

    async def close(self):
        if self.db is not None:
            await self.db.close()
            self.db = None

    async def __aenter__(self) -> "MetricsRepository":
        await self.initialize()
        return self

    async def __aexit__(self, *exc):
        await self.close()

    async def start_run(self, run_id: str, command: str, config: Dict[str, Any]):
        await self.db.execute(
            """
            INSERT INTO runs (run_id, command, started_at, config)
            VALUES (?, ?, ?, ?)
            ON CONFLICT(run_id) DO UPDATE SET
                command=excluded.command,
                started_at=excluded.started_at,
                config=excluded.config
            """,
            (run_id, command, time.time(), json.dumps(config, default=str)),
        )
        await self.db.commit()

    async def finish_run(self, run_id: str, apps: int, failed: int):
        await self.db.execute(
            "UPDATE runs SET finished_at = ?, apps = ?, failed = ? WHERE run_id = ?",
            (time.time(), apps, failed, run_id),
        )
        await self.db.commit()

    async def upsert_app_metrics(self, run_id: str, row: Dict[str, Any]):
        """Insert or update one app's metrics row."""
        await self.db.execute(
            """
            INSERT INTO app_metrics (
                run_id, app, analyzer, status, wall_ms, sinks, vulnerable,
                visited_methods, searches, cache_hit_rate, loops, error
            )
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            ON CONFLICT(run_id, app, analyzer) DO UPDATE SET
                status=excluded.status,
                wall_ms=excluded.wall_ms,
                sinks=excluded.sinks,
                vulnerable=excluded.vulnerable,
                visited_methods=excluded.visited_methods,
                searches=excluded.searches,
                cache_hit_rate=excluded.cache_hit_rate,
                loops=excluded.loops,
                error=excluded.error
            """,
            (
                run_id, row["app"], row.get("analyzer", "targetvet"), row["status"],
                row.get("wall_ms", 0.0), row.get("sinks", 0), row.get("vulnerable", 0),
                row.get("visited_methods", 0), row.get("searches", 0), row.get("cache_hit_rate", 0.0),
                row.get("loops", 0), row.get("error", ""),
            ),
        )
        await self.db.commit()

    async def upsert_bench_row(self, run_id: str, row: Dict[str, Any]):
        await self.db.execute(
            """
            INSERT INTO bench_rows (
                run_id, seed, classes, methods, sinks, targetvet_ms, oracle_ms,
                targetvet_visited, oracle_visited, visited_ratio
            )
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            ON CONFLICT(run_id, seed, classes, sinks) DO UPDATE SET
                methods=excluded.methods,
                targetvet_ms=excluded.targetvet_ms,
                oracle_ms=excluded.oracle_ms,
                targetvet_visited=excluded.targetvet_visited,
                oracle_visited=excluded.oracle_visited,
                visited_ratio=excluded.visited_ratio
            """,
            (
                run_id, row["seed"], row["classes"], row["methods"], row["sinks"],
                row["targetvet_ms"], row["oracle_ms"], row["targetvet_visited"],
                row["oracle_visited"], row["visited_ratio"],
            ),
        )
        await self.db.commit()

    async def get_app_metrics(self, run_id: str) -> List[Dict[str, Any]]:
        async with self.db.execute(
            "SELECT * FROM app_metrics WHERE run_id = ? ORDER BY app, analyzer", (run_id,)
        ) as cursor:
            return [dict(row) for row in await cursor.fetchall()]

    async def get_run(self, run_id: str) -> Dict[str, Any]:
        async with self.db.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)) as cursor:
            row = await cursor.fetchone()
            return dict(row) if row else {}

    async def get_bench_rows(self, run_id: str) -> List[Dict[str, Any]]:
        async with self.db.execute(
            "SELECT * FROM bench_rows WHERE run_id = ? ORDER BY sinks, methods, seed", (run_id,)
        ) as cursor:
            return [dict(row) for row in await cursor.fetchall()]
