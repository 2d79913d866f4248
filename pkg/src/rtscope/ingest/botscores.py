"""Bot-likelihood scores: local CSV tables and a rate-limited scoring-service client."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Callable, Iterable

from rtscope.errors import InputError, ProtocolError, ScoreUnavailableError

log = logging.getLogger(__name__)

PROVENANCE_FILE = "file"
PROVENANCE_SERVICE = "service"


class BotScoreTable:
    """Per-user raw bot scores in [0, 1] with provenance bookkeeping."""

    def __init__(self) -> None:
        self._scores: dict[str, float] = {}
        self._provenance: dict[str, str] = {}
        self._fetched_at: dict[str, int] = {}
        self.rejected_rows: list[tuple[int, str]] = []

    def put(
        self,
        user_id: str,
        score: float,
        provenance: str = PROVENANCE_FILE,
        fetched_at: int | None = None,
    ) -> None:
        score = float(score)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"bot score {score} outside [0, 1]")
        self._scores[user_id] = score
        self._provenance[user_id] = provenance
        if fetched_at is not None:
            self._fetched_at[user_id] = int(fetched_at)

    def get(self, user_id: str) -> float | None:
        return self._scores.get(user_id)

    def provenance_of(self, user_id: str) -> str | None:
        return self._provenance.get(user_id)

    def fetched_at_of(self, user_id: str) -> int | None:
        return self._fetched_at.get(user_id)

    def users(self) -> list[str]:
        return list(self._scores)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._scores

    def __len__(self) -> int:
        return len(self._scores)


def load_bot_scores(path: Path | str) -> BotScoreTable:
    """Load a ``user_id,bot_score`` CSV; out-of-range or non-numeric rows are tallied."""
    table = BotScoreTable()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read bot-score file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["user_id", "bot_score"]:
            raise InputError(f"{path}: expected header 'user_id,bot_score', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2 or not row[0]:
                table.rejected_rows.append((row_no, "missing field"))
                continue
            try:
                score = float(row[1])
            except ValueError:
                table.rejected_rows.append((row_no, f"non-numeric score {row[1]!r}"))
                continue
            try:
                table.put(row[0], score, provenance=PROVENANCE_FILE)
            except ValueError:
                table.rejected_rows.append((row_no, f"score {score} outside [0, 1]"))
    if table.rejected_rows:
        log.warning("%s: rejected %d bot-score row(s)", path, len(table.rejected_rows))
    return table


RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


class BotScoreClient:
    """HTTP client for a bot-scoring service.

    Sends ``GET {endpoint}?user_id=<id>`` (plus a bearer token when
    configured) and expects a JSON body carrying one raw score in [0, 1],
    either bare or as ``{"score": <number>}``. Successful lookups are
    written through to an on-disk cache (one JSON file per user, written
    atomically) so repeated runs never re-query. Outbound requests are
    serialized and spaced to honor ``requests_per_minute``; throttling and
    server errors retry with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        cache_dir: Path | str | None = None,
        requests_per_minute: float = 60.0,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        timeout: float = 10.0,
        transport=None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ) -> None:
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.endpoint = endpoint.rstrip("?")
        self.token = token
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.min_interval = 60.0 / requests_per_minute
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._transport = transport
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self._last_request: float | None = None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    # -- cache ---------------------------------------------------------

    def _cache_path(self, user_id: str) -> Path:
        digest = hashlib.sha1(user_id.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def _cache_get(self, user_id: str) -> dict | None:
        if self.cache_dir is None:
            return None
        path = self._cache_path(user_id)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if entry.get("user_id") != user_id:
            return None
        score = entry.get("score")
        if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
            return None
        return entry

    def _cache_put(self, user_id: str, score: float, fetched_at: int) -> None:
        if self.cache_dir is None:
            return
        path = self._cache_path(user_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"user_id": user_id, "score": score, "fetched_at": fetched_at}),
            encoding="utf-8",
        )
        os.replace(tmp, path)

    # -- transport -----------------------------------------------------

    def _get_transport(self):
        if self._transport is None:
            import requests

            self._transport = requests.Session()
        return self._transport

    def _throttle(self) -> None:
        now = self._clock()
        if self._last_request is not None:
            wait = self._last_request + self.min_interval - now
            if wait > 0:
                self._sleep(wait)
                now = self._clock()
        self._last_request = now

    @staticmethod
    def _extract_score(payload) -> float:
        if isinstance(payload, dict):
            payload = payload.get("score")
        if isinstance(payload, bool) or not isinstance(payload, (int, float)):
            raise ProtocolError(f"service payload is not a numeric score: {payload!r}")
        score = float(payload)
        if not 0.0 <= score <= 1.0:
            raise ProtocolError(f"service score {score} outside [0, 1]")
        return score

    def _request_score(self, user_id: str) -> float:
        transport = self._get_transport()
        headers = {"Accept": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        url = f"{self.endpoint}?user_id={user_id}"
        last_failure = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt > 0:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            with self._lock:
                self._throttle()
                try:
                    response = transport.get(url, headers=headers, timeout=self.timeout)
                except Exception as exc:  # network-level failure, retryable
                    last_failure = f"transport error: {exc}"
                    log.debug("bot-score request for %s failed: %s", user_id, exc)
                    continue
            status = getattr(response, "status_code", None)
            if status == 200:
                try:
                    payload = response.json()
                except ValueError as exc:
                    raise ProtocolError(f"service returned non-JSON body: {exc}") from exc
                return self._extract_score(payload)
            if status in RETRYABLE_STATUSES:
                last_failure = f"status {status}"
                continue
            raise ProtocolError(f"service returned status {status}")
        raise ScoreUnavailableError(
            f"no score for user {user_id!r} after {self.max_retries + 1} attempts ({last_failure})"
        )

    # -- public API ----------------------------------------------------

    def fetch(self, user_id: str) -> float:
        """Return the raw score for ``user_id``, from cache when possible."""
        if not user_id:
            raise ValueError("user_id must be non-empty")
        cached = self._cache_get(user_id)
        if cached is not None:
            return float(cached["score"])
        score = self._request_score(user_id)
        self._cache_put(user_id, score, fetched_at=int(self._clock()))
        return score

    def fetch_into(self, table: BotScoreTable, user_ids: Iterable[str]) -> int:
        """Fetch scores for ``user_ids`` into ``table``; returns how many were unavailable."""
        unavailable = 0
        for user_id in user_ids:
            if user_id in table:
                continue
            cached = self._cache_get(user_id)
            if cached is not None:
                table.put(
                    user_id,
                    float(cached["score"]),
                    provenance=PROVENANCE_SERVICE,
                    fetched_at=cached.get("fetched_at"),
                )
                continue
            try:
                score = self._request_score(user_id)
            except ScoreUnavailableError as exc:
                log.warning("%s", exc)
                unavailable += 1
                continue
            fetched_at = int(self._clock())
            self._cache_put(user_id, score, fetched_at=fetched_at)
            table.put(user_id, score, provenance=PROVENANCE_SERVICE, fetched_at=fetched_at)
        return unavailable
