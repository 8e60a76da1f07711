"""HTTP client used by the command-line interface.

Talks to a running service when given a base URL. Without one it mounts the
application in-process through httpx's ASGI transport (async-only in current
httpx, so each request runs under its own short-lived event loop); every
command still goes through the same request/response layer without needing a
server.
"""

from __future__ import annotations

import asyncio
import time

import httpx

_LOCAL_BASE = "http://riskcross.local"


class ServiceError(Exception):
    pass


class RiskcrossClient:
    def __init__(self, base_url: str | None = None):
        self._sync_client: httpx.Client | None = None
        self._transport: httpx.ASGITransport | None = None
        if base_url:
            self._sync_client = httpx.Client(base_url=base_url, timeout=None)
        else:
            from .service import create_app

            self._transport = httpx.ASGITransport(app=create_app())

    def close(self) -> None:
        if self._sync_client is not None:
            self._sync_client.close()

    def __enter__(self) -> "RiskcrossClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _request(self, method: str, path: str, json: dict | None = None) -> dict:
        if self._sync_client is not None:
            resp = self._sync_client.request(method, path, json=json)
        else:

            async def go() -> httpx.Response:
                async with httpx.AsyncClient(
                    transport=self._transport, base_url=_LOCAL_BASE, timeout=None
                ) as client:
                    return await client.request(method, path, json=json)

            resp = asyncio.run(go())
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ServiceError(f"{path}: {detail}")
        return resp.json()

    def _post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, json=payload)

    def _get(self, path: str) -> dict:
        return self._request("GET", path)

    def health(self) -> dict:
        return self._get("/health")

    def gen_dataset(self, **payload) -> dict:
        return self._post("/datasets", payload)

    def start_training(self, **payload) -> dict:
        return self._post("/train/jobs", payload)

    def start_bench(self, **payload) -> dict:
        return self._post("/bench/observations/jobs", payload)

    def job_status(self, job_id: str) -> dict:
        return self._get(f"/jobs/{job_id}")

    def wait_for_job(self, job_id: str, poll_seconds: float = 2.0, on_progress=None) -> dict:
        """Poll until the job finishes; returns its result or raises ServiceError."""
        while True:
            status = self.job_status(job_id)
            if on_progress is not None and status["state"] == "running":
                on_progress(status["progress"])
            if status["state"] == "done":
                return status["result"]
            if status["state"] == "failed":
                raise ServiceError(f"job {job_id} failed: {status['error']}")
            time.sleep(poll_seconds)

    def evaluate(self, **payload) -> dict:
        return self._post("/evaluate", payload)

    def compare(self, **payload) -> dict:
        return self._post("/compare", payload)

    def act(self, **payload) -> dict:
        return self._post("/policy/act", payload)

    def risk_value(self, **payload) -> dict:
        return self._post("/risk/value", payload)

    def trajectory(self, **payload) -> dict:
        return self._post("/trajectories", payload)
