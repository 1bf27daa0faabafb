"""Client side of the external plugin protocol.

Plugins are child processes speaking newline-delimited JSON over
stdin/stdout.  A plugin signals readiness with ``{"ready": true}`` before
the first request; every request gets exactly one response, in order, with
the request id echoed back.  Requests: ``{"id", "op", "text", "ref"?}``
with op one of attack | score_pair | error_count; responses carry
``text``, ``score``, or ``error``.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import threading
import uuid

DEFAULT_TIMEOUT_MS = 30_000
TIMEOUT_ENV = "WMLAB_PLUGIN_TIMEOUT_MS"


class PluginError(RuntimeError):
    """Any plugin fault: dead process, timeout, or malformed response."""


def plugin_timeout_ms(override: int | None = None) -> int:
    if override is not None:
        return override
    raw = os.environ.get(TIMEOUT_ENV)
    return int(raw) if raw else DEFAULT_TIMEOUT_MS


class PluginClient:
    """Owns one plugin child process exclusively."""

    def __init__(self, cmd: str, timeout_ms: int | None = None):
        self.cmd = cmd
        self.timeout = plugin_timeout_ms(timeout_ms) / 1000.0
        try:
            self._proc = subprocess.Popen(
                shlex.split(cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise PluginError(f"cannot start plugin {cmd!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        ready = self._read_json()
        if ready.get("ready") is not True:
            self.close()
            raise PluginError(f"plugin {cmd!r} did not signal readiness")

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def _read_json(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close()
            raise PluginError(f"plugin {self.cmd!r} timed out") from None
        if line is None:
            raise PluginError(f"plugin {self.cmd!r} exited unexpectedly")
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            self.close()
            raise PluginError(f"malformed plugin response: {line!r}") from exc
        if not isinstance(data, dict):
            self.close()
            raise PluginError(f"plugin response is not an object: {line!r}")
        return data

    def request(self, op: str, text: str, ref: str | None = None) -> dict:
        req_id = uuid.uuid4().hex
        record: dict = {"id": req_id, "op": op, "text": text}
        if ref is not None:
            record["ref"] = ref
        try:
            self._proc.stdin.write(json.dumps(record) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise PluginError(f"plugin {self.cmd!r} write failed: {exc}") from exc
        response = self._read_json()
        if response.get("id") != req_id:
            self.close()
            raise PluginError("plugin response id mismatch")
        if response.get("error"):
            raise PluginError(f"plugin error: {response['error']}")
        return response

    def attack(self, text: str) -> str:
        response = self.request("attack", text)
        out = response.get("text")
        if not isinstance(out, str):
            raise PluginError("attack response carries no text")
        return out

    def score_pair(self, text: str, ref: str) -> float:
        response = self.request("score_pair", text, ref=ref)
        score = response.get("score")
        if not isinstance(score, (int, float)):
            raise PluginError("score_pair response carries no score")
        return float(score)

    def error_count(self, text: str) -> float:
        response = self.request("error_count", text)
        score = response.get("score")
        if not isinstance(score, (int, float)):
            raise PluginError("error_count response carries no score")
        return float(score)

    def alive(self) -> bool:
        return self._proc.poll() is None

    def close(self) -> None:
        proc = self._proc
        for stream in (proc.stdin,):
            try:
                stream.close()
            except OSError:
                pass
        if proc.poll() is None:
            proc.kill()
        proc.wait()

    def __enter__(self) -> "PluginClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
