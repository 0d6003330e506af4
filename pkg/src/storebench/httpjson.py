"""Tiny JSON-over-HTTP client used by the coordinator and the tuner."""

from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request


class RequestError(Exception):
    def __init__(self, url: str, message: str, status: int | None = None, body: str | None = None):
        super().__init__(f"{url}: {message}")
        self.url = url
        self.status = status
        self.body = body


def request_json(
    method: str,
    url: str,
    body: dict | None = None,
    params: dict | None = None,
    timeout: float = 10.0,
):
    if params:
        url = f"{url}?{urllib.parse.urlencode(params)}"
    data = None
    headers = {"Accept": "application/json"}
    if body is not None:
        data = json.dumps(body).encode()
        headers["Content-Type"] = "application/json"
    request = urllib.request.Request(url, data=data, headers=headers, method=method)
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            payload = response.read()
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode(errors="replace")
        raise RequestError(url, f"HTTP {exc.code}: {detail}", status=exc.code, body=detail) from exc
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise RequestError(url, str(exc)) from exc
    if not payload:
        return None
    try:
        return json.loads(payload)
    except json.JSONDecodeError as exc:
        raise RequestError(url, f"invalid JSON response: {exc}") from exc


def get_json(url: str, params: dict | None = None, timeout: float = 10.0):
    return request_json("GET", url, params=params, timeout=timeout)


def post_json(url: str, body: dict | None = None, params: dict | None = None, timeout: float = 10.0):
    return request_json("POST", url, body=body, params=params, timeout=timeout)
