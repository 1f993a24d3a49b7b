"""Chat-completions client for multimodal planning calls.

One client covers any chat-completions-compatible vendor: the base URL and
model name are configuration, the credential comes from an environment
variable only. Requests carry text plus base64 PNG image parts and run at
temperature 0. Transport failures and 5xx responses are retried with
exponential backoff; a semaphore bounds in-flight requests so the client is
safe for concurrent use.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .annotate import encode_png

DEFAULT_API_KEY_ENV = "AFFNAV_API_KEY"


class EndpointError(RuntimeError):
    """The endpoint failed after all retries."""


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 0.5
    max_inflight: int = 4
    log_path: str | None = None  # JSONL transcript of requests/responses

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def image_part(image: np.ndarray) -> dict:
    """Chat-completions image part: PNG as a base64 data URI."""
    data = base64.b64encode(encode_png(image)).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}}


def text_part(text: str) -> dict:
    return {"type": "text", "text": text}


@dataclass
class ChatClient:
    cfg: EndpointConfig
    _sem: threading.Semaphore = field(init=False, repr=False)
    _log_lock: threading.Lock = field(init=False, repr=False)

    def __post_init__(self):
        self._sem = threading.Semaphore(self.cfg.max_inflight)
        self._log_lock = threading.Lock()

    def complete(self, content_parts: list[dict]) -> str:
        """Send one user message; return the assistant's text content."""
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": content_parts}],
            "temperature": 0,
        }
        headers = {"Content-Type": "application/json"}
        key = self.cfg.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        last_err = None
        with self._sem:
            for attempt in range(self.cfg.max_retries):
                try:
                    resp = requests.post(
                        url, json=body, headers=headers, timeout=self.cfg.timeout_s
                    )
                except requests.RequestException as exc:
                    last_err = exc
                else:
                    if resp.status_code >= 500:
                        last_err = EndpointError(f"server error {resp.status_code}")
                    elif resp.status_code >= 400:
                        raise EndpointError(f"request rejected: {resp.status_code} {resp.text[:200]}")
                    else:
                        text = self._extract_text(resp.json())
                        self._log(body, text)
                        return text
                if attempt + 1 < self.cfg.max_retries:
                    time.sleep(self.cfg.backoff_s * (2**attempt))
        raise EndpointError(f"endpoint failed after {self.cfg.max_retries} attempts: {last_err}")

    @staticmethod
    def _extract_text(payload: dict) -> str:
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointError(f"malformed endpoint response: {exc}") from exc

    def _log(self, body: dict, reply: str) -> None:
        if not self.cfg.log_path:
            return
        slim = {
            "model": body["model"],
            "texts": [
                p["text"]
                for p in body["messages"][0]["content"]
                if p.get("type") == "text"
            ],
            "images": sum(
                1 for p in body["messages"][0]["content"] if p.get("type") == "image_url"
            ),
            "reply": reply,
        }
        with self._log_lock, open(self.cfg.log_path, "a") as fh:
            fh.write(json.dumps(slim, sort_keys=True) + "\n")


def extract_json_object(text: str) -> dict:
    """First balanced JSON object in a reply, fenced or bare.

    Raises ValueError when no parseable object exists.
    """
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        return json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
        start = text.find("{", start + 1)
    raise ValueError("no JSON object found in response")
