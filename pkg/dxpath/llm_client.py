"""
Completion endpoint client - thin HTTP wrapper with retries and auditing.

The endpoint receives POST {"model", "prompt", ...extra} at `base_url` and
answers with one of:
    {"completion": "..."}
    {"choices": [{"text": "..."}]}
    {"choices": [{"message": {"content": "..."}}]}
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import requests
import urllib3

from .audit import AuditLog
from .errors import ConfigError, LLMError

logger = logging.getLogger(__name__)

# Self-signed research endpoints are common
urllib3.disable_warnings(urllib3.exceptions.InsecureRequestWarning)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str = ""
    auth_header: str = "Authorization"
    auth_value: str = ""
    timeout: float = 30.0
    attempts: int = 3
    backoff: float = 1.0
    max_concurrency: int = 4
    audit_log: Optional[Path] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    verify_ssl: bool = True

    def __post_init__(self):
        if self.attempts < 1:
            raise ConfigError("llm.attempts must be at least 1")
        if self.max_concurrency < 1:
            raise ConfigError("llm.max_concurrency must be at least 1")
        if self.timeout <= 0:
            raise ConfigError("llm.timeout must be positive")


def extract_completion(payload: Any) -> str:
    """Completion text from an endpoint response body."""
    if isinstance(payload, dict):
        if isinstance(payload.get("completion"), str):
            return payload["completion"]
        choices = payload.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                if isinstance(first.get("text"), str):
                    return first["text"]
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
    raise LLMError("Endpoint response holds no completion text", response=payload)


class LLMClient:
    """Completion endpoint REST client."""

    def __init__(self, config: EndpointConfig, session: Optional[requests.Session] = None):
        if not config.base_url:
            raise LLMError("Completion endpoint not configured (llm.base_url)", status_code=0)
        self.config = config
        self.audit = AuditLog(config.audit_log) if config.audit_log else None

        # Session for connection pooling
        self.session = session or requests.Session()
        self.session.verify = config.verify_ssl
        self.session.headers.update({
            "Content-Type": "application/json",
            "Accept": "application/json",
        })
        if config.auth_value:
            self.session.headers[config.auth_header] = config.auth_value

    def _post(self, prompt: str) -> str:
        """
        One request attempt.

        Raises:
            LLMError: On HTTP or transport errors; `retryable` set in details
        """
        body = {"model": self.config.model, "prompt": prompt, **self.config.extra}
        start = time.monotonic()
        status = None
        try:
            response = self.session.post(self.config.base_url, json=body, timeout=self.config.timeout)
            status = response.status_code

            if status in (401, 403):
                raise LLMError("Authentication failed. Check the llm.auth_env variable.", status)
            elif status >= 400:
                error_text = response.text
                try:
                    error_json = response.json()
                    error_text = error_json.get("error", error_text) if isinstance(error_json, dict) else error_text
                except Exception:
                    pass
                error = LLMError(f"Endpoint error: {error_text}", status, response=error_text)
                error.details["retryable"] = status in RETRYABLE_STATUS
                raise error

            try:
                payload = response.json()
            except ValueError:
                raise LLMError("Endpoint returned non-JSON body", status, response=response.text)
            return extract_completion(payload)

        except requests.exceptions.Timeout:
            error = LLMError(f"Request timed out after {self.config.timeout}s")
            error.details["retryable"] = True
            raise error
        except requests.exceptions.ConnectionError as e:
            error = LLMError(f"Connection failed: {e}")
            error.details["retryable"] = True
            raise error
        except requests.exceptions.RequestException as e:
            raise LLMError(f"Request failed: {e}")
        finally:
            if self.audit is not None:
                self.audit.record(prompt, status, (time.monotonic() - start) * 1000.0)

    def complete(self, prompt: str) -> str:
        """
        Completion text for one prompt.

        Retries timeouts, connection failures, 429 and 5xx responses with
        exponential backoff (backoff, 2*backoff, ...) up to `attempts` tries.

        Raises:
            LLMError: Final failure, with the last HTTP status if any
        """
        last: Optional[LLMError] = None
        for attempt in range(1, self.config.attempts + 1):
            try:
                return self._post(prompt)
            except LLMError as e:
                last = e
                if not e.details.get("retryable") or attempt == self.config.attempts:
                    break
                delay = self.config.backoff * (2 ** (attempt - 1))
                logger.warning(f"Attempt {attempt}/{self.config.attempts} failed ({e.message}); retrying in {delay:.1f}s")
                time.sleep(delay)

        raise LLMError(
            f"{last.message} (after {attempt} attempt(s))",
            last.status_code,
            response=last.response,
        )

    def complete_many(self, prompts: Sequence[str]) -> List[str]:
        """
        Completions for many prompts with at most `max_concurrency` requests
        in flight. Results follow input order; the first failure is raised.
        """
        if not prompts:
            return []
        workers = min(self.config.max_concurrency, len(prompts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.complete, prompts))
