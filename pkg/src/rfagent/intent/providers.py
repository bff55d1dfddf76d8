"""Intent providers: deterministic grounding or a remote chat model.

The remote provider speaks the common chat-completions wire shape. Model
output must validate as a task contract; schema errors are fed back to the
model at most twice before the provider gives up. Either way the gateway
receives the same validated TaskContract type.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import httpx

from ..contracts import ContractValidationError, Provenance, TaskContract, validate_contract
from .grounder import ground


class IntentProvider(Protocol):
    def understand(self, utterance: str) -> TaskContract: ...


class ProviderError(RuntimeError):
    pass


class DeterministicProvider:
    """Regex grounding; raises GroundingError on unknown phrasing."""

    name = "deterministic"

    def understand(self, utterance: str) -> TaskContract:
        return ground(utterance)


def _default_prompt() -> str:
    path = Path(__file__).resolve().parent.parent / "assets" / "prompts" / "intent_prompt.txt"
    return path.read_text(encoding="utf-8")


@dataclass
class RemoteLlmConfig:
    base_url: str
    api_key: str = ""
    model: str = ""
    timeout_s: float = 60.0
    max_schema_retries: int = 2

    @classmethod
    def from_env(cls) -> "RemoteLlmConfig":
        base_url = os.environ.get("RFAGENT_LLM_BASE_URL", "")
        if not base_url:
            raise ProviderError("RFAGENT_LLM_BASE_URL is not set")
        return cls(
            base_url=base_url.rstrip("/"),
            api_key=os.environ.get("RFAGENT_LLM_API_KEY", ""),
            model=os.environ.get("RFAGENT_LLM_MODEL", ""),
        )


class RemoteLlmProvider:
    """Chat-completions backed intent understanding with schema re-prompting."""

    name = "remote_llm"

    def __init__(
        self,
        config: RemoteLlmConfig,
        system_prompt: str | None = None,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self._config = config
        self._prompt = system_prompt if system_prompt is not None else _default_prompt()
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(
            base_url=config.base_url,
            headers=headers,
            timeout=config.timeout_s,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def understand(self, utterance: str) -> TaskContract:
        messages = [
            {"role": "system", "content": self._prompt},
            {"role": "user", "content": utterance},
        ]
        last_error: ContractValidationError | None = None
        for _ in range(1 + self._config.max_schema_retries):
            content = self._complete(messages)
            try:
                contract = self._parse(content, utterance)
            except ContractValidationError as err:
                last_error = err
                messages.append({"role": "assistant", "content": content})
                messages.append(
                    {
                        "role": "user",
                        "content": (
                            "That reply did not validate as a task contract:\n"
                            + "\n".join(f"- {e.path or '<root>'}: {e.detail}" for e in err.errors)
                            + "\nReply again with one corrected JSON object only."
                        ),
                    }
                )
                continue
            return replace(contract, provenance=Provenance.LLM_PROVIDER)
        raise ProviderError(
            f"model output failed contract validation after "
            f"{self._config.max_schema_retries} re-prompts: {last_error}"
        )

    def _complete(self, messages: list[dict[str, str]]) -> str:
        payload = {"model": self._config.model, "messages": messages, "temperature": 0}
        try:
            response = self._client.post("/chat/completions", json=payload)
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as err:
            raise ProviderError(f"chat completion failed: {err}") from err

    @staticmethod
    def _parse(content: str, utterance: str) -> TaskContract:
        text = content.strip()
        if text.startswith("```"):
            text = text.strip("`").strip()
            if text.startswith("json"):
                text = text[4:]
        try:
            document = json.loads(text)
        except json.JSONDecodeError:
            # let the validator produce its structured parse error
            return validate_contract(text)
        if isinstance(document, dict):
            document.setdefault("utterance", utterance)
        return validate_contract(document)
