"""Command template rendering and the reverse check used by audits."""

from __future__ import annotations

import re

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class TemplateError(ValueError):
    pass


def placeholders(template: str) -> list[str]:
    return _PLACEHOLDER.findall(template)


def render_command(template: str, values: dict[str, object]) -> str:
    """Instantiate one command template with bound values.

    Floats render via %.12g, which stays inside the 1 Hz readback tolerance
    across the instrument's full frequency range.
    """

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise TemplateError(f"unbound placeholder {name!r} in {template!r}")
        value = values[name]
        if isinstance(value, bool):
            raise TemplateError(f"boolean value for placeholder {name!r}")
        if isinstance(value, float):
            return f"{value:.12g}"
        return str(value)

    return _PLACEHOLDER.sub(substitute, template)


def template_pattern(template: str) -> re.Pattern:
    """Regex matching exactly the instantiations of this template."""
    parts: list[str] = []
    pos = 0
    for match in _PLACEHOLDER.finditer(template):
        parts.append(re.escape(template[pos : match.start()]))
        parts.append(r"[^,]+")
        pos = match.end()
    parts.append(re.escape(template[pos:]))
    return re.compile("^" + "".join(parts) + "$")


def instantiates_any(command: str, templates: list[str]) -> bool:
    """True when the raw command line matches one registered template."""
    line = command.strip()
    return any(template_pattern(t).match(line) for t in templates)
