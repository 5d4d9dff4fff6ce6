"""CSV output with an embedded configuration manifest.

Every table starts with a ``#``-comment block echoing the resolved
configuration, command, schema tag, and seed, so a file is reproducible
from its own header.  Data rows are formatted deterministically: a rerun
with the same configuration and seed is byte-identical.  The wall-clock
timestamp and output paths live in a JSON sidecar (``<name>.manifest.json``)
to keep the CSV stable.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .units import RunConfig

SCHEMA_VERSION = "v1"


def format_value(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    return str(value)


@dataclass
class RunManifest:
    """Provenance of one CLI invocation."""

    command: str
    schema: str
    config: RunConfig
    artifact_version: str
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def comment_lines(self) -> list[str]:
        """Deterministic manifest block placed at the top of the CSV."""
        lines = [
            f"# schema = {self.command}/{self.schema}",
            f"# generator = qtherm {self.artifact_version}",
        ]
        for key, value in sorted(self.config.as_dict().items()):
            lines.append(f"# config.{key} = {format_value(value)}")
        if self.seed is not None:
            lines.append(f"# seed = {self.seed}")
        for key in sorted(self.extra):
            lines.append(f"# {key} = {format_value(self.extra[key])}")
        return lines

    def sidecar_payload(self) -> dict:
        return {
            "command": self.command,
            "schema": f"{self.command}/{self.schema}",
            "artifact_version": self.artifact_version,
            "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            "config": {k: format_value(v) for k, v in self.config.as_dict().items()},
            "seed": self.seed,
            "extra": {k: format_value(v) for k, v in self.extra.items()},
            "outputs": list(self.outputs),
        }


def write_table(path: str, columns: list[str], rows,
                manifest: RunManifest) -> None:
    """Write a manifest-headed CSV; register the path on the manifest."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in manifest.comment_lines():
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    if path not in manifest.outputs:
        manifest.outputs.append(path)


def write_sidecar(path: str, manifest: RunManifest) -> None:
    """Write the JSON manifest sidecar for a table already on disk."""
    sidecar = os.path.splitext(path)[0] + ".manifest.json"
    if sidecar not in manifest.outputs:
        manifest.outputs.append(sidecar)
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(manifest.sidecar_payload(), fh, indent=2, sort_keys=True)
        fh.write("\n")
