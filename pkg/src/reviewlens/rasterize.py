"""Document-to-page-image rasterization through an external command.

No PDF renderer is embedded. The command template comes from the
REVIEWLENS_RASTERIZER environment variable (or explicit config) with
placeholders {input}, {outdir} and {dpi}; the tool must write
page-<index>.png files, indexes 0..n-1 with no gaps. Each document
rasterizes into its own subdirectory of output_dir so concurrent
documents never collide.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, EmptyDocumentError, NotFoundError, ToolError
from .manifest import ImageRecord

RASTERIZER_ENV = "REVIEWLENS_RASTERIZER"
DEFAULT_DPI = 150

_PAGE_NAME = re.compile(r"^page-(\d+)\.png$")


@dataclass(frozen=True)
class RasterizeConfig:
    output_dir: str | Path
    dpi: int = DEFAULT_DPI
    command_template: str | None = None  # None: read RASTERIZER_ENV at call time

    def __post_init__(self) -> None:
        if self.dpi <= 0:
            raise ConfigError(f"dpi must be positive, got {self.dpi}")


def _substitute(token: str, doc_path: Path, outdir: Path, dpi: int) -> str:
    return (
        token.replace("{input}", str(doc_path))
        .replace("{outdir}", str(outdir))
        .replace("{dpi}", str(dpi))
    )


def rasterize_document(
    doc_path: str | Path, config: RasterizeConfig, doc_id: str | None = None
) -> list[ImageRecord]:
    """Render one document to page images, one ImageRecord per page.

    Records carry doc_id and ascending page_index from 0; ids are
    "<doc_id>-page-<index>". Stale page files from a previous run of the
    same document are removed before the tool executes, so the returned
    count is exactly what this invocation produced.
    """
    template = config.command_template or os.environ.get(RASTERIZER_ENV)
    if not template:
        raise ConfigError(
            f"no rasterizer configured; set {RASTERIZER_ENV} to a command template "
            "with {input}, {outdir} and {dpi} placeholders"
        )
    doc_path = Path(doc_path)
    if not doc_path.exists():
        raise NotFoundError(f"document not found: {doc_path}")
    doc_id = doc_id or doc_path.stem
    outdir = Path(config.output_dir) / doc_id
    outdir.mkdir(parents=True, exist_ok=True)
    for stale in outdir.iterdir():
        if _PAGE_NAME.match(stale.name):
            stale.unlink()
    command = [_substitute(tok, doc_path, outdir, config.dpi) for tok in shlex.split(template)]
    try:
        proc = subprocess.run(command, capture_output=True, text=True, check=False)
    except OSError as exc:
        raise ToolError(f"rasterizer command failed to start: {exc}") from exc
    if proc.returncode != 0:
        diagnostic = (proc.stderr or proc.stdout).strip()
        raise ToolError(f"rasterizer exited {proc.returncode}: {diagnostic}")
    by_index: dict[int, Path] = {}
    for candidate in outdir.iterdir():
        match = _PAGE_NAME.match(candidate.name)
        if match:
            by_index[int(match.group(1))] = candidate
    if not by_index:
        raise EmptyDocumentError(f"rasterizer produced no pages for {doc_path}")
    expected = set(range(len(by_index)))
    if set(by_index) != expected:
        raise ToolError(
            f"rasterizer page indexes {sorted(by_index)} are not the gap-free "
            f"sequence 0..{len(by_index) - 1}"
        )
    return [
        ImageRecord(
            id=f"{doc_id}-page-{index}",
            path=str(by_index[index]),
            doc_id=doc_id,
            page_index=index,
        )
        for index in sorted(by_index)
    ]
