"""Bundled edge-list fixtures and name resolution."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .graph import Graph, load_edge_list

NETWORKS = ("mexican", "dolphin", "bomb", "lesmis", "throne", "jazz")

# (|V|, |E|, <k>, C, <d>) of the reference networks
REFERENCE_STATS = {
    "mexican": (35, 117, 6.686, 0.448, 2.106),
    "dolphin": (62, 159, 5.129, 0.259, 3.357),
    "bomb": (64, 243, 7.594, 0.622, 2.691),
    "lesmis": (77, 254, 6.597, 0.573, 2.641),
    "throne": (107, 352, 6.597, 0.551, 2.904),
    "jazz": (198, 2742, 27.697, 0.617, 2.235),
}


def data_dir() -> Path:
    return Path(str(resources.files("lpdefense") / "data"))


def bundled_path(name: str) -> Path | None:
    p = data_dir() / f"{name.lower()}.txt"
    return p if p.is_file() else None


def available() -> list[str]:
    return [n for n in NETWORKS if bundled_path(n) is not None]


def resolve(dataset: str | os.PathLike) -> tuple[str, Path]:
    """``(network name, path)`` for a bundled name or an edge-list path."""
    p = Path(dataset)
    if p.is_file():
        return p.stem.lower(), p
    bundled = bundled_path(str(dataset))
    if bundled is None:
        raise FileNotFoundError(
            f"{dataset!r} is neither a file nor a bundled network (bundled: {', '.join(available()) or 'none'})"
        )
    return str(dataset).lower(), bundled


def load(dataset: str | os.PathLike) -> tuple[str, Graph]:
    name, path = resolve(dataset)
    return name, load_edge_list(path)
