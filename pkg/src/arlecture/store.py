"""File-backed store for lecture materials and AR maps.

Both devices rendezvous here: the remote uploads the AR map and picks
materials; the recording engine fetches them. Layout on disk:

    <root>/index.json          asset metadata + map blob index
    <root>/blobs/<name>        AR map serializations, byte-exact

Writes are atomic rename-style replacements; reads never see a torn file.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import ARMap, map_from_bytes

KIND_IMAGE = "image"
KIND_VIDEO = "video"


class StoreError(Exception):
    pass


class NotFound(StoreError):
    pass


class InvalidAsset(StoreError):
    pass


class StoreUnavailable(StoreError):
    pass


@dataclass(frozen=True)
class PageDescriptor:
    page_id: str
    width_px: int
    height_px: int


@dataclass
class MaterialAsset:
    """Lecture material: an image deck with pages, or a video with a duration."""

    id: str
    kind: str
    pages: list[PageDescriptor] = field(default_factory=list)
    duration_ms: float = 0.0
    content_ref: str = ""

    def validate(self) -> None:
        if not self.id:
            raise InvalidAsset("asset id must be non-empty")
        if self.kind == KIND_IMAGE:
            if not self.pages:
                raise InvalidAsset("image asset needs at least one page")
        elif self.kind == KIND_VIDEO:
            if self.duration_ms <= 0:
                raise InvalidAsset("video asset needs a positive duration")
        else:
            raise InvalidAsset(f"unknown asset kind {self.kind!r}")

    @property
    def page_count(self) -> int:
        return len(self.pages) if self.kind == KIND_IMAGE else 1

    def to_obj(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "pages": [
                {"page_id": p.page_id, "w": p.width_px, "h": p.height_px} for p in self.pages
            ],
            "duration_ms": self.duration_ms,
            "content_ref": self.content_ref,
        }

    @staticmethod
    def from_obj(obj: dict) -> "MaterialAsset":
        return MaterialAsset(
            id=obj["id"],
            kind=obj["kind"],
            pages=[PageDescriptor(p["page_id"], p["w"], p["h"]) for p in obj["pages"]],
            duration_ms=obj.get("duration_ms", 0.0),
            content_ref=obj.get("content_ref", ""),
        )


def _blob_name(map_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", map_id)
    return f"map_{safe}.json"


class MaterialStore:
    """Single-directory store; safe for concurrent readers and writers."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.blobs = self.root / "blobs"
        self.index_path = self.root / "index.json"
        self._lock = threading.Lock()
        try:
            self.blobs.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StoreUnavailable(f"cannot create store at {self.root}: {e}") from e
        if not self.index_path.exists():
            self._write_index({"v": 1, "assets": {}, "maps": {}})

    # -- index helpers

    def _read_index(self) -> dict:
        try:
            return json.loads(self.index_path.read_text("utf-8"))
        except FileNotFoundError as e:
            raise StoreUnavailable(f"missing index at {self.index_path}") from e
        except json.JSONDecodeError as e:
            raise StoreError(f"corrupt index: {e}") from e

    def _write_index(self, idx: dict) -> None:
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(idx, indent=1, sort_keys=True), "utf-8")
        os.replace(tmp, self.index_path)

    # -- assets

    def put_asset(self, asset: MaterialAsset) -> str:
        asset.validate()
        with self._lock:
            idx = self._read_index()
            idx["assets"][asset.id] = asset.to_obj()
            self._write_index(idx)
        return asset.id

    def get_asset(self, asset_id: str) -> MaterialAsset:
        idx = self._read_index()
        obj = idx["assets"].get(asset_id)
        if obj is None:
            raise NotFound(f"asset {asset_id!r}")
        return MaterialAsset.from_obj(obj)

    def list_assets(self) -> list[str]:
        return sorted(self._read_index()["assets"])

    # -- AR maps (stored as their canonical serialization, byte-exact)

    def put_map_bytes(self, map_id: str, data: bytes) -> str:
        map_from_bytes(data)  # must parse as a valid ARMap
        name = _blob_name(map_id)
        with self._lock:
            tmp = self.blobs / (name + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, self.blobs / name)
            idx = self._read_index()
            idx["maps"][map_id] = name
            self._write_index(idx)
        return map_id

    def get_map_bytes(self, map_id: str) -> bytes:
        idx = self._read_index()
        name = idx["maps"].get(map_id)
        if name is None:
            raise NotFound(f"map {map_id!r}")
        try:
            return (self.blobs / name).read_bytes()
        except FileNotFoundError as e:
            raise NotFound(f"map blob {name!r} missing") from e

    def put_map(self, map_id: str, armap: ARMap) -> str:
        from .geometry import map_to_bytes

        return self.put_map_bytes(map_id, map_to_bytes(armap))

    def get_map(self, map_id: str) -> ARMap:
        return map_from_bytes(self.get_map_bytes(map_id))

    def list_maps(self) -> list[str]:
        return sorted(self._read_index()["maps"])
