"""File-system store binding fingerprint images to personal information.

Layout: one directory per store, holding ``manifest.json`` plus
``records/<id>/`` with the fingerprint image, an optional photo, and an
optional cached template.  The manifest is the authority; it is only ever
replaced atomically (write-temp-then-rename), so a store survives a crash
at any point during enrollment.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .core import (
    GrayImage,
    MinutiaeTemplate,
    PgmError,
    extract_minutiae,
    read_pgm,
    template_from_dict,
    template_to_dict,
    write_pgm,
)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


class StoreError(Exception):
    """Store could not be loaded or an operation was rejected."""


class UnknownRecordError(StoreError):
    """Lookup of a recordId that is not in the store."""


@dataclass
class PersonRecord:
    record_id: str
    name: str
    metadata: dict
    fingerprint_image_path: str  # relative to the store root
    photo_path: Optional[str] = None
    template: Optional[MinutiaeTemplate] = None

    def to_manifest_entry(self) -> dict:
        entry = {
            "recordId": self.record_id,
            "name": self.name,
            "metadata": dict(self.metadata),
            "fingerprintImagePath": self.fingerprint_image_path,
            "photoPath": self.photo_path,
        }
        return entry

    @classmethod
    def from_manifest_entry(cls, entry: dict) -> "PersonRecord":
        try:
            record_id = entry["recordId"]
            name = entry["name"]
            metadata = entry["metadata"]
            image_path = entry["fingerprintImagePath"]
        except (TypeError, KeyError) as exc:
            raise StoreError(f"manifest entry missing field: {entry!r}") from exc
        if not isinstance(record_id, str) or not record_id:
            raise StoreError(f"manifest entry has bad recordId: {entry!r}")
        if not isinstance(metadata, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
        ):
            raise StoreError(f"record {record_id}: metadata must map strings to strings")
        return cls(
            record_id=record_id,
            name=name,
            metadata=metadata,
            fingerprint_image_path=image_path,
            photo_path=entry.get("photoPath"),
        )


class RecordStore:
    """Single-writer, multi-reader store rooted at a directory.

    ``fault_hook`` is called with a checkpoint name at each step of an
    enrollment; tests inject exceptions there to simulate crashes.
    """

    CHECKPOINTS = (
        "dir-created",
        "image-written",
        "photo-written",
        "template-written",
        "manifest-tmp-written",
        "manifest-replaced",
    )

    def __init__(
        self,
        root,
        cache_templates: bool = False,
        fault_hook: Optional[Callable[[str], None]] = None,
    ):
        self.root = Path(root)
        self.cache_templates = cache_templates
        self._fault_hook = fault_hook
        self._write_lock = threading.Lock()
        self._records: dict[str, PersonRecord] = {}
        self._order: list[str] = []
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "records").mkdir(exist_ok=True)
        if (self.root / MANIFEST_NAME).exists():
            self._load_manifest()
        else:
            self._replace_manifest()

    # -- loading ---------------------------------------------------------

    def _load_manifest(self) -> None:
        path = self.root / MANIFEST_NAME
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"unreadable manifest at {path}: {exc}") from exc
        if not isinstance(data, dict) or data.get("version") != MANIFEST_VERSION:
            raise StoreError(f"unsupported manifest version: {data.get('version')!r}")
        entries = data.get("records")
        if not isinstance(entries, list):
            raise StoreError("manifest has no records array")
        for entry in entries:
            rec = PersonRecord.from_manifest_entry(entry)
            if rec.record_id in self._records:
                raise StoreError(f"duplicate recordId in manifest: {rec.record_id}")
            image = self.root / rec.fingerprint_image_path
            if not image.is_file():
                raise StoreError(f"record {rec.record_id}: missing file {rec.fingerprint_image_path}")
            if rec.photo_path is not None and not (self.root / rec.photo_path).is_file():
                raise StoreError(f"record {rec.record_id}: missing file {rec.photo_path}")
            self._records[rec.record_id] = rec
            self._order.append(rec.record_id)

    # -- write plumbing --------------------------------------------------

    def _checkpoint(self, name: str) -> None:
        if self._fault_hook is not None:
            self._fault_hook(name)

    def _replace_manifest(self) -> None:
        payload = {
            "version": MANIFEST_VERSION,
            "records": [self._records[rid].to_manifest_entry() for rid in self._order],
        }
        tmp = self.root / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2))
        self._checkpoint("manifest-tmp-written")
        os.replace(tmp, self.root / MANIFEST_NAME)

    # -- operations ------------------------------------------------------

    def enroll(self, name: str, metadata: dict, fingerprint_image, photo: Optional[bytes] = None) -> str:
        """Persist a new record and return its assigned id.

        ``fingerprint_image`` is either raw PGM bytes (stored verbatim) or a
        GrayImage (encoded canonically).  Invalid input leaves the store
        untouched.
        """
        if isinstance(fingerprint_image, GrayImage):
            image_bytes = write_pgm(fingerprint_image)
        elif isinstance(fingerprint_image, (bytes, bytearray)):
            try:
                read_pgm(bytes(fingerprint_image))
            except PgmError as exc:
                raise StoreError(f"fingerprint image rejected: {exc}") from exc
            image_bytes = bytes(fingerprint_image)
        else:
            raise StoreError("fingerprint_image must be PGM bytes or a GrayImage")
        if not all(isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()):
            raise StoreError("metadata must map strings to strings")

        with self._write_lock:
            record_id = f"r{len(self._order) + 1:06d}"
            rec_dir = self.root / "records" / record_id
            rec_dir.mkdir(parents=True, exist_ok=True)
            self._checkpoint("dir-created")
            (rec_dir / "finger.pgm").write_bytes(image_bytes)
            self._checkpoint("image-written")
            photo_rel = None
            if photo is not None:
                (rec_dir / "photo.bin").write_bytes(photo)
                photo_rel = f"records/{record_id}/photo.bin"
            self._checkpoint("photo-written")
            rec = PersonRecord(
                record_id=record_id,
                name=name,
                metadata=dict(metadata),
                fingerprint_image_path=f"records/{record_id}/finger.pgm",
                photo_path=photo_rel,
            )
            self._records[record_id] = rec
            self._order.append(record_id)
            try:
                self._replace_manifest()
            except BaseException:
                # Manifest on disk still describes the old state; match it.
                del self._records[record_id]
                self._order.pop()
                raise
            self._checkpoint("manifest-replaced")
            return record_id

    def get_record(self, record_id: str) -> PersonRecord:
        try:
            return self._records[record_id]
        except KeyError:
            raise UnknownRecordError(f"no such record: {record_id}") from None

    def list_records(self) -> list:
        return [(rid, self._has_template(rid)) for rid in self._order]

    def __len__(self) -> int:
        return len(self._order)

    # -- payload access --------------------------------------------------

    def fingerprint_bytes(self, record_id: str) -> bytes:
        rec = self.get_record(record_id)
        return (self.root / rec.fingerprint_image_path).read_bytes()

    def load_fingerprint(self, record_id: str) -> GrayImage:
        return read_pgm(self.fingerprint_bytes(record_id))

    def photo_bytes(self, record_id: str) -> Optional[bytes]:
        rec = self.get_record(record_id)
        if rec.photo_path is None:
            return None
        return (self.root / rec.photo_path).read_bytes()

    def _template_path(self, record_id: str) -> Path:
        return self.root / "records" / record_id / "template.json"

    def _has_template(self, record_id: str) -> bool:
        return self._records[record_id].template is not None or self._template_path(record_id).is_file()

    def template_for(self, record_id: str) -> MinutiaeTemplate:
        """Extract (or recall) the record's minutiae template.

        Extraction is repeated on every call unless caching is enabled,
        mirroring a deployment where workers re-extract record features.
        """
        rec = self.get_record(record_id)
        if rec.template is not None:
            return rec.template
        path = self._template_path(record_id)
        if path.is_file():
            template = template_from_dict(json.loads(path.read_text()))
            if self.cache_templates:
                rec.template = template
            return template
        template = extract_minutiae(self.load_fingerprint(record_id))
        if self.cache_templates:
            with self._write_lock:
                tmp = path.with_suffix(".json.tmp")
                tmp.write_text(json.dumps(template_to_dict(template)))
                self._checkpoint("template-written")
                os.replace(tmp, path)
            rec.template = template
        return template
