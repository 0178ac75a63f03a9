"""
Manifest loading and writing.

The manifest is a JSON array of records (see src/models/manifest.py). Loading
validates the schema, checks sequence_id uniqueness and, by default, checks
that every referenced file exists, reporting all missing paths at once.
"""

import json
from pathlib import Path

from pydantic import TypeAdapter, ValidationError

from src.models.manifest import DatasetManifest, ManifestRecord
from src.utils.exceptions import MediaFormatError, MediaValidationError

_RECORDS = TypeAdapter(list[ManifestRecord])


def load_manifest(path: str | Path, check_paths: bool = True) -> DatasetManifest:
    """
    Load a manifest file.

    Args:
        path: Manifest JSON path
        check_paths: Verify every referenced path exists (default True)

    Raises:
        MediaFormatError: Not JSON, not an array, or schema violations
        MediaValidationError: Duplicate ids or missing referenced files
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise MediaFormatError(component="media.manifest", message=f"Cannot read manifest: {e}", details={"path": str(path)}) from e
    except json.JSONDecodeError as e:
        raise MediaFormatError(component="media.manifest", message=f"Invalid JSON: {e}", details={"path": str(path)}) from e
    if not isinstance(raw, list):
        raise MediaFormatError(component="media.manifest", message="Manifest must be a JSON array of records")

    try:
        records = _RECORDS.validate_python(raw)
    except ValidationError as e:
        raise MediaFormatError(
            component="media.manifest",
            message=f"Invalid record(s): {e.error_count()} error(s)",
            details={"errors": [f"{err['loc']}: {err['msg']}" for err in e.errors()[:20]]},
        ) from e

    try:
        manifest = DatasetManifest(records=records, root=path.parent)
    except ValidationError as e:
        raise MediaValidationError(component="media.manifest", message=e.errors()[0]["msg"]) from e

    if check_paths:
        missing = [
            f"{record.sequence_id}: {rel}"
            for record in manifest.records
            for rel in record.referenced_paths()
            if not manifest.resolve(rel).exists()
        ]
        if missing:
            raise MediaValidationError(
                component="media.manifest",
                message=f"{len(missing)} referenced path(s) do not exist",
                details={"missing": missing},
            )
    return manifest


def write_manifest(path: str | Path, records: list[ManifestRecord]) -> None:
    """Write records as a JSON array with sorted keys (byte-stable output)."""
    payload = [record.model_dump(mode="json", exclude_none=True) for record in records]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
