"""Manifests recording the tool version, config digest and file digests of artifacts."""
import logging
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from marshmallow import ValidationError

from granulab.core.data.utils.hash import file_sha256, make_hash_sha256
from granulab.core.data.utils.io import read_json, write_json
from granulab.core.errors import DigestMismatchError, SchemaMismatchError
from granulab.core.schemas.artifacts import MANIFEST_FORMAT, MANIFEST_VERSION, ManifestSchema

logger = logging.getLogger(__name__)


def tool_version() -> str:
    """Return the installed granulab version, or `0+unknown` from a source tree."""
    try:
        return metadata.version('granulab')
    except metadata.PackageNotFoundError:
        return '0+unknown'


def config_digest(config: Any) -> str:
    """Return the digest identifying a configuration document or model."""
    return make_hash_sha256(config)


def write_manifest(fp: Union[str, Path], kind: str, config: dict,
                   files: Iterable[Union[str, Path]],
                   extra: Optional[dict] = None) -> dict:
    """Write a manifest next to the artifacts it describes.

    Args:
        fp: The manifest path.
        kind: What produced the artifacts, e.g. `dataset` or `model`.
        config: The fully resolved configuration document.
        files: The artifact files. Their digests are recorded relative to
            the manifest's directory.
        extra: Additional JSON-serializable metadata.

    Returns:
        The manifest document.
    """
    fp = Path(fp)
    base = fp.parent.resolve()
    digests = {}
    for f in files:
        path = Path(f).resolve()
        digests[path.relative_to(base).as_posix()] = file_sha256(path)
    document = {
        'format': MANIFEST_FORMAT,
        'version': MANIFEST_VERSION,
        'kind': kind,
        'tool_version': tool_version(),
        'config_digest': config_digest(config),
        'config': config,
        'files': digests,
        'extra': extra or {},
    }
    write_json(fp, ManifestSchema().dump(document))
    return document


def read_manifest(fp: Union[str, Path]) -> dict:
    """Read and validate a manifest.

    Raises:
        SchemaMismatchError: If the document is not a known manifest.
    """
    try:
        document = ManifestSchema().load(read_json(fp))
    except ValidationError as e:
        raise SchemaMismatchError(f'{fp} is not a valid manifest: {e.messages}') from e
    if document['version'] != MANIFEST_VERSION:
        raise SchemaMismatchError(
            f'{fp} has manifest version {document["version"]}, '
            f'expected {MANIFEST_VERSION}')
    return document


def verify_manifest(fp: Union[str, Path]) -> list[str]:
    """Re-check every file digest recorded in a manifest.

    Returns:
        The relative paths that were verified.

    Raises:
        DigestMismatchError: If a file is missing or its digest changed.
    """
    fp = Path(fp)
    document = read_manifest(fp)
    if document['config_digest'] != config_digest(document['config']):
        raise DigestMismatchError(f'{fp}: config does not match its digest')
    for name, expected in sorted(document['files'].items()):
        path = fp.parent / name
        if not path.is_file():
            raise DigestMismatchError(f'{fp}: {name} is missing')
        actual = file_sha256(path)
        if actual != expected:
            raise DigestMismatchError(f'{fp}: digest of {name} changed')
        logger.debug('verified %s', path)
    return sorted(document['files'])
