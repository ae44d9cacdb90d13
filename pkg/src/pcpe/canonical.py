import hashlib
import json


def canonical_dumps(data: object) -> bytes:
    """
    Byte-deterministic JSON: no whitespace, UTF-8, key order exactly
    as built by the caller. Callers sort map keys themselves where the
    format says so, so field order stays as listed.
    """

    return json.dumps(
        data, ensure_ascii=False, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
