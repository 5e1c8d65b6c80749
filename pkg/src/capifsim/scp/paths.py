"""CAPIF service-name extraction from request URLs."""

from __future__ import annotations

from urllib.parse import urlsplit

from ..errors import CapifSimError


class MalformedUrl(CapifSimError, ValueError):
    """The request target has no usable service segment."""


def extract_capif_path(url: str) -> str:
    """Return the leading service segment of ``url``, e.g. ``/nsmf-pdusession``.

    Accepts absolute URLs and origin-form targets; resource identifiers,
    query strings and fragments are dropped.
    """
    if not isinstance(url, str) or not url or any(c.isspace() for c in url):
        raise MalformedUrl(f"not a request target: {url!r}")
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrl(f"cannot parse {url!r}: {exc}") from None
    if parts.scheme and not parts.netloc:
        raise MalformedUrl(f"absolute URL without authority: {url!r}")
    path = parts.path
    if not path.startswith("/"):
        raise MalformedUrl(f"request target must start with '/': {url!r}")
    segment = path[1:].split("/", 1)[0]
    if not segment or segment in (".", ".."):
        raise MalformedUrl(f"no service segment in {url!r}")
    return "/" + segment
