"""Source catalogs: a blacklist of unreliable outlets and a whitelist of professional ones."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from rtscope.errors import InputError
from rtscope.ingest.urls import NormalizedUrl

log = logging.getLogger(__name__)


class SourceClass(Enum):
    UNRELIABLE = "unreliable"
    RELIABLE = "reliable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SourceCatalog:
    """Disjoint domain sets; a domain listed on both sides stays unreliable only."""

    unreliable: frozenset[str]
    reliable: frozenset[str]

    @classmethod
    def from_domains(cls, unreliable: Iterable[str], reliable: Iterable[str]) -> "SourceCatalog":
        bad = frozenset(_clean_domain(d) for d in unreliable) - frozenset({""})
        good = frozenset(_clean_domain(d) for d in reliable) - frozenset({""})
        overlap = bad & good
        if overlap:
            log.warning(
                "%d domain(s) on both lists kept as unreliable only: %s",
                len(overlap),
                ", ".join(sorted(overlap)),
            )
        return cls(unreliable=bad, reliable=good - bad)


def _clean_domain(line: str) -> str:
    domain = line.strip().lower()
    if domain.startswith("www.") and len(domain) > 4:
        domain = domain[4:]
    return domain


def _read_domain_file(path: Path) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read source catalog {path}: {exc}") from exc
    domains = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            domains.append(stripped)
    return domains


def load_source_catalog(unreliable_path: Path | str, reliable_path: Path | str) -> SourceCatalog:
    """Load both catalog files (one domain per line, ``#`` comments allowed)."""
    catalog = SourceCatalog.from_domains(
        _read_domain_file(Path(unreliable_path)),
        _read_domain_file(Path(reliable_path)),
    )
    if not catalog.unreliable:
        raise InputError(f"unreliable-source list {unreliable_path} is empty")
    return catalog


def host_suffixes(host: str) -> Iterator[str]:
    """Yield the host and every parent domain, e.g. a.b.c -> a.b.c, b.c, c."""
    labels = host.split(".")
    for start in range(len(labels)):
        yield ".".join(labels[start:])


def classify_domain(url: NormalizedUrl, catalog: SourceCatalog) -> SourceClass:
    """Classify by host-suffix walk; the blacklist wins over the whitelist."""
    suffixes = list(host_suffixes(url.host))
    if any(suffix in catalog.unreliable for suffix in suffixes):
        return SourceClass.UNRELIABLE
    if any(suffix in catalog.reliable for suffix in suffixes):
        return SourceClass.RELIABLE
    return SourceClass.UNKNOWN
