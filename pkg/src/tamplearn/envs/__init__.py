"""Environment registry."""

from __future__ import annotations

from typing import Optional

from .base import AblatedDomain, Domain, LowLevelState, Problem
from .blocks import BlocksDomain
from .config import Config, load_config, load_domain_defaults, parse_config
from .cover import CoverDomain
from .painting import PaintingDomain

DOMAINS = {
    CoverDomain.name: CoverDomain,
    BlocksDomain.name: BlocksDomain,
    PaintingDomain.name: PaintingDomain,
}


def get_domain(name: str, config: Optional[Config] = None) -> Domain:
    try:
        cls = DOMAINS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {sorted(DOMAINS)}") from None
    return cls(config)


__all__ = [
    "AblatedDomain",
    "BlocksDomain",
    "CoverDomain",
    "DOMAINS",
    "Domain",
    "LowLevelState",
    "PaintingDomain",
    "Problem",
    "get_domain",
    "load_config",
    "load_domain_defaults",
    "parse_config",
]
