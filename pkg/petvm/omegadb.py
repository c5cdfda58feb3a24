"""The archive a detach fills so that a later regeneration can restore the old trace exactly."""

from __future__ import annotations

from collections.abc import Hashable
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .node import Node
    from .spi.sp import SP

__all__ = ["OmegaDB"]


class OmegaDB:
    """Extracted node values, unevaluated requested families and per-procedure latent archives."""

    def __init__(self) -> None:
        self.values: dict[Node, Any] = {}
        self.sp_families: dict[tuple[SP, Hashable], Node] = {}
        self.latent_dbs: dict[SP, Any] = {}

    def has_value(self, node: Node) -> bool:
        return node in self.values

    def get_value(self, node: Node) -> Any:
        return self.values[node]

    def extract_value(self, node: Node, value: Any) -> None:
        self.values[node] = value

    def has_family(self, sp: SP, addr: Hashable) -> bool:
        return (sp, addr) in self.sp_families

    def get_family(self, sp: SP, addr: Hashable) -> Node:
        return self.sp_families[(sp, addr)]

    def register_family(self, sp: SP, addr: Hashable, root: Node) -> None:
        self.sp_families[(sp, addr)] = root

    def has_latent_db(self, sp: SP) -> bool:
        return sp in self.latent_dbs

    def get_latent_db(self, sp: SP) -> Any:
        return self.latent_dbs[sp]

    def register_latent_db(self, sp: SP, latent_db: Any) -> None:
        self.latent_dbs.setdefault(sp, latent_db)

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"OmegaDB(values={len(self.values)}, families={len(self.sp_families)}, latents={len(self.latent_dbs)})"
