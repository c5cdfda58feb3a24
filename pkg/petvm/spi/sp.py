"""Stochastic procedures: a request PSP paired with an output PSP, plus latent hooks."""

from __future__ import annotations

import copy
from collections.abc import Hashable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Optional

from ..exceptions import MissingLatent
from .psp import PSP, NullRequestPSP

if TYPE_CHECKING:
    import numpy as np

    from ..node import Node

__all__ = ["SP", "SPAux", "SPRecord"]


class SPAux:
    """Mutable per-procedure store: sufficient statistics, latents and the like.

    Stores must not hold trace nodes; particles deep-copy them on first write.
    """

    clonable = True

    def clone(self) -> SPAux:
        return copy.deepcopy(self)


class SP:
    """A stochastic procedure.

    ``request_psp`` decides which families to request and ``output_psp``
    produces the application's value. Procedures that simulate hidden latents
    override the latent hooks; procedures with an internal transition operator
    over those latents set ``has_ae_kernel``.
    """

    def __init__(
        self,
        request_psp: Optional[PSP],
        output_psp: PSP,
        name: Optional[str] = None,
        aux_factory: Optional[Callable[[], SPAux]] = None,
    ):
        self.request_psp = request_psp if request_psp is not None else NullRequestPSP()
        self.output_psp = output_psp
        self.name = name or output_psp.name
        self.aux_factory = aux_factory

    def construct_aux(self) -> Optional[SPAux]:
        return self.aux_factory() if self.aux_factory is not None else None

    def construct_latent_db(self) -> Any:
        return None

    def simulate_latents(
        self, aux: SPAux, lsr: Hashable, restore: bool, latent_db: Any, rng: np.random.Generator
    ) -> float:
        if restore:
            raise MissingLatent(f"{self.name} keeps no latents to restore for {lsr!r}")
        return 0.0

    def detach_latents(self, aux: SPAux, lsr: Hashable, latent_db: Any) -> float:
        return 0.0

    def has_ae_kernel(self) -> bool:
        return False

    def ae_infer(self, aux: SPAux, rng: np.random.Generator) -> None:
        raise NotImplementedError(f"{self.name} has no internal transition operator")

    def __repr__(self) -> str:
        return f"<sp {self.name}>"


@dataclass(eq=False)
class SPRecord:
    """A made procedure as stored at its maker node: the SP, its aux and its requested families."""

    sp: SP
    aux: Optional[SPAux] = None
    families: dict[Hashable, Node] = field(default_factory=dict)

    def clone(self) -> SPRecord:
        aux = self.aux.clone() if self.aux is not None else None
        return SPRecord(self.sp, aux, dict(self.families))

    @classmethod
    def fresh(cls, sp: SP) -> SPRecord:
        return cls(sp, sp.construct_aux())
