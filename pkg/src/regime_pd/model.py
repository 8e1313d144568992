"""The regime-switching model bundle shared by the solver and the oracle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .levy_measures import RegimeModel, SyncJumpSpec
from .regime_chain import GeneratorMatrix, validate_generator


@dataclass(frozen=True)
class SwitchingModel:
    regimes: tuple[RegimeModel, ...]
    generator: GeneratorMatrix
    jumps: SyncJumpSpec

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))
        H = len(self.regimes)
        if self.generator.H != H or self.jumps.H != H:
            raise ValueError(
                f"inconsistent regime counts: {H} regimes, generator {self.generator.H}x"
                f"{self.generator.H}, jump matrix {self.jumps.H}x{self.jumps.H}")

    @property
    def H(self) -> int:
        return len(self.regimes)

    @classmethod
    def build(cls, regimes: Sequence[RegimeModel], q, jumps: SyncJumpSpec | None = None):
        g = validate_generator(q)
        return cls(tuple(regimes), g, jumps if jumps is not None else SyncJumpSpec.none(g.H))

    @classmethod
    def single(cls, regime: RegimeModel) -> "SwitchingModel":
        return cls.build([regime], [[0.0]])
