from __future__ import annotations

import enum
from dataclasses import dataclass


class Decision(enum.Enum):
    ACCEPT = "YES"
    REJECT = "NO"

    def __bool__(self):
        return self is Decision.ACCEPT


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of one tester run plus the resources it was charged.

    ``peak_memory_bits`` and ``comm_bits`` are ``None`` when the hosting
    runtime does not account that resource.
    """

    __test__ = False  # keep pytest from collecting this class

    decision: Decision
    samples_used: int
    peak_memory_bits: int | None = None
    comm_bits: int | None = None
    statistic: float | None = None
    threshold: float | None = None
    aborted: bool = False
    in_regime: bool = True
    reason: str = ""

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT
