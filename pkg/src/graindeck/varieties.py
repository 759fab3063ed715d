"""The seven Persian rice varieties in their canonical, frozen order.

The integer index of each variety is the row/column position used by every
probability vector and confusion matrix in the toolkit.
"""

import enum


class RiceVariety(enum.IntEnum):
    AliKazemi = 0
    AnbarBoo = 1
    Hashemi = 2
    Khazar = 3
    SadreeDomSiahe = 4
    SadreeDomZard = 5
    Shirodi = 6

    @classmethod
    def from_name(cls, name: str) -> "RiceVariety":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(
                f"unknown rice variety {name!r}; expected one of {VARIETY_NAMES}"
            ) from None


VARIETIES = tuple(RiceVariety)
VARIETY_NAMES = tuple(v.name for v in VARIETIES)
NUM_VARIETIES = len(VARIETIES)
