"""Scenario configuration: which regime to train and with what knobs.

Sweep grids mirror the hyperparameter values the experiments explore; a
single config holds one point of such a grid.  Under the clustered regimes
the pre-clustering phase always runs with client_fraction 0.1 and 3 local
epochs, so those two fields are validated rather than free.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..clustering import LINKAGES as HC_LINKAGES
from ..errors import ValidationError

SCENARIO_KINDS = ("centralised", "localised", "fl", "fl_hc", "fl_lft", "fl_hc_lft")

CLIENT_FRACTION_GRID = (0.1, 0.2, 0.3)
LOCAL_EPOCHS_GRID = (1, 3, 5)
HC_THRESHOLD_GRID = (0.8, 1.4, 2.0)
HC_ROUNDS_GRID = (3, 5, 10)

_HC_KINDS = ("fl_hc", "fl_hc_lft")
_FL_KINDS = ("fl", "fl_lft") + _HC_KINDS


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    k: int
    with_weather: bool
    seed: int
    client_fraction: float = 0.1
    local_epochs: int = 3
    hc_threshold: float | None = None
    hc_linkage: str | None = None
    hc_rounds: int | None = None
    batch_size: int = 256
    learning_rate: float = 0.001
    patience: int = 10
    epochs_cap: int = 500       # centralised and localised
    fl_rounds_cap: int = 500
    flhc_rounds_cap: int = 200  # total across the pre- and post-clustering phases
    lft_epochs_cap: int = 25

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValidationError(
                f"unknown scenario {self.kind!r}; expected one of {SCENARIO_KINDS}")
        if self.k < 1:
            raise ValidationError("window length K must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if not 0.0 < self.client_fraction <= 1.0:
            raise ValidationError("client_fraction must lie in (0, 1]")
        if self.local_epochs < 1:
            raise ValidationError("local_epochs must be >= 1")
        if self.batch_size < 1 or self.learning_rate <= 0 or self.patience < 1:
            raise ValidationError("bad optimizer settings")
        for cap in (self.epochs_cap, self.fl_rounds_cap, self.flhc_rounds_cap,
                    self.lft_epochs_cap):
            if cap < 1:
                raise ValidationError("caps must be >= 1")
        if self.kind in _HC_KINDS:
            if self.hc_threshold is None or self.hc_linkage is None or self.hc_rounds is None:
                raise ValidationError(
                    f"{self.kind} needs hc_threshold, hc_linkage, and hc_rounds")
            if not self.hc_threshold > 0:
                raise ValidationError("hc_threshold must be positive")
            if self.hc_linkage not in HC_LINKAGES:
                raise ValidationError(
                    f"unknown linkage {self.hc_linkage!r}; expected one of {HC_LINKAGES}")
            if not 1 <= self.hc_rounds < self.flhc_rounds_cap:
                raise ValidationError("hc_rounds must leave room under flhc_rounds_cap")
            if self.client_fraction != 0.1 or self.local_epochs != 3:
                raise ValidationError(
                    "clustered regimes fix client_fraction=0.1 and local_epochs=3")
        elif self.hc_threshold is not None or self.hc_linkage is not None \
                or self.hc_rounds is not None:
            raise ValidationError(f"{self.kind} takes no clustering settings")

    @property
    def variant_label(self) -> str:
        return f"k{self.k}{'+w' if self.with_weather else '-w'}"

    @property
    def entry_id(self) -> str:
        """Stable, human-readable identity of this config inside a run."""
        parts = [self.kind, self.variant_label]
        if self.kind in _FL_KINDS:
            parts.append(f"f{self.client_fraction:g}_e{self.local_epochs}")
        if self.kind in _HC_KINDS:
            parts.append(f"n{self.hc_rounds}_t{self.hc_threshold:g}_{self.hc_linkage}")
        return "__".join(parts)

    def to_dict(self) -> dict:
        return asdict(self)
