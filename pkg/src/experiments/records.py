import logging

from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

MeasuredValue = bool | int | float | str | None


class TrialRecord(BaseModel):
    """
    Outcome of a single trial. Records contain no timing, so a campaign
    rerun with the same seed reproduces them byte for byte.
    """
    model_config = ConfigDict(populate_by_name=True)

    trial_index: int = Field(description="Position of the trial in the campaign")
    derived_seed: int = Field(description="Seed derived from (master seed, index)")
    measured: dict[str, MeasuredValue] = Field(
        default_factory=dict,
        description="Named quantities measured by the experiment"
    )
    passed: bool = Field(
        default=False,
        alias="pass",
        description="Whether the trial met the experiment's criterion"
    )
    error: str | None = Field(
        default=None,
        description="Error tag and message if the trial raised"
    )

    @property
    def error_tag(self) -> str | None:
        return self.error.split(":", 1)[0] if self.error else None

    def to_row(self) -> dict[str, MeasuredValue]:
        """Flat row for CSV output."""
        row: dict[str, MeasuredValue] = {
            "trial_index": self.trial_index,
            "derived_seed": self.derived_seed,
            "pass": self.passed,
            "error": self.error,
        }
        row.update(self.measured)
        return row


class QuantityAggregate(BaseModel):
    min: float
    median: float
    max: float
    count: int


class CampaignSummary(BaseModel):
    """Campaign-level view of the records."""
    name: str
    experiment: str
    trial_count: int
    pass_count: int
    wilson_interval_95: tuple[float, float]
    aggregates: dict[str, QuantityAggregate] = Field(default_factory=dict)
    error_tags: dict[str, int] = Field(default_factory=dict)
    acceptance: bool | None = Field(
        default=None,
        description="Verdict against min_pass; None when the campaign is not an acceptance run"
    )
    min_pass: int | None = None
    config_hash: str
    master_seed: int
    wall_time: float = Field(description="Seconds; not part of the reproducible records")

    @property
    def pass_fraction(self) -> float:
        return self.pass_count / self.trial_count if self.trial_count else 0.0
