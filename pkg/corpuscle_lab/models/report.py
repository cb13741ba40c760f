from typing import Any, List

from pydantic import BaseModel, Field


class CheckFailure(BaseModel):
    name: str
    error: str
    detail: Any = None


class SelftestResult(BaseModel):
    successful: List[str]
    failed: List[dict]
    total_processed: int
    successful_count: int
    failed_count: int

    @classmethod
    def collect(cls, successful: List[str], failed: List[CheckFailure]) -> "SelftestResult":
        return cls(
            successful=successful,
            failed=[failure.model_dump() for failure in failed],
            total_processed=len(successful) + len(failed),
            successful_count=len(successful),
            failed_count=len(failed),
        )


class SplitSummary(BaseModel):
    """Polynomial splitting of a vector field into grad(Pi) and a sphere-tangent remainder."""

    potential: dict[str, Any]
    tangent: List[dict[str, Any]]
    max_abs_diff: float
    max_y_dot_tangent: float
    points: int


class RunSummary(BaseModel):
    command: str
    outputs: List[str] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)
