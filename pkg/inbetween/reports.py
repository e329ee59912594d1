"""
Report Types

Structured results passed from the training loop, the gradient-check suite,
the dataset validators and the evaluator to the command line layer.
"""

import math
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class StepReport(BaseModel):
    """Losses of one training iteration: n_critic critic losses and one generator loss."""
    iteration: int
    critic_losses: List[float]
    generator_loss: float
    seconds: float = 0.0

    @field_validator('critic_losses')
    @classmethod
    def validate_critic_losses(cls, v):
        if not v:
            raise ValueError("a training step records at least one critic loss")
        return v

    @property
    def loss_d_mean(self) -> float:
        return float(sum(self.critic_losses) / len(self.critic_losses))

    def csv_row(self) -> List[str]:
        """Row of ``losses.csv``; floats use repr so they parse back bitwise."""
        return [str(self.iteration), repr(self.loss_d_mean), repr(float(self.generator_loss))]


class OpCheckResult(BaseModel):
    """Outcome of one finite-difference check."""
    name: str
    max_relative_error: float = math.inf
    tolerance: float = 1e-3
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return (self.error is None and math.isfinite(self.max_relative_error)
                and self.max_relative_error < self.tolerance)


class GradcheckReport(BaseModel):
    """All check results of one suite run."""
    results: List[OpCheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    def failures(self) -> List[str]:
        return [r.name for r in self.results if not r.passed]

    @property
    def total_seconds(self) -> float:
        return sum(r.seconds for r in self.results)

    def render_table(self) -> str:
        width = max([len(r.name) for r in self.results] + [len("check")])
        lines = [f"{'check':<{width}}  max rel err  status"]
        for r in self.results:
            status = "ok" if r.passed else f"FAIL{': ' + r.error if r.error else ''}"
            lines.append(f"{r.name:<{width}}  {r.max_relative_error:11.3e}  {status}")
        lines.append(f"{len(self.results) - len(self.failures())}/{len(self.results)} checks passed "
                     f"in {self.total_seconds:.1f}s")
        return "\n".join(lines)


class OracleSummary(BaseModel):
    """Physics-oracle validation of a set of generated clips."""
    dataset: str
    clips_checked: int = 0
    violations: List[str] = Field(default_factory=list)

    @property
    def clips_failed(self) -> int:
        return len({v.split(":", 1)[0] for v in self.violations})

    @property
    def passed(self) -> bool:
        return not self.violations

    def render(self) -> str:
        lines = [f"{self.dataset}: {self.clips_checked - self.clips_failed}/{self.clips_checked} "
                 f"clips pass the physics oracles"]
        lines.extend(f"  {v}" for v in self.violations[:20])
        if len(self.violations) > 20:
            lines.append(f"  ... {len(self.violations) - 20} more")
        return "\n".join(lines)


class EvalReport(BaseModel):
    """Completion quality on held-out clips. MSE/PSNR compare against the real interior frames."""
    dataset: str
    clips: int
    samples: int
    diversity: float
    mse: float
    psnr: float

    def render(self) -> str:
        return "\n".join([
            f"dataset:   {self.dataset}",
            f"clips:     {self.clips} x {self.samples} samples",
            f"diversity: {self.diversity:.6f}",
            f"mse:       {self.mse:.6f}  (reference only)",
            f"psnr:      {self.psnr:.2f} dB  (reference only)",
        ])
