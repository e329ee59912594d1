"""
Gradient Check Runner

Runs registered checks and collects a GradcheckReport. Importing the check
modules registers them with the global registry.
"""

from typing import Iterable, List, Optional

from inbetween.logging_config import get_logger
from inbetween.reports import GradcheckReport

from .registry import CheckRegistry, registry


class GradcheckRunner:
    """Runs the checks of one registry, all or by category."""

    def __init__(self, check_registry: Optional[CheckRegistry] = None):
        """
        Initialize the runner.

        Args:
            check_registry: Registry to run; the full built-in suite when None
        """
        self.registry = check_registry if check_registry is not None else load_default_checks()
        self.logger = get_logger("gradcheck")

    def selected(self, categories: Optional[Iterable[str]] = None) -> List[str]:
        if categories is None:
            return self.registry.list_checks()
        names: List[str] = []
        for category in categories:
            found = self.registry.list_checks(category)
            if not found:
                self.logger.warning(f"Category not found: {category}")
            names.extend(found)
        return names

    def run(self, categories: Optional[Iterable[str]] = None) -> GradcheckReport:
        report = GradcheckReport()
        for name in self.selected(categories):
            result = self.registry.run_check(name)
            report.results.append(result)
            level = "passed" if result.passed else "FAILED"
            self.logger.info(f"{name}: max relative error {result.max_relative_error:.3e} "
                             f"({result.seconds:.2f}s) {level}")
        self.logger.info(f"Gradient suite: {len(report.results) - len(report.failures())}/"
                         f"{len(report.results)} checks passed")
        return report


def load_default_checks() -> CheckRegistry:
    """Import every check module so its checks register, then return the registry."""
    from . import autodiff_checks  # noqa: F401
    from . import warp_checks  # noqa: F401
    from . import model_checks  # noqa: F401
    return registry
