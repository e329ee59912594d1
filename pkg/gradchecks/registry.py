"""
Gradient Check Registry

Checks are zero-argument functions returning the maximum relative error
between the analytic and finite-difference gradients of one operation. They
are registered with the :func:`gradcheck` decorator and grouped by category.
"""

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from inbetween.logging_config import get_logger
from inbetween.reports import OpCheckResult


DEFAULT_TOLERANCE = 1e-3


@dataclass
class CheckDefinition:
    """A registered check with its metadata."""
    name: str
    function: Callable[[], float]
    description: str
    category: str
    tolerance: float


class CheckRegistry:
    """Registry of finite-difference checks."""

    def __init__(self):
        self.checks: Dict[str, CheckDefinition] = {}
        self.categories: Dict[str, List[str]] = {}
        self.logger = get_logger("gradcheck_registry")

    def register(self, name: str, description: str, category: str = "autodiff",
                 tolerance: float = DEFAULT_TOLERANCE) -> Callable:
        """
        Decorator to register a check.

        Args:
            name: Check name, usually the operation under test
            description: What the check differentiates
            category: Check category
            tolerance: Largest acceptable relative error

        Returns:
            Decorator function
        """
        def decorator(func: Callable[[], float]) -> Callable[[], float]:
            if name in self.checks:
                raise ValueError(f"Check already registered: {name}")
            self.checks[name] = CheckDefinition(name, func, description, category, tolerance)
            self.categories.setdefault(category, []).append(name)
            self.logger.debug(f"Registered check: {name} in category: {category}")
            return func

        return decorator

    def get_check(self, name: str) -> Optional[CheckDefinition]:
        return self.checks.get(name)

    def list_checks(self, category: Optional[str] = None) -> List[str]:
        if category is None:
            return list(self.checks)
        return list(self.categories.get(category, []))

    def list_categories(self) -> Dict[str, List[str]]:
        return {category: list(names) for category, names in self.categories.items()}

    def run_check(self, name: str) -> OpCheckResult:
        """
        Run one check; exceptions are reported as failures, never raised.

        Raises:
            ValueError: If no check has this name
        """
        check = self.get_check(name)
        if not check:
            raise ValueError(f"Check not found: {name}")
        started = time.perf_counter()
        try:
            error = float(check.function())
            result = OpCheckResult(name=name, max_relative_error=error, tolerance=check.tolerance)
        except Exception as e:
            self.logger.error(f"Check {name} raised: {e}")
            result = OpCheckResult(name=name, tolerance=check.tolerance, error=f"{type(e).__name__}: {e}")
        result.seconds = time.perf_counter() - started
        return result


# Global registry instance
registry = CheckRegistry()


def gradcheck(name: str, description: str, category: str = "autodiff",
              tolerance: float = DEFAULT_TOLERANCE) -> Callable:
    """Register a check with the global registry."""
    return registry.register(name, description, category, tolerance)
