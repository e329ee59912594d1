"""
Finite-difference gradient checks for the inbetween toolkit.

Each check module registers its checks with :data:`registry.registry` on
import; :class:`runner.GradcheckRunner` runs them.
"""
