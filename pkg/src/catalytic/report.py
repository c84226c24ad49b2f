"""Verification record shared by the classical and quantum protocols."""

from __future__ import annotations

from dataclasses import dataclass, field

RESIDUAL_TOL = 1e-10
DISTANCE_SLACK = 1e-12


@dataclass
class TransitionReport:
    """Outcome of checking one catalytic transition.

    ``passed`` requires the catalyst marginal to be unchanged within 1e-10,
    the system output to be within ``max(epsilon_certified, epsilon_claim)``
    of the target (plus 1e-12 of rounding slack) and every boolean entry of
    ``checks`` to hold.
    """

    kind: str
    catalyst_invariance_residual: float
    output_distance: float
    epsilon_certified: float
    epsilon_claim: float
    entropy_in: float
    entropy_out: float
    mutual_information: float
    dims: dict
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def entropy_change(self) -> float:
        return self.entropy_out - self.entropy_in

    @property
    def invariance_ok(self) -> bool:
        return self.catalyst_invariance_residual <= RESIDUAL_TOL

    @property
    def distance_ok(self) -> bool:
        return self.output_distance <= max(self.epsilon_certified, self.epsilon_claim) + DISTANCE_SLACK

    @property
    def passed(self) -> bool:
        flags = [v for v in self.checks.values() if isinstance(v, bool)]
        return self.invariance_ok and self.distance_ok and all(flags)

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "pass": self.passed,
            "catalyst_invariance_residual": float(self.catalyst_invariance_residual),
            "output_distance": float(self.output_distance),
            "epsilon_certified": float(self.epsilon_certified),
            "epsilon_claim": float(self.epsilon_claim),
            "entropy_in": float(self.entropy_in),
            "entropy_out": float(self.entropy_out),
            "entropy_change": float(self.entropy_change),
            "mutual_information": float(self.mutual_information),
            "dims": {k: int(v) for k, v in self.dims.items()},
            "checks": dict(self.checks),
        }
        if timings:
            out["timings"] = {k: float(v) for k, v in self.timings.items()}
        return out
