"""The cubic-damped benchmark system and its closed-form oracles.

One-dimensional system x' = x - x^3 u with controls u >= 0 and the origin
as target.  With controls confined to any bounded interval [0, M] the state
can only reach 1/sqrt(M), so stabilization genuinely needs controls that
grow unboundedly near the target.  The fixture bundles the system together
with the certified Lyapunov data and the stabilizing feedbacks in both the
original and the simplex-extended form, so every pipeline stage has an
exact reference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ControlPolynomialSystem, KLFunction, Target
from .errors import DomainError
from .sampling import Feedback
from .transforms import ExtendedControl

GOLDEN_MEAN = (1.0 + math.sqrt(5.0)) / 2.0
#: Largest sampling diameter for which the node contraction bound holds.
DELTA_MAX = math.log(GOLDEN_MEAN)


class ContractionBoundWarning(UserWarning):
    """Raised when a sampling gap exceeds the certified contraction range."""


def cubic_damped_system() -> ControlPolynomialSystem:
    """x' = x - x^3 u, u in [0, +inf), as a degree-1 control polynomial."""
    return ControlPolynomialSystem(
        n=1,
        m=1,
        degree=1,
        terms=(
            (0, lambda x, e: x),
            (1, lambda x, e: -(x**3) * e),
        ),
        cone_contains=lambda u: bool(u[0] >= 0.0),
        name="cubic-damped",
    )


def decrease_rate(r: float) -> float:
    """gamma(r) = r^3 / (2 (2 + r^2)), the certified decrease rate."""
    return r**3 / (2.0 * (2.0 + r**2))


def n_lower_bound(r: float) -> float:
    """N(r) = r^2 / (2 + r^2): admissible w0 floor used by the synthesis."""
    return r**2 / (2.0 + r**2)


def feedback_extended_fn(x) -> ExtendedControl:
    """K_hat(x) = (x^2/(2+x^2), 2/(2+x^2))."""
    v = float(np.asarray(x).reshape(-1)[0])
    n = n_lower_bound(abs(v))
    return ExtendedControl(w0=n, w=np.array([1.0 - n]))


def feedback_original_fn(x) -> np.ndarray:
    """K(x) = 2 / x^2, the locally bounded unbounded-near-target feedback."""
    v = float(np.asarray(x).reshape(-1)[0])
    if v == 0.0:
        raise DomainError("feedback undefined at the target")
    return np.array([2.0 / v**2])


@dataclass(frozen=True)
class ExampleFixture:
    system: ControlPolynomialSystem
    target: Target
    lyapunov_value: Callable[[np.ndarray], float]
    lyapunov_subgradients: Callable[[np.ndarray], list]
    gamma: Callable[[float], float]
    n_floor: Callable[[float], float]
    feedback: Feedback
    feedback_extended: Feedback
    beta: KLFunction
    delta_max: float


def cubic_damped_fixture() -> ExampleFixture:
    """Bundle of the benchmark system with all of its certified data."""
    return ExampleFixture(
        system=cubic_damped_system(),
        target=Target.point(1),
        lyapunov_value=lambda x: float(abs(x[0])),
        lyapunov_subgradients=lambda x: [np.array([math.copysign(1.0, x[0])])],
        gamma=decrease_rate,
        n_floor=n_lower_bound,
        feedback=Feedback(fn=feedback_original_fn, kind="original", label="2/x^2"),
        feedback_extended=Feedback(fn=feedback_extended_fn, kind="extended", label="K_hat"),
        beta=KLFunction.exponential(scale=1.0, rate=0.5),
        delta_max=DELTA_MAX,
    )


def closed_form_constant_control(z: float, M: float, t: float) -> float:
    """Solution of x' = x - M x^3 from z, written overflow-safe:

        x(t) = z / sqrt(z^2 M (1 - exp(-2t)) + exp(-2t)).
    """
    if z == 0.0:
        raise DomainError("closed form needs z != 0")
    if not M > 0:
        raise DomainError("M must be positive")
    decay = math.exp(-2.0 * t)
    return z / math.sqrt(z * z * M * (1.0 - decay) + decay)


def closed_form_jump(z: float, s: float) -> float:
    """Distance along the pure fast motion (w0, w) = (0, 1):

        d(y(s)) = 1 / sqrt(2 s + 1/z^2) = |z| / sqrt(2 s z^2 + 1).
    """
    if z == 0.0:
        raise DomainError("closed form needs z != 0")
    if s < 0:
        raise DomainError("s must be nonnegative")
    return abs(z) / math.sqrt(2.0 * s * z * z + 1.0)


def node_contraction_ratio(delta: float) -> float:
    """Per-node contraction e^delta / sqrt(2 e^{2 delta} - 1) of the sampled
    closed loop; bounded by e^{-delta/2} for delta <= ln(golden mean), with
    equality exactly at the endpoint."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    if delta > DELTA_MAX + 1e-15:
        warnings.warn(
            f"delta={delta} exceeds ln(golden mean); the e^(-delta/2) bound "
            "is no longer implied",
            ContractionBoundWarning,
            stacklevel=2,
        )
    return math.exp(delta) / math.sqrt(2.0 * math.exp(2.0 * delta) - 1.0)
