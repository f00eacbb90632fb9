"""Named registries and JSON-config builders for systems, targets, descent
rates, Lyapunov candidates, and feedbacks.

Config values are data, never code: coefficient functions, cones, W shapes,
and feedback laws are referenced by name from the registries below, so a
config file can only select built-in ingredients and set their parameters.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import example as ex
from .clf import LyapunovCandidate
from .core import ControlPolynomialSystem, GrowthRate, KLFunction, Target
from .errors import ConfigError
from .sampling import Feedback, PiecewiseConstantSignal
from .transforms import ExtendedControl

COEFFICIENTS: dict = {
    # name -> (callable(x, e) -> Array, description)
    "linear_drift": (lambda x, e: x, "f_k(x, e) = x"),
    "negative_cubic_gain": (lambda x, e: -(x**3) * e, "f_k(x, e) = -x^3 e"),
    "zero": (lambda x, e: np.zeros_like(x), "f_k(x, e) = 0"),
}

CONES: dict = {
    "nonneg": lambda u: bool(np.all(u >= 0.0)),
    "full": lambda u: True,
}


def build_target(spec) -> Target:
    if spec is None:
        return Target.point(1)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("target spec must be a dict with a 'kind'")
    kind = spec["kind"]
    if kind == "point":
        return Target.point(int(spec.get("n", 1)))
    if kind == "ball":
        if "radius" not in spec:
            raise ConfigError("ball target needs a 'radius'")
        return Target.ball(float(spec["radius"]), int(spec.get("n", 1)))
    raise ConfigError(f"unknown target kind '{kind}'")


def build_system(spec) -> tuple:
    """(system, target) from a catalog name or an inline spec dict."""
    if isinstance(spec, str):
        if spec == "cubic-damped":
            fixture = ex.cubic_damped_fixture()
            return fixture.system, fixture.target
        raise ConfigError(f"unknown catalog system '{spec}'")
    if not isinstance(spec, dict):
        raise ConfigError("system spec must be a catalog name or a dict")
    try:
        n = int(spec["n"])
        m = int(spec["m"])
        degree = int(spec["degree"])
        term_spec = spec["terms"]
    except KeyError as missing:
        raise ConfigError(f"system spec is missing {missing}") from None
    terms = []
    for key, name in term_spec.items():
        try:
            order = int(key)
        except ValueError:
            raise ConfigError(f"term order '{key}' is not an integer") from None
        if name not in COEFFICIENTS:
            raise ConfigError(f"unknown coefficient '{name}'")
        terms.append((order, COEFFICIENTS[name][0]))
    cone_name = spec.get("cone", "nonneg")
    if cone_name not in CONES:
        raise ConfigError(f"unknown cone '{cone_name}'")
    system = ControlPolynomialSystem(
        n=n,
        m=m,
        degree=degree,
        terms=tuple(sorted(terms)),
        cone_contains=CONES[cone_name],
        name=str(spec.get("name", "inline")),
    )
    return system, build_target(spec.get("target"))


def build_beta(spec) -> KLFunction:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("beta spec must be a dict with a 'name'")
    name = spec["name"]
    if name == "example":
        return KLFunction.exponential(scale=1.0, rate=0.5)
    if name == "exp":
        return KLFunction.exponential(
            scale=float(spec.get("scale", 1.0)), rate=float(spec.get("rate", 0.5))
        )
    raise ConfigError(f"unknown beta '{name}'")


def build_candidate(w_spec, gamma_spec) -> LyapunovCandidate:
    if not isinstance(w_spec, dict) or w_spec.get("name") != "norm":
        raise ConfigError("only the 'norm' Lyapunov shape W(x) = |x| is registered")

    def value(x):
        return float(np.linalg.norm(x))

    def subgradients(x):
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            raise ConfigError("subgradient selection requested at the target")
        return [np.asarray(x, dtype=float) / nrm]

    if not isinstance(gamma_spec, dict) or "name" not in gamma_spec:
        raise ConfigError("gamma spec must be a dict with a 'name'")
    gname = gamma_spec["name"]
    if gname == "example":
        gamma = ex.decrease_rate
    elif gname == "power":
        expo = float(gamma_spec.get("exponent", 3.0))
        scale = float(gamma_spec.get("scale", 1.0))
        if expo <= 0 or scale <= 0:
            raise ConfigError("power gamma needs positive exponent and scale")
        gamma = lambda r: scale * r**expo  # noqa: E731
    else:
        raise ConfigError(f"unknown gamma '{gname}'")
    return LyapunovCandidate(value=value, subgradients=subgradients, decrease_rate=gamma)


def build_n_func(spec) -> Callable[[float], float]:
    if isinstance(spec, dict) and "constant" in spec:
        level = float(spec["constant"])
        if not 0.0 < level <= 1.0:
            raise ConfigError("constant N must lie in (0, 1]")
        return lambda r: level
    if isinstance(spec, dict) and spec.get("name") == "example":
        return ex.n_lower_bound
    raise ConfigError("N spec must be {'name': 'example'} or {'constant': value}")


def build_feedback(spec, system: ControlPolynomialSystem) -> Feedback:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("feedback spec must be a dict with a 'name'")
    name = spec["name"]
    if name == "example-K":
        if system.name != "cubic-damped":
            raise ConfigError("feedback 'example-K' is tied to the cubic-damped system")
        return Feedback(fn=ex.feedback_original_fn, kind="original", label="2/x^2")
    if name == "example-K-hat":
        if system.name != "cubic-damped":
            raise ConfigError("feedback 'example-K-hat' is tied to the cubic-damped system")
        return Feedback(fn=ex.feedback_extended_fn, kind="extended", label="K_hat")
    if name == "constant":
        if "value" not in spec:
            raise ConfigError("constant feedback needs a 'value'")
        return Feedback.constant(np.asarray(spec["value"], dtype=float))
    if name == "constant-extended":
        if "w0" not in spec or "w" not in spec:
            raise ConfigError("constant-extended feedback needs 'w0' and 'w'")
        return Feedback.constant_extended(float(spec["w0"]), np.asarray(spec["w"], float))
    raise ConfigError(f"unknown feedback '{name}'")


def build_signal(spec) -> PiecewiseConstantSignal:
    if not isinstance(spec, dict):
        raise ConfigError("signal spec must be a dict")
    if "constant" in spec:
        return PiecewiseConstantSignal.constant(np.asarray(spec["constant"], float))
    if "breaks" in spec and "values" in spec:
        return PiecewiseConstantSignal(
            breaks=np.asarray(spec["breaks"], float),
            values=np.asarray(spec["values"], float),
        )
    raise ConfigError("signal spec needs 'constant' or 'breaks'+'values'")


def resolve_delta(spec) -> float:
    if isinstance(spec, dict):
        if spec.get("golden"):
            return ex.DELTA_MAX
        if "constant" in spec:
            value = float(spec["constant"])
            if value <= 0:
                raise ConfigError("delta must be positive")
            return value
    raise ConfigError("delta spec must be {'golden': true} or {'constant': value}")
