"""Requirement templates for the transmission surrogate benchmark.

Three parametric properties over the surrogate's speed/RPM/gear channels.
Unbounded "always" constraints are written over [0, 30), the simulation
window. The gear-2 membership test encodes the integer-valued gear channel
as a band, (gear >= 1.5) && (gear < 2.5), which is Boolean-exact for
integer gears and gives a 0.5 margin at satisfaction.
"""

from __future__ import annotations

from .stl import ParameterSpec, ParametricFormula, parse_formula

__all__ = ["transmission_templates", "template_by_name", "TEMPLATE_NAMES"]

_GEAR2 = "(gear >= 1.5) && (gear < 2.5)"

# Antecedent lookahead for "is about to be in gear 2": two samples at dt=0.01.
_EPS = 0.02

_SP_RPM_TEXT = "G[0,30)((speed < $pi1) && (RPM < $pi2))"

_RPM100_TEXT = "!(F[0,$tau)(speed >= 100) && G[0,30)(RPM < $pi))"

_STAY_TEXT = (
    f"G[0,25.9)( !( (!({_GEAR2})) && F[0,{_EPS})({_GEAR2}) )"
    f" || F[0,{_EPS})(G[0,$tau)({_GEAR2})) )"
)


def transmission_templates() -> dict[str, ParametricFormula]:
    """The three benchmark templates with their search boxes and directions.

    sp_rpm  - operating envelope: speed stays below pi1 and RPM below pi2.
              Margins grow with either threshold, so both are increasing.
    rpm100  - performance: the car cannot reach 100 mph within tau seconds
              while keeping RPM below pi. Widening the speed window or
              raising the RPM ceiling strengthens the negated claim, so
              margins shrink: both parameters are decreasing.
    stay    - shift quality: whenever the box shifts into gear 2 it stays
              there at least tau seconds. Longer dwell demands shrink the
              margin, so tau is decreasing.
    """
    sp_rpm = parse_formula(_SP_RPM_TEXT).with_parameter_specs(
        [
            ParameterSpec("pi1", "scale", 0.0, 200.0, "increasing"),
            ParameterSpec("pi2", "scale", 600.0, 8000.0, "increasing"),
        ]
    )
    rpm100 = parse_formula(_RPM100_TEXT).with_parameter_specs(
        [
            ParameterSpec("pi", "scale", 600.0, 8000.0, "decreasing"),
            ParameterSpec("tau", "time", 0.1, 30.0, "decreasing"),
        ]
    )
    stay = parse_formula(_STAY_TEXT).with_parameter_specs(
        [ParameterSpec("tau", "time", 0.05, 4.0, "decreasing")]
    )
    return {"sp_rpm": sp_rpm, "rpm100": rpm100, "stay": stay}


TEMPLATE_NAMES = ("sp_rpm", "rpm100", "stay")


def template_by_name(name: str) -> ParametricFormula:
    templates = transmission_templates()
    if name not in templates:
        raise KeyError(f"unknown template {name!r}; available: {sorted(templates)}")
    return templates[name]
