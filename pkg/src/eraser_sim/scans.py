"""Named measurement scenarios and scan running.

Each scenario fixes the beam-block / pump configuration of one canonical
measurement:

========================  =====================================================
induced-coherence         reflected idler arm blocked; signal fringes show the
                          coherence induced between the two signal beams
idler-mz-single-pump      only the first crystal pumped; plain idler
                          Mach-Zehnder (alignment configuration)
idler-mz-which-path       first signal beam blocked; idler fringes at B keep a
                          constant incoherent floor and coincidences go flat
eraser                    no blocks; signal fringes at fixed idler delay, with
                          visibility following the erasure law
joint-scan                no blocks; both delays driven together in time
visibility-curve          no blocks; visibility extracted per idler delay
========================  =====================================================

A scan converts its coordinate (path difference in nm, or seconds for the
joint scan) to phases with the stored wavelengths, evaluates all three
first-order rates at every point, and can synthesize Poisson counts anchored
to reference counts-per-second at the two detectors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from . import __version__
from .errors import ContractViolationError, InvalidParameterError
from .fringes import synthesize_counts
from .model import rates, scan_visibility
from .optics import (
    BeamSplitterParams,
    PortSign,
    SetupParams,
    SpdcSourceParams,
    default_setup,
    phase_from_path,
)

__all__ = [
    "ScenarioName",
    "Scenario",
    "ScanAxis",
    "ScanSpec",
    "NoiseParams",
    "ScanTable",
    "apply_overrides",
    "resolve_scenario",
    "run_scan",
    "visibility_curve",
]


class ScenarioName(enum.Enum):
    INDUCED_COHERENCE = "induced-coherence"
    IDLER_MZ_SINGLE_PUMP = "idler-mz-single-pump"
    IDLER_MZ_WHICH_PATH = "idler-mz-which-path"
    ERASER = "eraser"
    JOINT_SCAN = "joint-scan"
    VISIBILITY_CURVE = "visibility-curve"


# The defining switches of each scenario; overrides may not contradict these.
_SCENARIO_SWITCHES: dict[ScenarioName, dict[str, Any]] = {
    ScenarioName.INDUCED_COHERENCE: {
        "block_reflected_idler": True,
        "block_signal_s1": False,
    },
    ScenarioName.IDLER_MZ_SINGLE_PUMP: {
        "src2.c": 0j,
        "block_reflected_idler": False,
        "block_signal_s1": False,
    },
    ScenarioName.IDLER_MZ_WHICH_PATH: {
        "block_signal_s1": True,
        "block_reflected_idler": False,
    },
    ScenarioName.ERASER: {
        "block_reflected_idler": False,
        "block_signal_s1": False,
    },
    ScenarioName.JOINT_SCAN: {
        "block_reflected_idler": False,
        "block_signal_s1": False,
    },
    ScenarioName.VISIBILITY_CURVE: {
        "block_reflected_idler": False,
        "block_signal_s1": False,
    },
}


@dataclass(frozen=True)
class Scenario:
    """A named scenario plus any parameter overrides (dotted keys)."""

    name: ScenarioName
    overrides: Mapping[str, Any] = field(default_factory=dict)


def _set_dotted(p: SetupParams, key: str, value: Any) -> SetupParams:
    head, _, tail = key.partition(".")
    if not hasattr(p, head):
        raise InvalidParameterError(f"unknown setup key {key!r}")
    if not tail:
        return replace(p, **{head: value})
    sub = getattr(p, head)
    if isinstance(sub, BeamSplitterParams):
        if tail == "t":
            return replace(p, **{head: BeamSplitterParams(t=float(value), port_sign=sub.port_sign)})
        if tail == "port_sign":
            sign = value if isinstance(value, PortSign) else PortSign(value)
            return replace(p, **{head: BeamSplitterParams(t=sub.t, port_sign=sign)})
    if isinstance(sub, SpdcSourceParams):
        if tail == "c":
            return replace(p, **{head: SpdcSourceParams(c=complex(value))})
        if tail == "gamma":
            return replace(p, **{head: SpdcSourceParams(gamma=float(value), pump_amplitude=sub.pump_amplitude)})
        if tail == "pump_amplitude":
            return replace(p, **{head: SpdcSourceParams(gamma=sub.gamma, pump_amplitude=complex(value))})
    raise InvalidParameterError(f"unknown setup key {key!r}")


def _get_dotted(p: SetupParams, key: str) -> Any:
    head, _, tail = key.partition(".")
    value = getattr(p, head)
    return getattr(value, tail) if tail else value


def apply_overrides(p: SetupParams, overrides: Mapping[str, Any]) -> SetupParams:
    """Apply dotted-key overrides (e.g. ``bs1.t``, ``dphi_i``) to a setup."""
    for key, value in overrides.items():
        p = _set_dotted(p, key, value)
    return p


def resolve_scenario(scenario: Scenario, base: SetupParams | None = None) -> SetupParams:
    """Merge defaults, scenario switches and overrides into one SetupParams.

    Overrides that contradict the scenario's defining block/pump switches are
    contract violations, not silent rewrites.
    """
    switches = _SCENARIO_SWITCHES[scenario.name]
    for key, forced in switches.items():
        if key in scenario.overrides and scenario.overrides[key] != forced:
            raise ContractViolationError(
                f"override {key}={scenario.overrides[key]!r} contradicts scenario "
                f"{scenario.name.value!r} (requires {key}={forced!r})"
            )
    p = base if base is not None else default_setup()
    p = apply_overrides(p, scenario.overrides)
    p = apply_overrides(p, switches)
    return p


class ScanAxis(enum.Enum):
    SIGNAL_PATH = "signal-path"
    IDLER_PATH = "idler-path"
    TIME_JOINT = "time-joint"


@dataclass(frozen=True)
class ScanSpec:
    """What to scan: the axis, its range (nm, or s for time-joint) and fixed phases.

    For the joint scan both trombones advance at ``speed`` nm/s from the
    configurable start offsets (default zero path difference).
    """

    axis: ScanAxis = ScanAxis.SIGNAL_PATH
    start: float = 0.0
    stop: float = 3232.0
    step: float = 20.0
    speed: float = 20.0
    fixed_dphi_i: float | None = None
    fixed_dphi_s: float | None = None
    offset_signal_nm: float = 0.0
    offset_idler_nm: float = 0.0

    def __post_init__(self):
        if self.step <= 0:
            raise InvalidParameterError(f"step must be positive, got {self.step!r}")
        if not self.start < self.stop:
            raise InvalidParameterError("start must be smaller than stop")

    def coordinates(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class NoiseParams:
    """Count-synthesis configuration.

    Reference counts per second anchor the normalized singles rates at their
    scan means; the coincidence channel uses the geometric mean of the two
    singles conversions (the absolute pair-flux unit is not fixed by the
    rate model).  ``accidental_window_s`` adds the rate_A*rate_B*window
    background to the coincidence channel; zero (default) disables it.
    """

    enabled: bool = False
    seed: int = 0
    exposure_s: float = 1.0
    ref_counts_a: float = 22000.0
    ref_counts_b: float = 14000.0
    accidental_window_s: float = 0.0


@dataclass(frozen=True)
class ScanTable:
    """One scan's coordinates, rates, optional counts, and full provenance."""

    x: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray
    r_ab: np.ndarray
    counts_a: np.ndarray | None
    counts_b: np.ndarray | None
    counts_ab: np.ndarray | None
    scenario: ScenarioName
    setup: SetupParams
    spec: ScanSpec
    noise: NoiseParams | None
    version: str = __version__

    def __len__(self) -> int:
        return int(self.x.size)


def _phases_at(
    setup: SetupParams, spec: ScanSpec, x: float
) -> tuple[float, float]:
    if spec.axis is ScanAxis.SIGNAL_PATH:
        dphi_s = phase_from_path(x, setup.lambda_s)
        dphi_i = spec.fixed_dphi_i if spec.fixed_dphi_i is not None else setup.dphi_i
    elif spec.axis is ScanAxis.IDLER_PATH:
        dphi_i = phase_from_path(x, setup.lambda_i)
        dphi_s = spec.fixed_dphi_s if spec.fixed_dphi_s is not None else setup.dphi_s
    else:
        dphi_s = phase_from_path(spec.offset_signal_nm + spec.speed * x, setup.lambda_s)
        dphi_i = phase_from_path(spec.offset_idler_nm + spec.speed * x, setup.lambda_i)
    return dphi_s, dphi_i


def run_scan(
    scenario: Scenario, spec: ScanSpec, noise: NoiseParams | None = None
) -> ScanTable:
    """Evaluate all three rates along the scan, optionally with Poisson counts.

    Deterministic: identical (scenario, spec, noise.seed) reproduce the same
    table bit for bit.
    """
    setup = resolve_scenario(scenario)
    xs = spec.coordinates()
    r_a = np.empty(xs.size)
    r_b = np.empty(xs.size)
    r_ab = np.empty(xs.size)
    for k, x in enumerate(xs):
        dphi_s, dphi_i = _phases_at(setup, spec, float(x))
        rp = rates(replace(setup, dphi_s=dphi_s, dphi_i=dphi_i))
        r_a[k], r_b[k], r_ab[k] = rp.r_a, rp.r_b, rp.r_ab

    counts_a = counts_b = counts_ab = None
    if noise is not None and noise.enabled:
        mean_a = float(np.mean(r_a))
        mean_b = float(np.mean(r_b))
        scale_a = noise.ref_counts_a / mean_a if mean_a > 0 else 0.0
        scale_b = noise.ref_counts_b / mean_b if mean_b > 0 else 0.0
        scale_ab = math.sqrt(scale_a * scale_b)
        accidental = (scale_a * r_a) * (scale_b * r_b) * noise.accidental_window_s
        seed = int(noise.seed)
        counts_a = synthesize_counts(scale_a * r_a, xs, 1.0, noise.exposure_s, seed * 4 + 0).y
        counts_b = synthesize_counts(scale_b * r_b, xs, 1.0, noise.exposure_s, seed * 4 + 1).y
        counts_ab = synthesize_counts(
            scale_ab * r_ab + accidental, xs, 1.0, noise.exposure_s, seed * 4 + 2
        ).y

    return ScanTable(
        x=xs,
        r_a=r_a,
        r_b=r_b,
        r_ab=r_ab,
        counts_a=counts_a,
        counts_b=counts_b,
        counts_ab=counts_ab,
        scenario=scenario.name,
        setup=setup,
        spec=spec,
        noise=noise if (noise is not None and noise.enabled) else None,
    )


def visibility_curve(
    scenario: Scenario, dphi_i_grid, rate: str = "r_ab"
) -> np.ndarray:
    """Visibility of the signal-delay fringes at each idler delay.

    Returns an array of (dphi_i, visibility) rows.  Only the no-block eraser
    configurations make sense here.
    """
    if scenario.name not in (ScenarioName.ERASER, ScenarioName.VISIBILITY_CURVE):
        raise ContractViolationError(
            "visibility_curve needs the eraser (or visibility-curve) scenario"
        )
    setup = resolve_scenario(scenario)
    rows = []
    for dphi_i in np.asarray(dphi_i_grid, dtype=float):
        vis = scan_visibility(replace(setup, dphi_i=float(dphi_i)), vary="dphi_s", rate=rate)
        rows.append((float(dphi_i), vis))
    return np.asarray(rows)
