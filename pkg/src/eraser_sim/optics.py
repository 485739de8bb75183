"""Optical-element vocabulary and sign conventions for the coupled-interferometer setup.

The physical layout is fixed: two down-conversion crystals pumped coherently,
a splitter (bs1) dividing the first crystal's idler into a transmitted arm
(which seeds the second crystal) and a reflected arm, a recombining splitter
(bs3) closing the idler Mach-Zehnder onto detector B, and a splitter (bs2)
superposing the two signal beams onto detector A.  Two removable beam blocks
select the measurement scenario: one on the reflected idler arm, one on the
first signal beam.

Conventions adopted here and relied on everywhere else:

* splitters are lossless with real amplitudes; ``r`` is always derived from
  ``t``, and the single reflection minus sign sits on a declared port,
* all phases are in radians, all path lengths in nm; the only conversion is
  :func:`phase_from_path`,
* with the default port signs, the idler interferometer has its dark port at
  detector B for zero idler delay (lowest singles rate at zero path
  difference, peak at half a wavelength).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

# Defaults for the operating point used throughout: signal at 808 nm, idler
# at 632 nm, t = 0.67 for the idler-splitting bs1, balanced bs2/bs3, and a
# conversion amplitude deep in the single-pair regime.
DEFAULT_SIGNAL_WAVELENGTH_NM = 808.0
DEFAULT_IDLER_WAVELENGTH_NM = 632.0
DEFAULT_BS1_T = 0.67
BALANCED_T = math.sqrt(0.5)
DEFAULT_CONVERSION = 0.01

# |C| above this is no longer "much less than one"; the perturbative model
# degrades gracefully, so this only warns.
CONVERSION_WARN_THRESHOLD = 0.1


class PortSign(enum.Enum):
    """Which output carries the reflection minus sign of a lossless splitter."""

    MINUS_ON_PORT_1 = "minus-on-reflected-from-port-1"
    MINUS_ON_PORT_2 = "minus-on-reflected-from-port-2"


class Mode(enum.Enum):
    """Initial (unperturbed vacuum) modes of the network.

    The two aux modes exist only to absorb blocked beams so that a block can
    be modelled as a swap with fresh vacuum.
    """

    S01 = "s01"
    I01 = "i01"
    I0 = "i0"
    S02 = "s02"
    AUX_BLOCK_1 = "aux_block_1"
    AUX_BLOCK_2 = "aux_block_2"


#: Canonical mode ordering used by the exact Fock-space simulation.
MODE_ORDER = (
    Mode.S01,
    Mode.I01,
    Mode.I0,
    Mode.S02,
    Mode.AUX_BLOCK_1,
    Mode.AUX_BLOCK_2,
)


@dataclass(frozen=True)
class BeamSplitterParams:
    """Lossless splitter: amplitude transmissivity ``t`` plus a sign convention.

    ``r`` is never stored; it is derived so that t**2 + r**2 == 1 holds by
    construction.
    """

    t: float
    port_sign: PortSign = PortSign.MINUS_ON_PORT_1

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0):
            raise InvalidParameterError(
                f"beam splitter t must lie in [0, 1], got {self.t!r}"
            )

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.t * self.t)


@dataclass(frozen=True)
class SpdcSourceParams:
    """Down-converter strength.

    ``c`` is the conversion amplitude (dimensionless, complex); it may be
    given directly or as the product of an efficiency ``gamma`` and a
    classical pump amplitude.  When all three are supplied they must agree.
    """

    c: complex | None = None
    gamma: float | None = None
    pump_amplitude: complex | None = None

    def __post_init__(self):
        decomposed = self.gamma is not None and self.pump_amplitude is not None
        if self.c is None:
            object.__setattr__(
                self, "c", self.gamma * self.pump_amplitude if decomposed else DEFAULT_CONVERSION
            )
        elif decomposed:
            derived = self.gamma * self.pump_amplitude
            if abs(complex(self.c) - derived) > 1e-12 * max(1.0, abs(derived)):
                raise InvalidParameterError(
                    "inconsistent source parameters: c != gamma * pump_amplitude"
                )
        if abs(complex(self.c)) > CONVERSION_WARN_THRESHOLD:
            warnings.warn(
                f"conversion amplitude |c| = {abs(complex(self.c)):.3g} is outside "
                "the perturbative regime (|c| << 1); first-order rates may be "
                "inaccurate",
                stacklevel=2,
            )


def _default_bs1() -> BeamSplitterParams:
    return BeamSplitterParams(t=DEFAULT_BS1_T, port_sign=PortSign.MINUS_ON_PORT_1)


def _default_bs23() -> BeamSplitterParams:
    return BeamSplitterParams(t=BALANCED_T, port_sign=PortSign.MINUS_ON_PORT_2)


@dataclass(frozen=True)
class SetupParams:
    """Complete parameter set of the two coupled interferometers.

    Immutable; all model operations are pure functions of one of these.
    Wavelength validity is reported by :func:`validate_setup` rather than
    enforced here, so that a bad configuration can still be inspected.
    """

    bs1: BeamSplitterParams = field(default_factory=_default_bs1)
    bs2: BeamSplitterParams = field(default_factory=_default_bs23)
    bs3: BeamSplitterParams = field(default_factory=_default_bs23)
    src1: SpdcSourceParams = field(default_factory=SpdcSourceParams)
    src2: SpdcSourceParams = field(default_factory=SpdcSourceParams)
    dphi_s: float = 0.0
    dphi_i: float = 0.0
    block_reflected_idler: bool = False
    block_signal_s1: bool = False
    lambda_s: float = DEFAULT_SIGNAL_WAVELENGTH_NM
    lambda_i: float = DEFAULT_IDLER_WAVELENGTH_NM


def default_setup(**overrides) -> SetupParams:
    """The default operating point, optionally with field replacements."""
    return SetupParams(**overrides)


def phase_from_path(dx: float, lam: float) -> float:
    """Convert a path-length difference (nm) to a phase (radians).

    No wrapping is applied; callers may reduce mod 2*pi for display.
    """
    if lam <= 0.0:
        raise InvalidParameterError(f"wavelength must be positive, got {lam!r}")
    return 2.0 * math.pi * dx / lam


def mixing_matrix(bs: BeamSplitterParams) -> np.ndarray:
    """2x2 unitary of a lossless splitter acting on its (port 1, port 2) modes.

    Row 0 is the output aligned with port 1 transmission, row 1 with port 2
    transmission; the reflection minus sign sits per ``bs.port_sign``.  For
    the port-1 convention this is ``[[t, r], [-r, t]]``.
    """
    t, r = bs.t, bs.r
    if bs.port_sign is PortSign.MINUS_ON_PORT_1:
        return np.array([[t, r], [-r, t]], dtype=complex)
    return np.array([[t, -r], [r, t]], dtype=complex)


@dataclass(frozen=True)
class ValidationIssue:
    """One finding of :func:`validate_setup`; ``severity`` is error|warning|note."""

    severity: str
    key: str
    message: str


def validate_setup(p: SetupParams) -> list[ValidationIssue]:
    """Report problems with a parameter set without mutating or raising.

    Errors make the setup unusable; warnings and notes do not.
    """
    issues: list[ValidationIssue] = []
    if p.lambda_s <= 0.0:
        issues.append(
            ValidationIssue("error", "lambda_s", f"signal wavelength must be positive, got {p.lambda_s!r}")
        )
    if p.lambda_i <= 0.0:
        issues.append(
            ValidationIssue("error", "lambda_i", f"idler wavelength must be positive, got {p.lambda_i!r}")
        )
    for key, src in (("src1", p.src1), ("src2", p.src2)):
        if abs(complex(src.c)) > CONVERSION_WARN_THRESHOLD:
            issues.append(
                ValidationIssue(
                    "warning",
                    f"{key}.c",
                    f"|c| = {abs(complex(src.c)):.3g} is outside the perturbative regime",
                )
            )
    if p.block_reflected_idler and p.block_signal_s1:
        issues.append(
            ValidationIssue(
                "note",
                "blocks",
                "both beam blocks are inserted; no interference survives anywhere",
            )
        )
    return issues


def setup_errors(p: SetupParams) -> list[ValidationIssue]:
    """The error-severity subset of :func:`validate_setup`."""
    return [i for i in validate_setup(p) if i.severity == "error"]
