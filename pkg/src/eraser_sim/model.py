"""First-order biphoton model of the coupled interferometers.

Each detector field is propagated through the network and kept to first
order in the conversion amplitudes: an annihilation part over the initial
modes (order zero) plus a creation part whose every coefficient is linear in
c1 or c2.  From those coefficients,

* a singles rate is the vacuum expectation <F' F> = sum_m |cre(m)|^2,
* the coincidence rate is |sum_m A.cre(m) * B.ann(m)|^2, the leading-order
  vacuum-to-vacuum contraction of B applied after A.  (The reversed
  contraction sum_m B.cre(m) * A.ann(m) has the same value because the two
  detector fields commute; summing both would double count.)

For balanced splitters, no blocks and equal conversion amplitudes c the
coincidence rate collapses to the closed form

    (|c|^2 / 4) * (2 - cos(dphi_i) - sqrt(8) * sin(dphi_i/2) * sin(dphi_s - dphi_i/2))

whose fringe visibility over dphi_s is

    V(dphi_i) = sqrt(8) * |sin(dphi_i/2)| / (2 - cos(dphi_i)).

V vanishes at even multiples of pi (which-crystal information is complete:
only the second source's idlers reach detector B) and reaches 1 at odd
multiples of pi/2 (the two idler origins are balanced and the tag is
erased).

All rates are in normalized units: the proportionality constant between
|amplitude|^2 and detected counts per second lives downstream in the count
synthesis, not here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractViolationError, InvalidParameterError
from .optics import Mode, SetupParams, mixing_matrix, setup_errors

__all__ = [
    "FieldOperator",
    "RatePair",
    "detector_fields",
    "singles_rate",
    "coincidence_rate",
    "rates",
    "balanced_coincidence_closed_form",
    "eraser_visibility",
    "scan_visibility",
]


@dataclass(frozen=True)
class FieldOperator:
    """First-order expansion of a detector field over the initial modes.

    ``ann`` holds the order-zero annihilation coefficients, ``cre`` the
    order-one creation coefficients (each a sum of terms linear in c1 or
    c2).  Coefficients of unlisted modes are zero.  ``params`` records the
    setup snapshot the field was built from.
    """

    ann: Mapping[Mode, complex]
    cre: Mapping[Mode, complex]
    params: SetupParams


@dataclass(frozen=True)
class RatePair:
    """Normalized singles rates at the two detectors plus their coincidence rate."""

    r_a: float
    r_b: float
    r_ab: float


def _scaled(coeffs: dict[Mode, complex], factor: complex) -> dict[Mode, complex]:
    return {m: factor * v for m, v in coeffs.items()}


def _combined(*parts: dict[Mode, complex]) -> dict[Mode, complex]:
    out: dict[Mode, complex] = {}
    for part in parts:
        for m, v in part.items():
            out[m] = out.get(m, 0j) + v
    return {m: v for m, v in out.items() if v != 0}


def detector_fields(p: SetupParams) -> tuple[FieldOperator, FieldOperator]:
    """Build the detector-A (signal) and detector-B (idler) field operators.

    The network is composed from the splitter matrices so that any port-sign
    choice stays self-consistent; with the default conventions the composite
    annihilation coefficient of the first idler mode at detector B is
    -r1*r3 + t1*t3*e^(i dphi_i), which vanishes for balanced splitters at
    zero idler delay (the dark-port anchor).

    Beam blocks delete the blocked arm and substitute fresh vacuum on an aux
    mode, so blocked configurations stay properly normalized.
    """
    errors = setup_errors(p)
    if errors:
        raise InvalidParameterError(
            "; ".join(f"{i.key}: {i.message}" for i in errors)
        )

    m1 = mixing_matrix(p.bs1)
    m2 = mixing_matrix(p.bs2)
    m3 = mixing_matrix(p.bs3)
    c1 = complex(p.src1.c)
    c2 = complex(p.src2.c)
    es = cmath.exp(1j * p.dphi_s)
    ei = cmath.exp(1j * p.dphi_i)

    # Source 1 output fields over initial modes.
    s1_ann = {Mode.S01: 1.0 + 0j}
    s1_cre = {Mode.I01: 1j * c1}
    i1_ann = {Mode.I01: 1.0 + 0j}
    i1_cre = {Mode.S01: 1j * c1}

    # bs1 splits the first idler against vacuum: row 0 transmits toward the
    # second crystal, row 1 reflects toward the recombiner.
    trans_ann = _combined(_scaled(i1_ann, m1[0, 0]), {Mode.I0: m1[0, 1]})
    trans_cre = _scaled(i1_cre, m1[0, 0])
    refl_ann = _combined(_scaled(i1_ann, m1[1, 0]), {Mode.I0: m1[1, 1]})
    refl_cre = _scaled(i1_cre, m1[1, 0])

    # Source 2 is seeded by the transmitted idler; only its order-zero part
    # matters for pair creation at this order.
    s2_ann = {Mode.S02: 1.0 + 0j}
    s2_cre = {m: 1j * c2 * v.conjugate() for m, v in trans_ann.items()}
    i2_ann = dict(trans_ann)
    i2_cre = _combined(trans_cre, {Mode.S02: 1j * c2})

    # Idler Mach-Zehnder: the delayed (transmitted) arm carries e^(i dphi_i),
    # the reflected arm may be blocked; detector B sits on the output where
    # the delayed arm transmits.
    if p.block_reflected_idler:
        refl_ann = {Mode.AUX_BLOCK_1: 1.0 + 0j}
        refl_cre = {}
    b_ann = _combined(_scaled(refl_ann, m3[1, 0]), _scaled(i2_ann, m3[1, 1] * ei))
    b_cre = _combined(_scaled(refl_cre, m3[1, 0]), _scaled(i2_cre, m3[1, 1] * ei))

    # Signal recombiner: the first signal is delayed by dphi_s (and may be
    # blocked); detector A sits on the output where the second signal
    # transmits.
    if p.block_signal_s1:
        s1_ann = {Mode.AUX_BLOCK_2: 1.0 + 0j}
        s1_cre = {}
    a_ann = _combined(_scaled(s1_ann, m2[1, 0] * es), _scaled(s2_ann, m2[1, 1]))
    a_cre = _combined(_scaled(s1_cre, m2[1, 0] * es), _scaled(s2_cre, m2[1, 1]))

    return (
        FieldOperator(ann=a_ann, cre=a_cre, params=p),
        FieldOperator(ann=b_ann, cre=b_cre, params=p),
    )


def singles_rate(f: FieldOperator) -> float:
    """Counting rate of one detector: sum_m |cre(m)|^2 (lowest order in c)."""
    return float(sum(abs(v) ** 2 for v in f.cre.values()))


def coincidence_rate(a: FieldOperator, b: FieldOperator) -> float:
    """Joint counting rate of the two detectors, to leading order.

    Both fields must come from the same setup snapshot; two-pair terms of
    order c^2 in the amplitude are dropped (single-biphoton regime).
    """
    if a.params != b.params:
        raise ContractViolationError(
            "coincidence_rate requires fields built from the same SetupParams"
        )
    amplitude = sum(v * b.ann.get(m, 0j) for m, v in a.cre.items())
    return float(abs(amplitude) ** 2)


def rates(p: SetupParams) -> RatePair:
    """All three normalized rates of a setup."""
    a, b = detector_fields(p)
    return RatePair(
        r_a=singles_rate(a),
        r_b=singles_rate(b),
        r_ab=coincidence_rate(a, b),
    )


def balanced_coincidence_closed_form(dphi_s, dphi_i):
    """Coincidence rate for balanced splitters, no blocks, equal conversion.

    Normalized so that it equals 4 * coincidence_rate / |c|^2.  Accepts
    scalars or arrays (broadcasting applies).
    """
    dphi_s = np.asarray(dphi_s, dtype=float)
    dphi_i = np.asarray(dphi_i, dtype=float)
    out = (
        2.0
        - np.cos(dphi_i)
        - math.sqrt(8.0) * np.sin(dphi_i / 2.0) * np.sin(dphi_s - dphi_i / 2.0)
    )
    if out.ndim == 0:
        return float(out)
    return out


def eraser_visibility(dphi_i):
    """Signal-fringe visibility of the balanced coincidence rate vs idler delay.

    sqrt(8) * |sin(dphi_i/2)| / (2 - cos(dphi_i)): zero at even multiples of
    pi, one at odd multiples of pi/2.
    """
    dphi_i = np.asarray(dphi_i, dtype=float)
    out = math.sqrt(8.0) * np.abs(np.sin(dphi_i / 2.0)) / (2.0 - np.cos(dphi_i))
    if out.ndim == 0:
        return float(out)
    return out


_RATE_PICKERS = {
    "r_a": lambda rp: rp.r_a,
    "r_b": lambda rp: rp.r_b,
    "r_ab": lambda rp: rp.r_ab,
}


def _bandlimited_extremes(samples: np.ndarray) -> tuple[float, float]:
    """Global extremes of the periodic band-limited signal behind the samples.

    The rates are low-order trigonometric polynomials of whichever phase is
    scanned, so uniform full-period samples determine them exactly; raw grid
    extremes would miss the crests by O(step^2), far above the tolerances the
    visibility equivalences are held to.  Reconstruct the Fourier
    coefficients, locate candidate extremes on an oversampled grid, then
    polish with Newton steps on the analytic derivative.
    """
    n = len(samples)
    coef = np.fft.rfft(samples) / n
    scale = np.max(np.abs(coef))
    if scale == 0.0:
        return 0.0, 0.0
    # Zero out float dust so a constant signal stays exactly constant.
    coef[np.abs(coef) < 1e-13 * scale] = 0.0
    harmonics = np.nonzero(coef)[0]
    if len(harmonics) == 1 and harmonics[0] == 0:
        c0 = float(coef[0].real)
        return c0, c0

    m = harmonics[harmonics > 0]
    cm = 2.0 * coef[m]

    def value(theta):
        ph = np.exp(1j * np.outer(np.atleast_1d(theta), m))
        return float(coef[0].real) + (ph @ cm).real

    def d1(theta):
        ph = np.exp(1j * theta * m)
        return float(((1j * m) * cm * ph).sum().real)

    def d2(theta):
        ph = np.exp(1j * theta * m)
        return float((-(m.astype(float) ** 2) * cm * ph).sum().real)

    dense = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
    vals = value(dense)

    def polish(theta0):
        th = theta0
        for _ in range(40):
            f2 = d2(th)
            if f2 == 0.0:
                break
            step = d1(th) / f2
            th -= step
            if abs(step) < 1e-15:
                break
        return th

    th_max = polish(dense[int(np.argmax(vals))])
    th_min = polish(dense[int(np.argmin(vals))])
    hi = max(float(np.max(vals)), value(th_max)[0])
    lo = min(float(np.min(vals)), value(th_min)[0])
    return hi, lo


def scan_visibility(
    p: SetupParams,
    vary: str = "dphi_s",
    rate: str = "r_ab",
    grid: np.ndarray | None = None,
) -> float:
    """Fringe visibility (max-min)/(max+min) of a rate scanned over one phase.

    ``vary`` is ``dphi_s`` or ``dphi_i``; ``rate`` picks r_a, r_b or r_ab.
    The grid must hold at least 64 points covering a full period; a uniform
    grid spanning whole periods is resolved to the analytic extremes of the
    underlying trigonometric polynomial, a non-uniform grid falls back to the
    raw sample extremes.
    """
    if vary not in ("dphi_s", "dphi_i"):
        raise InvalidParameterError(f"vary must be dphi_s or dphi_i, got {vary!r}")
    try:
        pick = _RATE_PICKERS[rate]
    except KeyError:
        raise InvalidParameterError(f"rate must be one of {sorted(_RATE_PICKERS)}, got {rate!r}") from None
    if grid is None:
        grid = np.linspace(0.0, 2.0 * math.pi, 256, endpoint=False)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidParameterError("scan grid is empty")
    if grid.size < 64:
        raise InvalidParameterError(f"scan grid needs >= 64 points, got {grid.size}")

    steps = np.diff(grid)
    span = grid[-1] - grid[0] + (steps[0] if steps.size else 0.0)
    if span < 2.0 * math.pi * (1.0 - 1e-9):
        raise InvalidParameterError("scan grid must cover at least one full period")

    values = np.empty(grid.size)
    from dataclasses import replace

    for k, phi in enumerate(grid):
        values[k] = pick(rates(replace(p, **{vary: float(phi)})))

    uniform = steps.size > 0 and np.allclose(steps, steps[0], rtol=0.0, atol=1e-9)
    whole_periods = abs(span / (2.0 * math.pi) - round(span / (2.0 * math.pi))) < 1e-9
    if uniform and whole_periods:
        hi, lo = _bandlimited_extremes(values)
    else:
        hi, lo = float(np.max(values)), float(np.min(values))

    total = hi + lo
    if total <= 0.0:
        return 0.0
    return (hi - lo) / total
