"""Exact simulation of the setup on a truncated multimode Fock space.

This is the brute-force cross-check for the first-order model: every element
of the network is applied as an exact unitary on a per-mode photon-number
cutoff, with no perturbative expansion anywhere.

* A pair source is exp(g * (a' b' - a b)) with real gain g, exponentiated
  from the truncated generator (dense 2-mode matrix exponential).  The
  generator is anti-Hermitian on the truncated space, so norm is preserved
  identically; the truncation error shows up as population reaching the
  cutoff level, which is monitored and bounded instead of assumed away.
* A splitter with mixing matrix [[t, r], [-r, t]] is exp(theta * (a' b -
  b' a)) with theta = atan2(r, t) (sign flipped for the other port
  convention); it conserves total photon number exactly.
* A phase delay multiplies each amplitude by e^(i n phi).
* A beam block swaps the blocked mode's content into an aux mode that must
  still be in vacuum, so downstream elements see fresh vacuum.

Detector expectations: singles are <n> at the detector's output mode,
coincidences the normally ordered <a_A' a_B' a_B a_A>.  Gains are |c| of the
source amplitudes times ``gain_scale``; complex source phases are not
representable here, so comparisons assume real pump amplitudes (the default
operating point).

States are plain dense vectors of dimension (n_max + 1)^n_modes, indexed by
mixed-radix photon-number tuples (mode k is axis k of the reshaped array);
at the default n_max = 3 with six modes that is 4096 amplitudes, so every
element application is a 16 x 16 gate contracted over two axes.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .errors import ContractViolationError, InvalidParameterError, TruncationError
from .model import RatePair, rates as perturbative_rates
from .optics import (
    MODE_ORDER,
    BeamSplitterParams,
    Mode,
    PortSign,
    SetupParams,
    SpdcSourceParams,
    setup_errors,
)

__all__ = [
    "FockStateVector",
    "OracleReport",
    "vacuum",
    "apply_two_mode_squeezer",
    "apply_beam_splitter",
    "apply_phase",
    "apply_block",
    "run_exact",
    "oracle_compare",
]

# Population allowed at the cutoff level before a squeezer warns / a run fails.
SQUEEZER_CUTOFF_WARN = 1e-8
RUN_CUTOFF_LIMIT = 1e-6


@dataclass(frozen=True)
class FockStateVector:
    """Dense state on ``len(modes)`` bosonic modes truncated at ``n_max`` photons."""

    n_max: int
    modes: tuple[Mode, ...]
    amplitudes: np.ndarray

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.local_dim ** len(self.modes)

    def axis(self, mode: Mode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise InvalidParameterError(f"state has no mode {mode!r}") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.local_dim,) * len(self.modes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def index_of(self, occupation: tuple[int, ...]) -> int:
        """Flat index of a photon-number tuple (mixed-radix, mode 0 most significant)."""
        return int(np.ravel_multi_index(occupation, (self.local_dim,) * len(self.modes)))

    def occupation_of(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(index, (self.local_dim,) * len(self.modes)))

    def mode_populations(self, mode: Mode) -> np.ndarray:
        """Probability of finding n photons in one mode, for n = 0..n_max."""
        probs = np.abs(self.tensor()) ** 2
        other = tuple(k for k in range(len(self.modes)) if k != self.axis(mode))
        return probs.sum(axis=other)

    def expected_photons(self, mode: Mode) -> float:
        pops = self.mode_populations(mode)
        return float(np.dot(np.arange(self.local_dim), pops))

    def cutoff_population(self) -> float:
        """Total probability of any mode sitting at the cutoff level."""
        probs = np.abs(self.tensor()) ** 2
        interior = probs[(slice(0, self.n_max),) * len(self.modes)]
        return float(probs.sum() - interior.sum())


def vacuum(n_max: int = 3, modes: tuple[Mode, ...] = MODE_ORDER) -> FockStateVector:
    """All-modes-empty state."""
    if n_max < 1:
        raise InvalidParameterError(f"n_max must be >= 1, got {n_max}")
    modes = tuple(modes)
    amps = np.zeros((n_max + 1) ** len(modes), dtype=complex)
    amps[0] = 1.0
    return FockStateVector(n_max=n_max, modes=modes, amplitudes=amps)


def _ladder(d: int) -> tuple[np.ndarray, np.ndarray]:
    ann = np.diag(np.sqrt(np.arange(1.0, d)), k=1)
    return ann, ann.T.copy()


@functools.lru_cache(maxsize=None)
def _squeezer_gate(gain: float, d: int) -> np.ndarray:
    ann, cre = _ladder(d)
    gen = gain * (np.kron(cre, cre) - np.kron(ann, ann))
    return expm(gen)


@functools.lru_cache(maxsize=None)
def _splitter_gate(t: float, port_sign: PortSign, d: int) -> np.ndarray:
    theta = math.atan2(math.sqrt(1.0 - t * t), t)
    if port_sign is PortSign.MINUS_ON_PORT_2:
        theta = -theta
    ann, cre = _ladder(d)
    gen = theta * (np.kron(cre, ann) - np.kron(ann, cre))
    return expm(gen)


def _apply_two_mode_gate(
    state: FockStateVector, gate: np.ndarray, mode_a: Mode, mode_b: Mode
) -> FockStateVector:
    if mode_a == mode_b:
        raise InvalidParameterError("two-mode element needs two distinct modes")
    d = state.local_dim
    i, j = state.axis(mode_a), state.axis(mode_b)
    psi = state.tensor()
    g = gate.reshape(d, d, d, d)
    out = np.tensordot(g, psi, axes=([2, 3], [i, j]))
    out = np.moveaxis(out, (0, 1), (i, j))
    return replace(state, amplitudes=np.ascontiguousarray(out).reshape(-1))


def apply_two_mode_squeezer(
    state: FockStateVector, mode_a: Mode, mode_b: Mode, gain: float
) -> FockStateVector:
    """Pair source exp(g (a' b' - a b)) applied exactly on the truncated space.

    Populations move only along tuples with n_a - n_b fixed.  Warns when the
    resulting cutoff-level population exceeds 1e-8 (gain too large for the
    chosen n_max).
    """
    out = _apply_two_mode_gate(state, _squeezer_gate(float(gain), state.local_dim), mode_a, mode_b)
    leak = out.cutoff_population()
    if leak > SQUEEZER_CUTOFF_WARN:
        warnings.warn(
            f"cutoff-level population {leak:.3g} after squeezer (gain {gain!r}, "
            f"n_max {state.n_max}); increase n_max or reduce gain",
            stacklevel=2,
        )
    return out


def apply_beam_splitter(
    state: FockStateVector, mode_a: Mode, mode_b: Mode, bs: BeamSplitterParams
) -> FockStateVector:
    """Unitary induced by mixing_matrix(bs) on (mode_a, mode_b); photon-number conserving."""
    return _apply_two_mode_gate(state, _splitter_gate(bs.t, bs.port_sign, state.local_dim), mode_a, mode_b)


def apply_phase(state: FockStateVector, mode: Mode, phi: float) -> FockStateVector:
    """Phase delay: amplitude of an n-photon component gains e^(i n phi)."""
    d = state.local_dim
    axis = state.axis(mode)
    phases = np.exp(1j * phi * np.arange(d))
    shape = [1] * len(state.modes)
    shape[axis] = d
    out = state.tensor() * phases.reshape(shape)
    return replace(state, amplitudes=out.reshape(-1))


def apply_block(state: FockStateVector, mode: Mode, aux_mode: Mode) -> FockStateVector:
    """Perfect absorber: swap the blocked mode's content into a vacuum aux mode."""
    if mode == aux_mode:
        raise InvalidParameterError("block needs distinct beam and aux modes")
    aux_pops = state.mode_populations(aux_mode)
    if float(aux_pops[1:].sum()) > 1e-12:
        raise ContractViolationError(
            f"aux mode {aux_mode.value} must be in vacuum before a block"
        )
    out = np.swapaxes(state.tensor(), state.axis(mode), state.axis(aux_mode))
    return replace(state, amplitudes=np.ascontiguousarray(out).reshape(-1))


def _annihilate(state: FockStateVector, mode: Mode) -> FockStateVector:
    d = state.local_dim
    ann, _ = _ladder(d)
    axis = state.axis(mode)
    out = np.tensordot(ann, state.tensor(), axes=([1], [axis]))
    out = np.moveaxis(out, 0, axis)
    return replace(state, amplitudes=np.ascontiguousarray(out).reshape(-1))


def _propagate(p: SetupParams, gain_scale: float, n_max: int) -> FockStateVector:
    """Run the full element sequence of the network on a fresh vacuum."""
    g1 = abs(complex(p.src1.c)) * gain_scale
    g2 = abs(complex(p.src2.c)) * gain_scale
    st = vacuum(n_max=n_max, modes=MODE_ORDER)
    st = apply_two_mode_squeezer(st, Mode.S01, Mode.I01, g1)
    st = apply_beam_splitter(st, Mode.I01, Mode.I0, p.bs1)
    if p.block_reflected_idler:
        st = apply_block(st, Mode.I0, Mode.AUX_BLOCK_1)
    st = apply_two_mode_squeezer(st, Mode.S02, Mode.I01, g2)
    st = apply_phase(st, Mode.I01, p.dphi_i)
    st = apply_beam_splitter(st, Mode.I0, Mode.I01, p.bs3)
    if p.block_signal_s1:
        st = apply_block(st, Mode.S01, Mode.AUX_BLOCK_2)
    st = apply_phase(st, Mode.S01, p.dphi_s)
    st = apply_beam_splitter(st, Mode.S01, Mode.S02, p.bs2)
    return st

# Detector ports after the final splitters: A reads the signal-recombiner
# output aligned with the second signal's transmission, B the idler
# recombiner output aligned with the delayed arm's transmission.
DETECTOR_A_MODE = Mode.S02
DETECTOR_B_MODE = Mode.I01


def run_exact(p: SetupParams, gain_scale: float = 1.0, n_max: int = 3) -> RatePair:
    """Exact detector rates: <n_A>, <n_B> and <a_A' a_B' a_B a_A>.

    Raises TruncationError when the final cutoff-level population exceeds
    1e-6 of the norm.
    """
    errors = setup_errors(p)
    if errors:
        raise InvalidParameterError("; ".join(f"{i.key}: {i.message}" for i in errors))
    st = _propagate(p, gain_scale, n_max)
    leak = st.cutoff_population()
    if leak > RUN_CUTOFF_LIMIT:
        raise TruncationError(
            f"cutoff-level population {leak:.3g} exceeds {RUN_CUTOFF_LIMIT:g}; "
            "increase n_max or reduce the gains"
        )
    r_a = st.expected_photons(DETECTOR_A_MODE)
    r_b = st.expected_photons(DETECTOR_B_MODE)
    clicked = _annihilate(_annihilate(st, DETECTOR_A_MODE), DETECTOR_B_MODE)
    r_ab = float(np.vdot(clicked.amplitudes, clicked.amplitudes).real)
    return RatePair(r_a=r_a, r_b=r_b, r_ab=r_ab)


@dataclass(frozen=True)
class OracleReport:
    """Exact vs first-order rates at one phase point.

    ``relative_deviations`` holds |exact/perturbative - 1| per rate where the
    perturbative rate is positive, else the absolute deviation.
    ``truncation_leakage`` is the cutoff-level population of the final state
    (the applied unitaries preserve norm identically, so the cutoff occupancy
    is the operative truncation diagnostic).
    """

    dphi_i: float
    dphi_s: float
    rates_exact: RatePair
    rates_perturbative: RatePair
    relative_deviations: RatePair
    truncation_leakage: float

    def max_deviation(self) -> float:
        d = self.relative_deviations
        return max(d.r_a, d.r_b, d.r_ab)


def _deviation(exact: float, pert: float) -> float:
    if pert > 0.0:
        return abs(exact / pert - 1.0)
    return abs(exact - pert)


def oracle_compare(
    p: SetupParams,
    gain: float = 0.01,
    n_max: int = 3,
    phase_grid=None,
    dphi_s_grid=None,
) -> list[OracleReport]:
    """Exact-vs-perturbative comparison over a phase grid.

    The source amplitudes of ``p`` are rescaled so the larger |c| equals
    ``gain`` (pump ratios and blocks are preserved); both sides of the
    comparison use the rescaled real amplitudes.  ``phase_grid`` is the
    idler-delay grid (default 16 points over a period); ``dphi_s_grid``
    optionally sweeps the signal delay as well (default: keep p.dphi_s).
    Deviations shrink as O(gain^2).
    """
    if gain < 0.0 or gain > 0.05:
        raise InvalidParameterError(
            f"oracle comparison needs 0 <= gain <= 0.05, got {gain!r}"
        )
    if phase_grid is None:
        phase_grid = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    if dphi_s_grid is None:
        dphi_s_grid = [p.dphi_s]

    c1, c2 = abs(complex(p.src1.c)), abs(complex(p.src2.c))
    top = max(c1, c2)
    scale = gain / top if top > 0.0 else 0.0
    p_scaled = replace(
        p,
        src1=SpdcSourceParams(c=c1 * scale),
        src2=SpdcSourceParams(c=c2 * scale),
    )

    reports = []
    for dphi_i in np.asarray(phase_grid, dtype=float):
        for dphi_s in np.asarray(dphi_s_grid, dtype=float):
            pp = replace(p_scaled, dphi_i=float(dphi_i), dphi_s=float(dphi_s))
            st = _propagate(pp, 1.0, n_max)
            leak = st.cutoff_population()
            if leak > RUN_CUTOFF_LIMIT:
                raise TruncationError(
                    f"cutoff-level population {leak:.3g} exceeds {RUN_CUTOFF_LIMIT:g} "
                    f"at dphi_i={dphi_i:.6g}, dphi_s={dphi_s:.6g}"
                )
            clicked = _annihilate(_annihilate(st, DETECTOR_A_MODE), DETECTOR_B_MODE)
            exact = RatePair(
                r_a=st.expected_photons(DETECTOR_A_MODE),
                r_b=st.expected_photons(DETECTOR_B_MODE),
                r_ab=float(np.vdot(clicked.amplitudes, clicked.amplitudes).real),
            )
            pert = perturbative_rates(pp)
            reports.append(
                OracleReport(
                    dphi_i=float(dphi_i),
                    dphi_s=float(dphi_s),
                    rates_exact=exact,
                    rates_perturbative=pert,
                    relative_deviations=RatePair(
                        r_a=_deviation(exact.r_a, pert.r_a),
                        r_b=_deviation(exact.r_b, pert.r_b),
                        r_ab=_deviation(exact.r_ab, pert.r_ab),
                    ),
                    truncation_leakage=leak,
                )
            )
    return reports
