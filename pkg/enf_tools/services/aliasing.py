"""Frame-rate aliasing of light flicker and its inversion back to ENF."""

from __future__ import annotations

import logging
import math
from fractions import Fraction

from enf_tools.errors import AmbiguousAliasError, InputError
from enf_tools.models import AliasResult

logger = logging.getLogger(__name__)

# Candidates farther than this from nominal cannot be told apart by proximity.
AMBIGUITY_LIMIT_HZ = 1.0


def alias_frequency(source_hz: float, sample_rate_hz: float | Fraction) -> AliasResult:
    """Fold ``source_hz`` into [0, rate/2]: f_A = |source - gamma * rate| with the minimising gamma."""
    rate = float(sample_rate_hz)
    if not (source_hz > 0 and rate > 0):
        raise InputError("source frequency and sample rate must be positive")
    gamma = math.floor(source_hz / rate)
    # Ties go to the smaller gamma.
    if abs(source_hz - (gamma + 1) * rate) < abs(source_hz - gamma * rate):
        gamma += 1
    return AliasResult(gamma=gamma, f_alias_hz=abs(source_hz - gamma * rate))


def dealias(f_alias_hz: float, sample_rate_hz: float | Fraction, nominal_source_hz: float) -> float:
    """Source frequency gamma*rate +/- f_alias nearest the nominal source."""
    rate = float(sample_rate_hz)
    if abs(f_alias_hz) > rate / 2 + 1e-9:
        raise InputError(f"aliased frequency {f_alias_hz} Hz exceeds Nyquist {rate / 2:g} Hz")
    gamma = alias_frequency(nominal_source_hz, rate).gamma
    below = gamma * rate - f_alias_hz
    above = gamma * rate + f_alias_hz
    dist_below = abs(below - nominal_source_hz)
    dist_above = abs(above - nominal_source_hz)
    if below != above and math.isclose(dist_below, dist_above, rel_tol=0, abs_tol=1e-12) and dist_below > AMBIGUITY_LIMIT_HZ:
        raise AmbiguousAliasError(
            f"{below:.6f} Hz and {above:.6f} Hz are equally far from nominal {nominal_source_hz:g} Hz"
        )
    return below if dist_below <= dist_above else above


def dealias_enf(f_alias_hz: float, sample_rate_hz: float | Fraction, nominal_source_hz: float, nominal_enf_hz: float) -> float:
    """Dealias, then divide by the harmonic the source sits on (2 for light flicker)."""
    harmonic = round(nominal_source_hz / nominal_enf_hz)
    if harmonic < 1:
        raise InputError(f"source {nominal_source_hz:g} Hz is not a harmonic of {nominal_enf_hz:g} Hz")
    return dealias(f_alias_hz, sample_rate_hz, nominal_source_hz) / harmonic
