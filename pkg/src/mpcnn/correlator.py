"""Closed-form model of GPS L1 C/A prompt correlator outputs.

Evaluates the noiseless in-phase/quadrature outputs of the
Integrate-and-Dump stage for a given set of tracking errors, and adds
calibrated white noise on request.  All power scales follow the unit
noise-PSD convention (N0 = 1), so the carrier power is fixed entirely by
the C/N0 ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Unit noise power spectral density; only C/N0 is physically meaningful.
N0 = 1.0


@dataclass(frozen=True)
class EpochParams:
    """Tracking-error state of one coherent integration epoch.

    ti          coherent integration time [s]
    cn0_dbhz    carrier-to-noise-density ratio [dB-Hz]
    d_bit       navigation bit, +1 or -1 (constant over the epoch)
    phase_err   carrier phase estimation error [rad]
    doppler_err doppler estimation error [Hz]
    code_err    code delay estimation error [chips]
    """

    ti: float
    cn0_dbhz: float
    d_bit: int = 1
    phase_err: float = 0.0
    doppler_err: float = 0.0
    code_err: float = 0.0

    def __post_init__(self):
        if not self.ti > 0:
            raise ValueError(f"ti must be positive, got {self.ti}")
        if not math.isfinite(self.cn0_dbhz):
            raise ValueError(f"cn0_dbhz must be finite, got {self.cn0_dbhz}")
        if self.d_bit not in (-1, 1):
            raise ValueError(f"d_bit must be -1 or +1, got {self.d_bit}")


@dataclass(frozen=True)
class IQ:
    """One in-phase/quadrature correlator output pair."""

    i: float
    q: float


def sinc(x):
    """Unnormalized sinc: sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


def prn_autocorr(delta_chips):
    """Ideal triangular PRN code autocorrelation, max(0, 1 - |delta|).

    Even, 1-Lipschitz, supported on [-1, 1] chips.  Accepts scalars or
    arrays.
    """
    return np.maximum(0.0, 1.0 - np.abs(delta_chips))


def carrier_power(cn0_dbhz: float) -> float:
    """Carrier power C = N0 * 10^(C/N0 / 10) under the N0 = 1 convention."""
    return N0 * 10.0 ** (cn0_dbhz / 10.0)


def amplitude_m(p: EpochParams) -> float:
    """Peak correlator amplitude (D*Ti/2) * sqrt(C/2) * K(code_err)."""
    c = carrier_power(p.cn0_dbhz)
    return float(p.d_bit * (p.ti / 2.0) * math.sqrt(c / 2.0) * prn_autocorr(p.code_err))


def clean_iq_field(
    ti: float,
    cn0_dbhz: float,
    d_bit: int,
    phase_err: float,
    doppler_err,
    code_err,
    scale: float = 1.0,
):
    """Noiseless (I, Q) over arrays of doppler/code errors (broadcast).

    ``scale`` multiplies the amplitude; used for attenuated multipath
    replicas.  Returns a pair of float64 arrays.
    """
    c = carrier_power(cn0_dbhz)
    m = scale * d_bit * (ti / 2.0) * math.sqrt(c / 2.0) * prn_autocorr(code_err)
    x = np.pi * np.asarray(doppler_err, dtype=np.float64) * ti
    env = m * sinc(x)
    i = env * np.cos(x + phase_err)
    q = -env * np.sin(x + phase_err)
    return i, q


def correlator_iq_clean(p: EpochParams) -> IQ:
    """Noiseless correlator output for one epoch."""
    i, q = clean_iq_field(
        p.ti, p.cn0_dbhz, p.d_bit, p.phase_err, p.doppler_err, p.code_err
    )
    return IQ(float(i), float(q))


def noise_sigma(p: EpochParams) -> float:
    """Per-channel noise standard deviation sqrt(N0 * Ti / 16)."""
    return math.sqrt(N0 * p.ti / 16.0)


def correlator_iq_noisy(p: EpochParams, rng: np.random.Generator) -> IQ:
    """Noisy correlator output: clean value plus i.i.d. Gaussian noise."""
    clean = correlator_iq_clean(p)
    sigma = noise_sigma(p)
    n_i, n_q = rng.normal(0.0, sigma, size=2)
    return IQ(clean.i + n_i, clean.q + n_q)
