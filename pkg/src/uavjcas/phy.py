"""OFDM radar and communication link budget.

Closed-form monostatic echo power, sensing SNR with a range-resolution
penalty, logistic detection probability, log-distance communication SNR and
normalized throughput. Everything works on plain floats or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299_792_458.0
FOUR_PI_CUBED = (4.0 * math.pi) ** 3


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return db_to_linear(dbm) * 1e-3


@dataclass(frozen=True)
class JcasParams:
    """Physical-layer constants of the shared sensing/communication waveform.

    ``detect_threshold_db`` may be left as ``None``; it is then derived as the
    effective sensing SNR at ``reference_range_m`` with zero comm load, so a
    lone UAV at that range detects with probability 0.5.
    """

    carrier_freq_hz: float = 5.8e9
    bandwidth_hz: float = 100e6
    tx_power_dbm: float = 20.0
    tx_gain_dbi: float = 2.0
    rx_gain_dbi: float = 2.0
    rcs_dbsm: float = 0.0
    noise_floor_dbm: float = -90.0
    proc_gain_db: float = 8.0
    jcas_penalty_db_per_load: float = 1.0
    logistic_slope: float = 0.25
    pilot_min: float = 0.01
    pilot_max: float = 0.30
    pathloss_exponent: float = 2.0
    detect_threshold_db: Optional[float] = None
    reference_range_m: float = 150.0
    ref_spectral_eff_bits_per_s_hz: float = 6.0
    comm_edge_snr_db: float = 10.0
    min_range_m: float = 10.0
    range_resolution_m: Optional[float] = field(default=None)

    def __post_init__(self) -> None:
        if not (0.0 < self.pilot_min < self.pilot_max < 1.0):
            raise ConfigError(
                f"pilot bounds must satisfy 0 < min < max < 1, got "
                f"[{self.pilot_min}, {self.pilot_max}]"
            )
        for name in ("bandwidth_hz", "carrier_freq_hz", "logistic_slope", "min_range_m",
                     "ref_spectral_eff_bits_per_s_hz", "reference_range_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.pathloss_exponent < 0:
            raise ConfigError("pathloss_exponent must be nonnegative")
        if self.range_resolution_m is None:
            object.__setattr__(self, "range_resolution_m", SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz))
        elif not self.range_resolution_m > 0:
            raise ConfigError("range_resolution_m must be positive")
        if self.detect_threshold_db is None:
            snr = sensing_snr_db(self.reference_range_m, self)
            object.__setattr__(self, "detect_threshold_db", float(effective_sensing_snr_db(snr, 0.0, self)))

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    def with_(self, **changes) -> "JcasParams":
        """Copy with changes; the derived threshold is re-derived unless given."""
        changes.setdefault("detect_threshold_db", None)
        if "bandwidth_hz" in changes:
            changes.setdefault("range_resolution_m", None)
        return replace(self, **changes)


def _check_positive(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{what} must be positive, got {x!r}")
    return arr


def echo_power_w(range_m, params: JcasParams):
    """Received monostatic echo power in watts, R^-4 law."""
    r = _check_positive(range_m, "range_m")
    pt = dbm_to_watts(params.tx_power_dbm)
    gain = db_to_linear(params.tx_gain_dbi + params.rx_gain_dbi)
    sigma = db_to_linear(params.rcs_dbsm)
    return pt * gain * params.wavelength_m**2 * sigma / (FOUR_PI_CUBED * r**4)


def range_resolution_penalty_db(range_m, params: JcasParams):
    return 10.0 * np.log10(1.0 + np.asarray(range_m, dtype=float) / params.range_resolution_m)


def sensing_snr_db(range_m, params: JcasParams):
    noise_w = dbm_to_watts(params.noise_floor_dbm)
    snr = linear_to_db(echo_power_w(range_m, params) / noise_w)
    return snr + params.proc_gain_db - range_resolution_penalty_db(range_m, params)


def effective_sensing_snr_db(snr_db, comm_load, params: JcasParams):
    load = np.asarray(comm_load, dtype=float)
    if np.any((load < 0.0) | (load > 1.0)) or np.any(np.isnan(load)):
        raise DomainError(f"comm_load must lie in [0, 1], got {comm_load!r}")
    return np.asarray(snr_db, dtype=float) - params.jcas_penalty_db_per_load * load


def detection_probability(margin_db, params: JcasParams):
    x = params.logistic_slope * np.asarray(margin_db, dtype=float)
    # split by sign so neither tail overflows or cancels
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def detection_probability_at(range_m, comm_load, params: JcasParams):
    """Full chain: range and comm load to detection probability."""
    r = np.maximum(np.asarray(range_m, dtype=float), params.min_range_m)
    eff = effective_sensing_snr_db(sensing_snr_db(r, params), comm_load, params)
    return detection_probability(eff - params.detect_threshold_db, params)


def comm_snr_db(distance_m, params: JcasParams):
    """Log-distance path loss anchored at free space 1 m, same noise floor as sensing."""
    d = _check_positive(distance_m, "distance_m")
    pl_ref = 20.0 * math.log10(4.0 * math.pi / params.wavelength_m)
    path_loss = pl_ref + 10.0 * params.pathloss_exponent * np.log10(d)
    return (params.tx_power_dbm + params.tx_gain_dbi + params.rx_gain_dbi
            - path_loss - params.noise_floor_dbm)


def normalized_throughput(comm_snr, comm_load, ref_spectral_eff: float = 6.0):
    """Shannon spectral efficiency scaled by comm load, relative to the reference.

    Can exceed 1 on strong links.
    """
    load = np.asarray(comm_load, dtype=float)
    if np.any((load < 0.0) | (load > 1.0)):
        raise DomainError(f"comm_load must lie in [0, 1], got {comm_load!r}")
    return load * np.log2(1.0 + db_to_linear(comm_snr)) / ref_spectral_eff
