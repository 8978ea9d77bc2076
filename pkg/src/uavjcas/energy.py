"""Battery, charging and CO2 accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class EnergyParams:
    """Per-step energy costs and charging constants (kWh unless noted).

    ``charge_per_step_kwh`` is the energy one step at a depot can put back into
    the battery; 0.05 kWh recharges an empty 0.20 kWh pack in four steps.
    """

    b_max_kwh: float = 0.20
    rtb_threshold_kwh: float = 0.04
    rtb_resume_fraction: float = 0.8
    charge_per_step_kwh: float = 0.05
    e_move_kwh: float = 8e-4
    e_sense_base_kwh: float = 2e-4
    e_comm_kwh: float = 5e-5
    renewable_share: float = 0.1
    carbon_intensity_min: float = 0.25
    carbon_intensity_max: float = 0.40

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not self.rtb_threshold_kwh < self.b_max_kwh:
            raise ConfigError("rtb_threshold_kwh must be below b_max_kwh")
        if not 0.0 <= self.renewable_share <= 1.0:
            raise ConfigError("renewable_share must lie in [0, 1]")
        if not 0.0 <= self.rtb_resume_fraction <= 1.0:
            raise ConfigError("rtb_resume_fraction must lie in [0, 1]")
        if self.carbon_intensity_min > self.carbon_intensity_max:
            raise ConfigError("carbon intensity range is inverted")


def step_energy_kwh(moved: bool, pilot_density: float, params: EnergyParams,
                    pilot_max: float = 0.30) -> float:
    sense = params.e_sense_base_kwh * (pilot_density / pilot_max)
    return (params.e_move_kwh if moved else 0.0) + sense + params.e_comm_kwh


def update_battery(b: float, e: float, at_depot: bool, params: EnergyParams) -> float:
    charge = params.charge_per_step_kwh if at_depot else 0.0
    return min(params.b_max_kwh, max(0.0, b - e + charge))


def charged_energy_kwh(b_before: float, e: float, b_after: float, at_depot: bool) -> float:
    """Energy drawn from the charger in one step (what the battery and the step consumed)."""
    if not at_depot:
        return 0.0
    return max(0.0, b_after - b_before + e)


def carbon_emission_kg(charged_kwh: float, carbon_intensity: float,
                       params: EnergyParams) -> Tuple[float, float]:
    """Split charged energy into grid energy and its CO2 mass: (grid_kwh, co2_kg)."""
    grid = (1.0 - params.renewable_share) * charged_kwh
    return grid, grid * carbon_intensity


def sample_carbon_intensity(rng: np.random.Generator, params: EnergyParams = EnergyParams()) -> float:
    return float(rng.uniform(params.carbon_intensity_min, params.carbon_intensity_max))
