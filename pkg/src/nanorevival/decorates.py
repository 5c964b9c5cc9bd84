"""Decoherence rates from gas collisions plus a user-supplied emission rate."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import AMU, K_B, MBAR
from .errors import ValidationError
from .physcore import RotorSpec

N2_MASS_AMU = 28.0
ROOM_TEMPERATURE = 300.0


@dataclass(frozen=True)
class EnvironmentSpec:
    """Residual gas and emission channel (SI units).

    Defaults describe nitrogen at room temperature with no emission.
    """

    gas_pressure: float = 0.0
    gas_mass: float = N2_MASS_AMU * AMU
    gas_temperature: float = ROOM_TEMPERATURE
    emission_rate: float = 0.0

    def __post_init__(self):
        for name in ("gas_pressure", "gas_mass", "gas_temperature", "emission_rate"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be a finite number >= 0, got {value!r}")

    @classmethod
    def from_mbar(cls, pressure_mbar: float, gas_mass_amu: float = N2_MASS_AMU,
                  gas_temperature: float = ROOM_TEMPERATURE, emission_rate: float = 0.0):
        return cls(pressure_mbar * MBAR, gas_mass_amu * AMU, gas_temperature, emission_rate)

    @property
    def pressure_mbar(self) -> float:
        return self.gas_pressure / MBAR


def gas_rate(spec: RotorSpec, env: EnvironmentSpec) -> float:
    """Rate of gas collisions on a rod [1/s].

    Mean thermal flux ``p / sqrt(2 pi m kT)`` integrated over the surface of a
    cylinder of diameter ``d_eff`` and length ``l`` including its end caps.
    """
    if env.gas_pressure == 0:
        return 0.0
    if not (env.gas_mass > 0 and env.gas_temperature > 0):
        raise ValidationError("gas mass and temperature must be > 0 for a nonzero pressure")
    d, length = spec.effective_diameter, spec.length
    flux = env.gas_pressure / math.sqrt(2.0 * math.pi * env.gas_mass * K_B * env.gas_temperature)
    return math.pi * d * length * (1.0 + d / (2.0 * length)) * flux


def total_rate(env: EnvironmentSpec, gas: float) -> float:
    if gas < 0:
        raise ValidationError("gas rate must be >= 0")
    return gas + env.emission_rate


def decoherence_rate(spec: RotorSpec, env: EnvironmentSpec) -> float:
    return total_rate(env, gas_rate(spec, env))
