"""Particle and trap descriptions plus closed-form derived quantities.

Everything here is SI.  The simulation kernels work in the dimensionless
units of the rotational constant ``B = hbar**2 / (2 I)``; the helpers
:func:`rotational_constant`, :func:`energy_over_b` and :func:`revival_time`
convert at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .constants import AMU, C_LIGHT, EPSILON_0, G_STANDARD, HBAR, K_B
from .errors import ValidationError

GRAVITY = G_STANDARD


def amu_to_kg(mass_amu: float) -> float:
    return mass_amu * AMU


def kg_to_amu(mass_kg: float) -> float:
    return mass_kg / AMU


@dataclass(frozen=True)
class RotorSpec:
    """Thin homogeneous rod.

    Attributes:
        mass: total mass [kg].
        length: rod length [m].
        effective_diameter: diameter entering the gas-collision rate [m].
        polarizability_anisotropy: ``alpha_par - alpha_perp`` [C m^2/V]; only
            needed when the trap depth is derived from laser parameters.
    """

    mass: float
    length: float
    effective_diameter: float = 0.0
    polarizability_anisotropy: Optional[float] = None
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValidationError(f"mass must be positive, got {self.mass!r}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValidationError(f"length must be positive, got {self.length!r}")
        if not self.effective_diameter >= 0:
            raise ValidationError("effective_diameter must be >= 0")

    @classmethod
    def from_amu(cls, mass_amu, length, **kwargs) -> "RotorSpec":
        return cls(mass=amu_to_kg(mass_amu), length=length, **kwargs)

    @property
    def mass_amu(self) -> float:
        return kg_to_amu(self.mass)


@dataclass(frozen=True)
class TrapSpec:
    """Standing-wave optical tweezer: power per beam, waist, optional depth."""

    power: float
    waist: float
    depth_override: Optional[float] = None

    def __post_init__(self):
        if not self.power >= 0:
            raise ValidationError("trap power must be >= 0")
        if not self.waist > 0:
            raise ValidationError("trap waist must be > 0")
        if self.depth_override is not None and not self.depth_override >= 0:
            raise ValidationError("depth_override must be >= 0")


@dataclass(frozen=True)
class Preset:
    name: str
    rotor: RotorSpec
    trap: Optional[TrapSpec]
    temperature: Optional[float]
    description: str = ""


def moment_of_inertia(spec: RotorSpec) -> float:
    """``M l^2 / 12`` [kg m^2]."""
    return spec.mass * spec.length**2 / 12.0


def rotational_constant(spec: RotorSpec) -> float:
    """Energy unit ``B = hbar^2 / 2I`` [J]; level ``j`` sits at ``B j(j+1)``."""
    return HBAR**2 / (2.0 * moment_of_inertia(spec))


def energy_over_b(spec: RotorSpec, energy: float) -> float:
    return energy / rotational_constant(spec)


def thermal_energy_over_b(spec: RotorSpec, temperature: float) -> float:
    return K_B * temperature / rotational_constant(spec)


def revival_time(spec: RotorSpec) -> float:
    """Quantum revival time ``2 pi I / hbar`` [s]."""
    return 2.0 * math.pi * moment_of_inertia(spec) / HBAR


def trap_depth(spec: RotorSpec, trap: TrapSpec) -> float:
    """Orientational trap depth ``V0 = 4 da P / (pi c eps0 w^2)`` [J].

    ``trap.depth_override`` wins when set.
    """
    if trap.depth_override is not None:
        return float(trap.depth_override)
    if trap.power == 0:
        return 0.0
    if spec.polarizability_anisotropy is None:
        raise ValidationError(
            "trap depth needs the polarizability anisotropy of the rotor "
            "or an explicit depth_override"
        )
    return (4.0 * spec.polarizability_anisotropy * trap.power
            / (math.pi * C_LIGHT * EPSILON_0 * trap.waist**2))


def mean_j(spec: RotorSpec, temperature: float) -> float:
    """Thermal mean of the total angular momentum quantum number."""
    if temperature < 0:
        raise ValidationError("temperature must be >= 0")
    return math.sqrt(math.pi * moment_of_inertia(spec) * K_B * temperature / (2.0 * HBAR**2))


def drop_kinematics(t: float, g: float = GRAVITY) -> tuple[float, float]:
    """Free-fall distance [m] and speed [m/s] after ``t`` seconds."""
    if t < 0:
        raise ValidationError("time must be >= 0")
    return 0.5 * g * t * t, g * t


def shear_rate(spec: RotorSpec, temperature: float) -> float:
    """``kappa = sqrt(2 kB T / I)`` [1/s]; ``1/kappa`` sets the revival-peak width."""
    if temperature < 0:
        raise ValidationError("temperature must be >= 0")
    return math.sqrt(2.0 * K_B * temperature / moment_of_inertia(spec))


def _rod(name, mass_amu, length_nm, diameter_nm, **kw):
    return RotorSpec.from_amu(
        mass_amu, length_nm * 1e-9,
        effective_diameter=2.0 * diameter_nm * 1e-9, name=name, **kw,
    )


_TWEEZER_TRAP = TrapSpec(power=5.0, waist=30e-6)

PRESETS: dict[str, Preset] = {
    "CNT": Preset(
        "CNT", _rod("CNT", 1.9e5, 50.0, 1.5), _TWEEZER_TRAP, 100e-6,
        "double-walled carbon nanotube, outer diameter 1.5 nm",
    ),
    "SNR": Preset(
        "SNR", _rod("SNR", 1.4e6, 50.0, 5.0), _TWEEZER_TRAP, 100e-6,
        "silicon nanorod, diameter 5 nm",
    ),
    "TMV": Preset(
        "TMV", _rod("TMV", 4e7, 300.0, 20.0), None, None,
        "tobacco mosaic virus (geometry and mass only)",
    ),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def with_anisotropy(spec: RotorSpec, delta_alpha: float) -> RotorSpec:
    return replace(spec, polarizability_anisotropy=delta_alpha)
