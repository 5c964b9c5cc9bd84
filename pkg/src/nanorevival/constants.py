"""Physical constants (CODATA 2018 recommended values, SI units).

All values are exact by SI definition except where an uncertainty exists in
CODATA 2018; those are quoted to the full published precision.
"""

CONSTANT_SET = "CODATA2018"

#: Reduced Planck constant [J s] (exact: h / 2pi with h = 6.62607015e-34).
HBAR = 1.054571817e-34

#: Boltzmann constant [J/K] (exact).
K_B = 1.380649e-23

#: Speed of light in vacuum [m/s] (exact).
C_LIGHT = 299792458.0

#: Vacuum electric permittivity [F/m].
EPSILON_0 = 8.8541878128e-12

#: Atomic mass unit (dalton) [kg].
AMU = 1.66053906660e-27

#: Electron rest mass [kg].
M_ELECTRON = 9.1093837015e-31

#: Standard acceleration of gravity [m/s^2] (conventional value).
G_STANDARD = 9.80665

MBAR = 100.0  # Pa per mbar
