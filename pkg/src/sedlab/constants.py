"""Physical constants (2019 SI exact values).

All conversion constants used by the field modules live here; field
amplitudes elsewhere are kept in normalized units (stochastic baseline
mean-square energy = h*nu/2), so these are the only dimensional anchors.
"""

PLANCK_CONSTANT = 6.62607015e-34  # J s
BOLTZMANN_CONSTANT = 1.380649e-23  # J/K
SPEED_OF_LIGHT = 299792458.0  # m/s
