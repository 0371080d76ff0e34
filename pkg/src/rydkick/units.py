"""Unit conversions between laboratory picoseconds and atomic units."""

from scipy.constants import physical_constants

AU_TIME_S = physical_constants["atomic unit of time"][0]
AU_TIME_PS = AU_TIME_S * 1e12


def ps_to_au(t_ps):
    return t_ps / AU_TIME_PS


def au_to_ps(t_au):
    return t_au * AU_TIME_PS
