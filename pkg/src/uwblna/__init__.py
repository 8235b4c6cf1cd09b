"""Small-signal analysis and design checks for a current-reuse UWB LNA."""

from .circuit import Circuit, Component, HybridPiParams, Port, Probe, expand_devices, gm_from_bias, cpi_from_ft
from .netlist import parse_netlist, format_netlist
from .mna import (FrequencyGrid, TwoPortSweep, StabilityReport, assemble, solve_ac, solve_sweep,
                  sparams, two_port_sparams, input_impedance, stability, group_delay, gain_flatness)
from .polezero import RationalTF, PoleZeroSet, transfer_function, poles_of, factor, cancellation_residual
from .noise import NoiseParams, noise_parameters, nf_from_params, noise_correlation_nf, friis_cascade
from .topologies import build_topology, load_design, TOPOLOGIES

__version__ = "0.1.0"
