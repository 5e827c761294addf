"""Cascading-failure resilience model of a transmission network under a windstorm."""

from pcegrid.grid.cascade import CascadeOutcome, cascade_step, phi_ls, simulate_event
from pcegrid.grid.case import NetworkCase, load_case, parse_case
from pcegrid.grid.powerflow import dc_power_flow
from pcegrid.grid.study import GridStudy
from pcegrid.grid.weather import FragilityCurve, WeatherEvent, failure_time_distribution

__all__ = [
    "CascadeOutcome",
    "FragilityCurve",
    "GridStudy",
    "NetworkCase",
    "cascade_step",
    "dc_power_flow",
    "failure_time_distribution",
    "load_case",
    "parse_case",
    "phi_ls",
    "simulate_event",
    "WeatherEvent",
]
