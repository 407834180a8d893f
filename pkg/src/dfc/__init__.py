"""Fault-tolerant distributed calculation of vehicle states and cooperative
speed fault diagnosis over platoon communication graphs."""

__version__ = "0.1.0"
