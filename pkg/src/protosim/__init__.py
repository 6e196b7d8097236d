"""Simulator for Bragg-diffraction hyperentanglement protocols."""
