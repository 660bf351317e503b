"""Fluorescence diffuse optical tomography of membrane potential on a disk."""

__version__ = "0.1.0"
