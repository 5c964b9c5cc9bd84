"""Orientational quantum revivals of levitated nanorotors."""

__version__ = "0.1.0"
