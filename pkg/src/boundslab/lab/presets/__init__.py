"""Shipped experiment presets (one .cfg per reproducible figure)."""
