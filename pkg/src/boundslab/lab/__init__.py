"""Experiment harness: config parsing, seeded runners, CSV emission and
static SVG plots, exposed through the ``lab`` command-line entry point."""
