"""Discrete-event engine, experiment sweeps and result export."""
