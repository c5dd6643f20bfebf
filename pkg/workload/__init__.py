"""Workload profiles and the ramped arrival process."""
