"""Latency-ratio offloading controller."""
