"""Latency sample store and percentile queries."""
