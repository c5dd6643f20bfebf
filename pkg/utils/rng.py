"""
Seeded random streams.

Each subsystem draws from its own numpy Generator derived from the run seed
and a fixed label, so changing how often one subsystem draws never shifts
the numbers another one sees.
"""

import hashlib
import numpy as np

ROUTING = "routing"
ARRIVALS = "arrivals"
MIX = "mix"


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_stream(seed: int, label: str) -> np.random.Generator:
    """
    Build the random stream for one subsystem.
    
    Args:
        seed: Non-negative run seed
        label: Stream label, e.g. "routing"
        
    Returns:
        Independent numpy Generator
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, _label_key(label)]))


def derive_seed(seed: int, label: str) -> int:
    """Derive a child seed (e.g. one per repetition) from a base seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")
