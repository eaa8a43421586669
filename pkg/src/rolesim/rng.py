"""Named counter-based random streams.

Every stochastic purpose (arrivals, DAG shapes, tool draws, transfer losses,
decision costs, ...) draws from its own Philox generator keyed by
(seed, purpose name), so adding draws to one purpose never perturbs another
and runs replay bit-identically across platforms.
"""

import hashlib

import numpy as np


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Deterministic generator for one named purpose."""
    digest = hashlib.sha256(f"{seed & 0xFFFFFFFFFFFFFFFF:016x}:{purpose}".encode()).digest()
    key = np.frombuffer(digest[:16], dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))


def mix(base_seed: int, run_seed: int) -> int:
    """Combine a scenario-level seed with a per-run seed into a fresh 64-bit seed."""
    digest = hashlib.sha256(
        f"{base_seed & 0xFFFFFFFFFFFFFFFF:016x}/{run_seed & 0xFFFFFFFFFFFFFFFF:016x}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "little")
