"""Hierarchical seed derivation.

Every random choice in the pipeline is driven by a seed derived from a
single master seed and a path of labels (stage -> scene -> task ->
trajectory), so one number reproduces an entire corpus. Hashing goes
through sha256 because the builtin hash() is salted per process.
"""

import hashlib


def derive_seed(master: int, *path) -> int:
    """Derive a 64-bit child seed from `master` and a label path."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")
