"""Deterministic seed derivation.

Every random stage derives its seed from the run's root seed plus a stable
string label, so parallel and serial schedules see identical streams and a
rerun with the same config reproduces every artifact byte for byte.
"""
from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(root: int, *labels: object) -> int:
    """Derive a child seed from a root seed and a label path."""
    key = ":".join([str(int(root))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK
