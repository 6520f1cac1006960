"""Deterministic seed derivation for nested simulation stages."""


def seed_seq(seed, *extra) -> list[int]:
    """Flatten a seed (int or sequence) plus stage indices into one list."""
    if isinstance(seed, (list, tuple)):
        base = [int(s) for s in seed]
    else:
        base = [int(seed)]
    return base + [int(e) for e in extra]
