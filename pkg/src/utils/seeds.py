"""
Deterministic seed derivation for dataset generation.
"""
import hashlib


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Derive an unsigned 64-bit seed from a master seed and integer keys.

    The mapping is a pure function, so regenerating a dataset with the
    same master seed reproduces every signal bit for bit.

    Args:
        master_seed: Run-level seed
        *keys: Identity of the draw, e.g. (class index, signal index)

    Returns:
        Seed in [0, 2**64)
    """
    payload = ":".join(str(int(k)) for k in (master_seed, *keys)).encode("ascii")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def generate_seeds(initial_seed: int, n_replicas: int) -> list[int]:
    """Seeds for repeated runs of one experiment (replica i uses key i)."""
    return [derive_seed(initial_seed, i) for i in range(n_replicas)]
