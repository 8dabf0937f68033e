import hashlib

import numpy as np


def derive_generator(seed: int, *stream: int) -> np.random.Generator:
    """
    Deterministic generator for (seed, stream...). Streams are spawn keys, so
    derive_generator(seed, i) is the i-th child of SeedSequence(seed).
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(sequence))


def fisher_yates_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform permutation of range(n) by the modern Fisher-Yates walk:
    for i = n-1 .. 1 swap position i with a uniform j in [0, i].
    """
    perm = list(range(n))
    if n < 2:
        return np.asarray(perm, dtype=np.int64)
    draws = rng.integers(0, np.arange(n, 1, -1)).tolist()
    for i, j in zip(range(n - 1, 0, -1), draws):
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)


def seed_fingerprint(seed: int, *context: int) -> str:
    """
    Identifies a run without revealing its seed. Small seeds can be brute-forced,
    so real releases should draw the seed from `secrets`.
    """
    payload = ":".join(str(v) for v in (seed, *context)).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
