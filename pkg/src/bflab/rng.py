"""Seed derivation for reproducible simulations and ensembles.

The simulator consumes a splitmix64 stream: from a 64-bit state ``s`` each
draw advances ``s += GOLDEN`` and emits ``mix64(s)``.  splitmix64 is seedable
and splittable: any 64-bit value opens an independent stream, and
:func:`replica_seed` derives per-replica streams by chained finalizers so
that sweeps over ``n`` and over replicas never share a stream.

All arithmetic is modulo 2**64.  The kernel module carries an identical
jit-compiled copy of ``mix64``; the two are kept in lockstep by tests.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """splitmix64 output finalizer (Stafford mix of a 64-bit word)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def splitmix64_output(seed: int, k: int) -> int:
    """The k-th output (k >= 1) of the splitmix64 stream opened with ``seed``."""
    return mix64((seed + k * GOLDEN) & MASK64)


def replica_seed(base_seed: int, n: int, replica: int) -> int:
    """Simulator seed for one ensemble replica.

    Chained finalizers over (base_seed, n, replica); distinct in any
    coordinate implies an independent simulator stream.
    """
    s = mix64(base_seed)
    s = mix64(s ^ (n & MASK64))
    s = mix64(s ^ (replica & MASK64))
    return s
