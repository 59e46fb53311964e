"""Limited-independence hashing over the 61-bit Mersenne field.

A schedule's randomness is a table of k = 2 * r * tau field coefficients,
organized as tau blocks of 2r: block t is a degree-(2r-1) polynomial whose
value at the point encoding (walk index, origin tag) drives step t of that
walk.  Any 2r whole walk trajectories are therefore mutually independent
(2r-wise independence within each step, independent coefficients across
steps), which is the guarantee the routing analysis consumes.  Field
values map to {1..2d} by floor scaling; the bias is below 2d/p.

Coefficients derive from a 64-bit seed via the splitmix64 stream, so a
schedule is reproducible from (seed, r, tau, d) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERSENNE61 = (1 << 61) - 1
_MASK32 = (1 << 32) - 1


def splitmix64(seed: int, count: int) -> list[int]:
    """First `count` values of the splitmix64 stream (pure ints)."""
    out = []
    x = seed & ((1 << 64) - 1)
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & ((1 << 64) - 1)
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & ((1 << 64) - 1)
        out.append(z ^ (z >> 31))
    return out


def _modmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a * b) mod 2^61-1 for uint64 arrays with entries below the prime."""
    a = a.astype(np.uint64, copy=False)
    b = b.astype(np.uint64, copy=False)
    a_hi = a >> np.uint64(32)
    a_lo = a & np.uint64(_MASK32)
    b_hi = b >> np.uint64(32)
    b_lo = b & np.uint64(_MASK32)
    hi = a_hi * b_hi                     # * 2^64 == * 8 (mod p)
    cross = a_hi * b_lo + a_lo * b_hi    # * 2^32
    low = a_lo * b_lo
    p = np.uint64(MERSENNE61)
    acc = (hi << np.uint64(3)) % p
    c_hi = cross >> np.uint64(29)        # * 2^61 == * 1 (mod p)
    c_lo = cross & np.uint64((1 << 29) - 1)
    acc = (acc + c_hi % p) % p
    acc = (acc + ((c_lo << np.uint64(32)) % p)) % p
    acc = (acc + ((low & p) + (low >> np.uint64(61)))) % p
    return acc


def _mul_128(a: np.ndarray, scalar: int) -> tuple[np.ndarray, np.ndarray]:
    """a * scalar as (hi, lo) base-2^32 limbs; scalar < 2^30."""
    s = np.uint64(scalar)
    hi = (a >> np.uint64(32)) * s
    lo = (a & np.uint64(_MASK32)) * s
    hi = hi + (lo >> np.uint64(32))
    lo = lo & np.uint64(_MASK32)
    return hi, lo


def _floor_scale(a: np.ndarray, out_range: int) -> np.ndarray:
    """Exact floor(a * out_range / p) for a < p, vectorized.

    A float64 estimate is within one of the truth (the quotient is below
    out_range), then corrected by an exact 128-bit comparison.
    """
    a = a.astype(np.uint64, copy=False)
    q = np.floor(a.astype(np.float64) * (out_range / MERSENNE61)).astype(np.int64)
    q = np.clip(q, 0, out_range - 1)
    tgt_hi, tgt_lo = _mul_128(a, out_range)

    # q*p <= a*R must hold; (q+1)*p <= a*R must not
    def le(q_arr):
        ph = (np.uint64(MERSENNE61) >> np.uint64(32)) * q_arr.astype(np.uint64)
        pl = (np.uint64(MERSENNE61) & np.uint64(_MASK32)) * q_arr.astype(np.uint64)
        ph = ph + (pl >> np.uint64(32))
        pl = pl & np.uint64(_MASK32)
        return (ph < tgt_hi) | ((ph == tgt_hi) & (pl <= tgt_lo))

    too_big = ~le(q.astype(np.uint64))
    q = q - too_big.astype(np.int64)
    can_grow = le((q + 1).astype(np.uint64)) & (q + 1 < out_range)
    q = q + can_grow.astype(np.int64)
    return q.astype(np.int64)


@dataclass(frozen=True)
class KWiseHash:
    """Block-polynomial hash: coefficient count is 2 * r * tau."""

    seed: int
    walks_per_message: int  # r
    steps: int              # tau
    out_range: int          # 2d
    coeffs: tuple[int, ...]

    @classmethod
    def from_seed(cls, seed: int, r: int, tau: int, two_d: int) -> "KWiseHash":
        k = 2 * r * tau
        raw = splitmix64(seed, k)
        coeffs = tuple(x % MERSENNE61 for x in raw)
        return cls(seed=seed, walks_per_message=r, steps=tau, out_range=two_d,
                   coeffs=coeffs)

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def bit_length(self) -> int:
        """Canonical encoded length: one 64-bit field per coefficient."""
        return 64 * self.k

    def encode_points(self, tags: np.ndarray, walk_index: np.ndarray) -> np.ndarray:
        """Injective point per (origin tag, walk index); must stay below p."""
        pts = tags.astype(np.uint64) * np.uint64(self.walks_per_message) \
            + walk_index.astype(np.uint64)
        if pts.size and int(pts.max()) >= MERSENNE61:
            raise ValueError("encoded points exceed the field size")
        return pts

    def draw(self, step: int, points: np.ndarray) -> np.ndarray:
        """Values in {1..2d} for every point at the given step."""
        if not (0 <= step < self.steps):
            raise ValueError(f"step {step} out of range")
        block = self.coeffs[step * 2 * self.walks_per_message:
                            (step + 1) * 2 * self.walks_per_message]
        acc = np.full(points.shape, block[0], dtype=np.uint64)
        for c in block[1:]:
            acc = _modmul(acc, points)
            acc = (acc + np.uint64(c)) % np.uint64(MERSENNE61)
        return 1 + _floor_scale(acc, self.out_range)

    def to_dict(self) -> dict:
        return {"prime": MERSENNE61, "coeffs": list(self.coeffs),
                "r": self.walks_per_message, "tau": self.steps,
                "d": self.out_range // 2, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "KWiseHash":
        if d["prime"] != MERSENNE61:
            raise ValueError("unsupported field")
        return cls(seed=d["seed"], walks_per_message=d["r"], steps=d["tau"],
                   out_range=2 * d["d"], coeffs=tuple(d["coeffs"]))
