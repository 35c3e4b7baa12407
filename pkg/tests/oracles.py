"""Slow, literal reference implementations used as test oracles."""
import itertools
import math

import numpy as np


def exhaustive_scanline(cost, penalty):
    """Path costs on one scanline by enumerating every label sequence.

    ``cost`` is ``(N, D)``. ``penalty(x, d, k)`` is the charge for moving from
    label ``k`` at ``x - 1`` to label ``d`` at ``x``. The normalised path cost
    is the unnormalised minimum energy of sequences ending at ``(x, d)`` minus
    the minimum energy over all sequences ending at ``x - 1``.
    """
    n, levels = cost.shape
    energy = np.full((n, levels), np.inf)
    for length in range(1, n + 1):
        for seq in itertools.product(range(levels), repeat=length):
            e = cost[0, seq[0]]
            for x in range(1, length):
                e += cost[x, seq[x]] + penalty(x, seq[x], seq[x - 1])
            x = length - 1
            energy[x, seq[-1]] = min(energy[x, seq[-1]], e)
    out = energy.copy()
    for x in range(1, n):
        out[x] -= energy[x - 1].min()
    return out


def sgm_penalty(p1, p2):
    def pen(x, d, k):
        if d == k:
            return 0.0
        return p1 if abs(d - k) == 1 else p2
    return pen


def popcount(v):
    return bin(int(v)).count("1")


def census_bits(image, x, y, width, height):
    h, w = image.shape
    bits = 0
    b = 0
    for dy in range(-(height // 2), height // 2 + 1):
        for dx in range(-(width // 2), width // 2 + 1):
            if dx == 0 and dy == 0:
                continue
            qy = min(max(y + dy, 0), h - 1)
            qx = min(max(x + dx, 0), w - 1)
            if image[qy, qx] < image[y, x]:
                bits |= 1 << b
            b += 1
    return bits


def evaluate_loops(disp, points, thresholds):
    errors = []
    skipped = 0
    for x, y, d in points:
        v = disp[y][x]
        if not math.isfinite(v):
            skipped += 1
            continue
        errors.append(abs(v - d))
    n = len(errors)
    avg = sum(errors) / n if n else None
    rates = {t: sum(1 for e in errors if e > t) / n if n else None for t in thresholds}
    return n, skipped, avg, rates
