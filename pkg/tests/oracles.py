"""Independent brute-force oracles for the beam-training computations.

Every helper re-derives its answer term by term from the defining formulas,
with plain Python loops and no code shared with `beamsweep`, so a vectorized
shortcut that goes wrong surfaces as a mismatch.
"""

import cmath
import math


def steering_element(r, c, u_row, u_col, spacing_ratio=0.5):
    return cmath.exp(2j * math.pi * spacing_ratio * (r * u_row + c * u_col))


def steering_vector(rows, cols, u_row, u_col):
    norm = math.sqrt(rows * cols)
    return [
        steering_element(r, c, u_row, u_col) / norm
        for r in range(rows)
        for c in range(cols)
    ]


def dft_beam(rows, cols, p, q):
    """Beam (p, q): element (r, c) is exp(2j pi (r p / rows + c q / cols)) / sqrt(rows cols)."""
    norm = math.sqrt(rows * cols)
    return [
        cmath.exp(2j * math.pi * (r * p / rows + c * q / cols)) / norm
        for r in range(rows)
        for c in range(cols)
    ]


def channel_entry(paths, k, u, b, spacing, ue_vectors, bs_vectors):
    """H[k][u][b] as the explicit sum over paths."""
    total = 0j
    for path, a_ue, a_bs in zip(paths, ue_vectors, bs_vectors):
        tone = cmath.exp(-2j * math.pi * k * spacing * path.delay)
        total += path.complex_gain * tone * a_ue[u] * a_bs[b].conjugate()
    return total


def rate(matrices, combiner, beamformer, noise_power):
    """(1/K) sum_k log2(1 + |w^H H[k] f|^2 / noise_power)."""
    total = 0.0
    for matrix in matrices:
        gain = 0j
        for u, row in enumerate(matrix):
            for b, entry in enumerate(row):
                gain += combiner[u].conjugate() * entry * beamformer[b]
        total += math.log2(1 + abs(gain) ** 2 / noise_power)
    return total / len(matrices)


def top_k(scores, k):
    return sorted(range(len(scores)), key=lambda index: (-scores[index], index))[:k]


def argmax(scores):
    return top_k(scores, 1)[0]


def subset_ratio(row, subset):
    best = max(row)
    if best <= 0:
        return 1.0
    return max(row[index] for index in subset) / best


def atr(row, num_combiners, num_beamformers):
    atr_w = [
        sum(row[i * num_beamformers + j] for j in range(num_beamformers)) / num_beamformers
        for i in range(num_combiners)
    ]
    atr_f = [
        sum(row[i * num_beamformers + j] for i in range(num_combiners)) / num_combiners
        for j in range(num_beamformers)
    ]
    return atr_w, atr_f


def kth_best(rows, k):
    size = len(rows[0])
    counts = [0] * size
    for row in rows:
        counts[top_k(row, k)[k - 1]] += 1
    return [count / len(rows) for count in counts]


def image_bounce(source, target, plane_y):
    """Specular bounce point on the plane y = plane_y and the unfolded path length."""
    sx, sy, sz = source
    tx, ty, tz = target
    image_y = 2 * plane_y - sy
    fraction = (plane_y - image_y) / (ty - image_y)
    bounce = (sx + fraction * (tx - sx), plane_y, sz + fraction * (tz - sz))
    length = math.sqrt((tx - sx) ** 2 + (ty - image_y) ** 2 + (tz - sz) ** 2)
    return bounce, length


def angles(vector):
    x, y, z = vector
    return math.atan2(y, x), math.atan2(z, math.hypot(x, y))


def nearest_bin(u, size):
    """DFT bin whose steering cosine 2p/size is closest to u on the circle of period 2."""

    def distance(p):
        difference = (u - 2 * p / size) % 2
        return min(difference, 2 - difference)

    return min(range(size), key=lambda p: (distance(p), p))


def best_stump(xs, ys):
    """Threshold on a single feature minimizing squared error, over all midpoints."""
    points = sorted(zip(xs, ys))
    best = None
    for split in range(1, len(points)):
        if points[split - 1][0] == points[split][0]:
            continue
        left = [y for _, y in points[:split]]
        right = [y for _, y in points[split:]]
        error = sum((y - sum(left) / len(left)) ** 2 for y in left) + sum(
            (y - sum(right) / len(right)) ** 2 for y in right
        )
        threshold = (points[split - 1][0] + points[split][0]) / 2
        if best is None or error < best[0] - 1e-15:
            best = (error, threshold)
    return best[1]
