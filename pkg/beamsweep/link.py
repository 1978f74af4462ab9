"""Per-pair rates, exhaustive sweeps and throughput ratios.

Beam pair (i, j), combiner i and beamformer j, is flattened to
`n = i * len(F) + j`. Everywhere in the package, ties for the best pair go to
the lowest flattened index.
"""

import dataclasses

import numpy as np

from . import errors

__all__ = [
    "RateRow",
    "pair_index",
    "pair_from_index",
    "beam_gains",
    "per_pair_rate",
    "sweep_all",
    "throughput_ratio",
]


@dataclasses.dataclass(frozen=True, eq=False)
class RateRow:
    location: np.ndarray
    # Length |W| * |F|, ordered by flattened pair index.
    rates: np.ndarray
    snapshot_id: int = -1
    ue_index: int = -1


def pair_index(combiner, beamformer, num_beamformers):
    return combiner * num_beamformers + beamformer


def pair_from_index(index, num_beamformers):
    return divmod(int(index), num_beamformers)


def beam_gains(channel, combiners, beamformers):
    """Post-beamforming amplitudes w_i^H H[k] f_j, shape (K, |W|, |F|)."""
    matrices = channel.matrices
    combiners = np.asarray(getattr(combiners, "beams", combiners))
    beamformers = np.asarray(getattr(beamformers, "beams", beamformers))
    if combiners.shape[-1] != matrices.shape[1] or (
        beamformers.shape[-1] != matrices.shape[2]
    ):
        raise errors.DimensionError(
            f"Beams of sizes {combiners.shape[-1]}x{beamformers.shape[-1]} do not "
            f"match channel matrices of shape {matrices.shape[1:]}"
        )
    return np.einsum("wu,kub,fb->kwf", combiners.conj(), matrices, beamformers)


def _rate(gains, noise_power, stochastic, rng, noise_samples):
    if noise_power <= 0:
        raise errors.DimensionError("Noise power must be positive.")
    if not stochastic:
        power = np.abs(gains) ** 2
    else:
        if rng is None:
            raise ValueError("Stochastic rates need a random generator.")
        shape = (noise_samples, *np.shape(gains))
        noise = np.sqrt(noise_power / 2) * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
        received = np.mean(np.abs(gains + noise) ** 2, axis=0)
        power = np.maximum(received - noise_power, 0.0)
    return np.mean(np.log2(1 + power / noise_power), axis=0)


def per_pair_rate(
    channel,
    combiner,
    beamformer,
    noise_power,
    *,
    stochastic=False,
    rng=None,
    noise_samples=1,
):
    """Average rate over subcarriers for one pair, in bits/s/Hz.

    With `stochastic`, E|y|^2 is estimated from `noise_samples` noisy unit
    symbols per subcarrier and `|y|^2 - noise_power` is clamped at zero.
    """
    combiner = np.asarray(combiner)
    beamformer = np.asarray(beamformer)
    gains = beam_gains(channel, combiner[None, :], beamformer[None, :])[:, 0, 0]
    return float(_rate(gains, noise_power, stochastic, rng, noise_samples))


def sweep_all(
    channel,
    combiners,
    beamformers,
    noise_power,
    *,
    stochastic=False,
    rng=None,
    noise_samples=1,
):
    gains = beam_gains(channel, combiners, beamformers)
    rates = _rate(gains, noise_power, stochastic, rng, noise_samples)
    return RateRow(
        location=np.asarray(channel.location, dtype=float),
        rates=rates.reshape(-1),
        snapshot_id=channel.snapshot_id,
        ue_index=channel.ue_index,
    )


def throughput_ratio(rates, subset):
    """Best rate within `subset` over the best rate overall; 1.0 for a dead row."""
    rates = np.asarray(getattr(rates, "rates", rates))
    subset = np.asarray(subset, dtype=np.int64).reshape(-1)
    if subset.size == 0:
        raise errors.SelectionError("Subset of beam pairs is empty.")
    best = rates.max()
    if best <= 0:
        return 1.0
    return float(rates[subset].max() / best)
