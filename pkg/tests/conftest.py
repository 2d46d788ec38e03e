import numpy as np

from wicknlw import SpectralField
from wicknlw.fields import ball_mask


def random_field(n_max: int, seed: int, scale: float = 1.0) -> SpectralField:
    """Hermitian ball-supported field with Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    k = 2 * n_max + 1
    c = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    c = 0.5 * (c + np.conj(c[::-1, ::-1])) * scale
    c[~ball_mask(n_max)] = 0.0
    return SpectralField(n_max, c)
