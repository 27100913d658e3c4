"""One-sided Fourier inversion of characteristic-function samples onto a grid."""
import math

import numpy as np
from scipy.fft import next_fast_len


def fft_plan(dy, du_max, n_y):
    """FFT length ``n`` and u-step ``du <= du_max`` with ``n du dy = 2 pi``."""
    need = max(int(math.ceil(2.0 * math.pi / (dy * du_max))), int(n_y), 2)
    n = next_fast_len(need)
    return n, 2.0 * math.pi / (n * dy)


def invert_on_grid(values, du, y0, dy, n_y):
    """Trapezoid rule for (1/pi) Re int_0^U exp(-i y u) values(u) du on a grid.

    ``values[k]`` is the integrand at ``u = k du``; the integral is evaluated
    exactly (up to rounding) at ``y_j = y0 + j dy`` for every ``j < n_y`` by
    folding the u-sum modulo the FFT length.
    """
    n = int(round(2.0 * math.pi / (du * dy)))
    if abs(n * du * dy - 2.0 * math.pi) > 1e-9 * 2.0 * math.pi or n < n_y:
        raise ValueError("du and dy do not form an FFT pair for this grid")
    k = np.arange(values.shape[0])
    c = values * np.exp(-1j * y0 * du * k)
    c[0] *= 0.5
    folded = np.zeros(n, dtype=np.complex128)
    np.add.at(folded, k % n, c)
    return (du / math.pi) * np.fft.fft(folded).real[:n_y]
