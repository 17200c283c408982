"""B-spline basis on equally spaced knots and difference penalties."""
import numpy as np


def equispaced_knots(x_min, x_max, n_basis, degree=3):
    """Knot vector for `n_basis` B-splines of `degree` covering [x_min, x_max].

    The interval is split into ``n_basis - degree`` equal segments and the
    grid is extended by `degree` knots on each side, so every point of the
    interval is covered by exactly ``degree + 1`` non-zero basis functions.
    """
    n_segments = n_basis - degree
    if n_segments < 1:
        raise ValueError(f"n_basis ({n_basis}) must exceed degree ({degree})")
    if not x_max > x_min:
        raise ValueError("x_max must be greater than x_min")
    dx = (x_max - x_min) / n_segments
    return x_min + dx * np.arange(-degree, n_segments + degree + 1, dtype=float)


def basis_matrix(x, knots, degree=3):
    """Evaluate all B-splines defined by `knots` at `x`.

    Uses the Cox-de Boor recursion on half-open knot spans.

    Parameters
    ----------
    x : array_like, shape (m,)
    knots : numpy.ndarray, shape (k,)
        Non-decreasing knot vector.
    degree : int

    Returns
    -------
    numpy.ndarray, shape (m, k - degree - 1)
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(knots, dtype=float)
    # degree 0: indicator of each knot span
    B = ((t[:-1] <= x[:, None]) & (x[:, None] < t[1:])).astype(float)
    for k in range(1, degree + 1):
        left_den = t[k:-1] - t[:-k - 1]
        right_den = t[k + 1:] - t[1:-k]
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(left_den > 0, (x[:, None] - t[:-k - 1]) / left_den, 0.0)
            right = np.where(right_den > 0, (t[k + 1:] - x[:, None]) / right_den, 0.0)
        B = left * B[:, :-1] + right * B[:, 1:]
    return B


def difference_matrix(n, order=2):
    """``(n - order) x n`` matrix of `order`-th differences."""
    return np.diff(np.eye(n), n=order, axis=0)
