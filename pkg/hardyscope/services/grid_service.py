"""

This module provides quadrature, norms, derivatives and the free heat kernel
on uniform 1D grids.


All integrals use the trapezoid rule. Windows are closed intervals and select
the grid nodes they contain.
"""

import logging

import numpy as np
from scipy import integrate as sp_integrate
from scipy import signal, special

from hardyscope.errors import DomainError
from hardyscope.models import GridFunction

logger = logging.getLogger(__name__)


def _check_time(t):
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")


def sample(grid, func):
    """

    Sample a callable at the grid nodes.


    Args:
        grid (Grid): The grid.
        func (callable): Vectorized function of x.

    Returns:
        GridFunction: The sampled function.
    """
    values = np.broadcast_to(
        np.asarray(func(grid.points), dtype=float), grid.points.shape
    )
    return GridFunction(grid, values)


def window_mask(grid, window=None):
    """

    Boolean mask of the nodes inside a closed window.


    Args:
        grid (Grid): The grid.
        window (tuple, optional): (a, b). Defaults to the whole domain.

    Returns:
        np.ndarray: Mask of nodes with a <= x <= b.

    Raises:
        DomainError: If the window is reversed or leaves the domain.
    """
    if window is None:
        return np.ones(grid.n_points, dtype=bool)
    left, right = window
    slack = 1e-9 * grid.spacing
    if left > right:
        raise DomainError(f"window ({left}, {right}) is reversed")
    if left < -grid.half_width - slack or right > grid.half_width + slack:
        raise DomainError(
            f"window ({left}, {right}) lies outside the domain "
            f"[-{grid.half_width}, {grid.half_width}]"
        )
    points = grid.points
    return (points >= left - slack) & (points <= right + slack)


def quadrature_weights(grid, window=None):
    """Trapezoid weights over the nodes inside `window` (zero elsewhere)."""
    mask = window_mask(grid, window)
    weights = np.where(mask, grid.spacing, 0.0)
    inside = np.flatnonzero(mask)
    if inside.size < 2:
        return np.zeros(grid.n_points)
    weights[inside[0]] *= 0.5
    weights[inside[-1]] *= 0.5
    return weights


def integrate(f):
    """Trapezoid quadrature of f over its whole grid."""
    return float(sp_integrate.trapezoid(f.values, dx=f.grid.spacing))


def l1_norm(f, window=None):
    """

    L^1 norm of f restricted to a window.


    Args:
        f (GridFunction): The function.
        window (tuple, optional): (a, b). Defaults to the whole domain.

    Returns:
        float: Trapezoid integral of |f| over the nodes inside the window.
    """
    return float(quadrature_weights(f.grid, window) @ np.abs(f.values))


def l2_norm(f, window=None):
    """L^2 norm of f restricted to a window."""
    return float(np.sqrt(quadrature_weights(f.grid, window) @ np.square(f.values)))


def derivative(f):
    """Central differences inside, one-sided differences at the two endpoints."""
    return GridFunction(f.grid, np.gradient(f.values, f.grid.spacing))


def free_kernel(t, x):
    """

    Gauss-Weierstrass kernel P_t(x) = (4 pi t)^(-1/2) exp(-x^2 / 4t).


    Args:
        t (float): Time, must be positive.
        x (float or np.ndarray): Displacement.

    Returns:
        float or np.ndarray: Kernel values, same shape as x.

    Raises:
        DomainError: If t <= 0.
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    values = np.exp(-np.square(x) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    return float(values) if values.ndim == 0 else values


def free_kernel_derivative(t, x):
    """x-derivative of the free kernel, -x / (2t) P_t(x)."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    return -x / (2.0 * t) * free_kernel(t, x)


def integrated_free_kernel(tau, x):
    """

    Time integral of the free kernel, int_0^tau P_s(x) ds.


    Closed form sqrt(tau / pi) exp(-x^2 / 4 tau) - |x| / 2 erfc(|x| / 2 sqrt(tau)).
    """
    _check_time(tau)
    x = np.abs(np.asarray(x, dtype=float))
    gaussian = np.sqrt(tau / np.pi) * np.exp(-np.square(x) / (4.0 * tau))
    values = gaussian - 0.5 * x * special.erfc(x / (2.0 * np.sqrt(tau)))
    return float(values) if values.ndim == 0 else values


def _integrated_erfc(a, tau):
    """int_0^tau erfc(a / 2 sqrt(s)) ds for a >= 0."""
    root = np.sqrt(tau)
    return (tau + 0.5 * a**2) * special.erfc(a / (2.0 * root)) - a * root / np.sqrt(
        np.pi
    ) * np.exp(-(a**2) / (4.0 * tau))


def _integrated_distribution(x, tau):
    """int_0^tau int_-inf^x P_s(z) dz ds."""
    x = np.asarray(x, dtype=float)
    magnitude = np.abs(x)
    half = 0.5 * _integrated_erfc(magnitude, tau)
    return np.where(x >= 0, tau - half, half)


def cell_average_integrated_free_kernel(tau, x, spacing):
    """

    Average of int_0^tau P_s over the cells [x - h/2, x + h/2].


    Exact for every tau, including tau much smaller than h^2, where point
    samples of the integrated kernel no longer integrate to tau.
    """
    _check_time(tau)
    x = np.asarray(x, dtype=float)
    upper = _integrated_distribution(x + spacing / 2.0, tau)
    lower = _integrated_distribution(x - spacing / 2.0, tau)
    return (upper - lower) / spacing


def cell_average_free_kernel(t, x, spacing):
    """Average of P_t over the cells [x - h/2, x + h/2] (erf differences)."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    scale = 2.0 * np.sqrt(t)
    return 0.5 * (
        special.erf((x + spacing / 2.0) / scale)
        - special.erf((x - spacing / 2.0) / scale)
    ) / spacing


def lattice_free_kernel(t, x, spacing):
    """

    Heat kernel of the whole-lattice second difference with spacing h.


    This is the continuous-time random walk kernel e^(-2t/h^2) I_k(2t/h^2) / h
    at x = k h, which the Dirichlet grid operator reproduces away from the
    boundary. Comparing it with free_kernel measures the discretization gap.
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    values = special.ive(np.abs(x) / spacing, 2.0 * t / spacing**2) / spacing
    return float(values) if values.ndim == 0 else values


def convolve_with_kernel(f, kernel_of_offset):
    """

    Discrete convolution int f(y) k(x - y) dy by trapezoid weights.


    Args:
        f (GridFunction): The function.
        kernel_of_offset (callable): k evaluated on an array of offsets.

    Returns:
        GridFunction: The convolution sampled at the nodes of f's grid.
    """
    grid = f.grid
    n = grid.n_points
    offsets = np.arange(-(n - 1), n) * grid.spacing
    weighted = f.values * quadrature_weights(grid)
    full = signal.fftconvolve(weighted, kernel_of_offset(offsets), mode="full")
    return GridFunction(grid, full[n - 1 : 2 * n - 1])


def convolve_free(f, t):
    """

    Convolve f with the free kernel P_t.


    Args:
        f (GridFunction): The function.
        t (float): Time, must be positive.

    Returns:
        GridFunction: f * P_t sampled on the same grid; mass beyond +-L is lost.

    Raises:
        DomainError: If t <= 0.
    """
    _check_time(t)
    return convolve_with_kernel(f, lambda offsets: free_kernel(t, offsets))


def indicator(grid, interval):
    """

    Dual-cell indicator of a closed interval.


    Each node gets the fraction of its cell [x - h/2, x + h/2] covered by the
    interval, so the trapezoid integral equals the interval length whenever the
    endpoints are nodes.
    """
    left, right = interval
    if left > right:
        raise DomainError(f"interval ({left}, {right}) is reversed")
    h = grid.spacing
    points = grid.points
    overlap = np.minimum(points + h / 2, right) - np.maximum(points - h / 2, left)
    return GridFunction(grid, np.clip(overlap / h, 0.0, 1.0))


def refine(grid):
    """The grid with spacing h / 2 on the same domain and core fraction."""
    refined = grid.refine()
    logger.debug("Refined grid n=%d -> n=%d", grid.n_points, refined.n_points)
    return refined


def transfer(f, grid):
    """Linear interpolation of f onto another grid (zero outside f's domain)."""
    return GridFunction(
        grid, np.interp(grid.points, f.grid.points, f.values, left=0.0, right=0.0)
    )

