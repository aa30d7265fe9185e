"""

This module evaluates truncated Riesz transforms

    R^[eps, M] f(x) = int_eps^M d/dx (T_t f)(x) dt / sqrt(t)

in spectral form. In the eigenbasis the time integral is the weight

    w(lambda) = sqrt(pi / lambda) (erfc(sqrt(eps lambda)) - erfc(sqrt(M lambda)))

so the full transform equals sqrt(pi) d/dx L^(-1/2). The x-derivative acts on
the eigenvectors by central differences.
"""

import logging
import math

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from hardyscope.errors import (
    DomainError,
    PreconditionError,
    RangeError,
    SingularOperatorError,
)
from hardyscope.models import GridFunction, KernelMatrix, RieszKernel
from hardyscope.services import grid_service, semigroup_service

logger = logging.getLogger(__name__)


def _check_window(epsilon, upper):
    if epsilon < 0 or not upper >= epsilon or math.isnan(upper):
        raise DomainError(
            f"time window [{epsilon}, {upper}] must satisfy 0 <= eps <= M"
        )


def riesz_weights(eigenvalues, epsilon=0.0, upper=math.inf):
    """

    Spectral weights of the truncated Riesz transform.


    Args:
        eigenvalues (np.ndarray): Positive eigenvalues.
        epsilon (float): Lower time limit, >= 0.
        upper (float): Upper time limit, may be inf.

    Returns:
        np.ndarray: int_eps^M exp(-t lambda) t^(-1/2) dt for every lambda.
    """
    _check_window(epsilon, upper)
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if np.any(eigenvalues <= 0):
        raise SingularOperatorError("Riesz weights need positive eigenvalues")
    roots = np.sqrt(eigenvalues)
    lower_tail = special.erfc(np.sqrt(epsilon) * roots)
    upper_tail = (
        np.zeros_like(roots)
        if math.isinf(upper)
        else special.erfc(np.sqrt(upper) * roots)
    )
    return np.sqrt(np.pi) / roots * (lower_tail - upper_tail)


def _require_positive(op):
    if op.ground_energy <= 0:
        raise SingularOperatorError(
            f"lambda_0 = {op.ground_energy:.3g}; the Riesz transform needs lambda_0 > 0"
        )


def kernel_from_weights(op, weights):
    """Kernel density sum_k w_k u_k'(x) u_k(y) / h."""
    return (op.gradients * weights) @ op.vectors.T / op.grid.spacing


def apply_weights(op, weights, f):
    """sum_k w_k <f, u_k> u_k' without forming the kernel."""
    return op.gradients @ (weights * (op.vectors.T @ f.values))


def riesz_truncated(op, epsilon, upper):
    """

    Truncated Riesz kernel over the time window [eps, M].


    Raises:
        SingularOperatorError: If lambda_0 <= 0.
    """
    _require_positive(op)
    weights = riesz_weights(op.eigenvalues, epsilon, upper)
    return RieszKernel(
        op.grid, float(epsilon), float(upper), kernel_from_weights(op, weights)
    )


def riesz_full(op):
    """The untruncated kernel, window [0, inf]."""
    return riesz_truncated(op, 0.0, math.inf)


def riesz_apply(op, f, epsilon=0.0, upper=math.inf):
    """Apply R^[eps, M] to a grid function."""
    _require_positive(op)
    weights = riesz_weights(op.eigenvalues, epsilon, upper)
    return GridFunction(op.grid, apply_weights(op, weights, f))


def riesz_quadrature(op, f, epsilon, upper, steps=512):
    """

    Time quadrature of int_eps^M d/dx (T_t f) t^(-1/2) dt, computed as written.


    Substitutes t = e^u and applies the composite midpoint rule with `steps`
    nodes; the x-derivative acts on T_t f by central differences.
    """
    if not 0 < epsilon < upper < math.inf:
        raise DomainError(
            f"quadrature window [{epsilon}, {upper}] must satisfy 0 < eps < M < inf"
        )
    bounds = (math.log(epsilon), math.log(upper))
    step = (bounds[1] - bounds[0]) / steps
    total = np.zeros(op.grid.n_points)
    for index in range(steps):
        t = math.exp(bounds[0] + (index + 0.5) * step)
        smoothed = semigroup_service.heat_apply(op, t, f)
        total += grid_service.derivative(smoothed).values * math.sqrt(t) * step
    return GridFunction(op.grid, total)


def split_windows(cube, epsilon):
    """

    Time windows of the local and far parts relative to the breakpoint d(Q)^2.


    Returns:
        tuple: (local window or None, far window or None) inside [eps, 1/eps].
    """
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    breakpoint_ = cube.diameter**2
    inverse = 1.0 / epsilon
    local = None if breakpoint_ <= epsilon else (epsilon, min(breakpoint_, inverse))
    far = None if breakpoint_ >= inverse else (max(breakpoint_, epsilon), inverse)
    return local, far


def split_kernels(op, cube, epsilon):
    """

    Split R^eps = R^[eps, 1/eps] at t = d(Q)^2 into local and far kernels.


    Returns:
        tuple: (local RieszKernel, far RieszKernel); an empty window gives zeros.
    """
    _require_positive(op)
    local_window, far_window = split_windows(cube, epsilon)
    kernels = []
    for window in (local_window, far_window):
        if window is None:
            kernels.append(
                RieszKernel(
                    op.grid, epsilon, epsilon, np.zeros((op.grid.n_points,) * 2)
                )
            )
        else:
            kernels.append(riesz_truncated(op, *window))
    return tuple(kernels)


def local_free_kernel(x, epsilon, tau):
    """

    int_eps^tau d/dx P_t(x) t^(-1/2) dt, in closed form
    (exp(-x^2 / 4 eps) - exp(-x^2 / 4 tau)) / (sqrt(pi) x), and 0 at x = 0.
    """
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0, 1.0, x)
    values = (np.exp(-(x**2) / (4.0 * epsilon)) - np.exp(-(x**2) / (4.0 * tau))) / (
        np.sqrt(np.pi) * safe
    )
    return np.where(x == 0, 0.0, values)


def local_riesz_free(cube, f, epsilon):
    """

    Local free Riesz piece int_eps^{d(Q)^2} d/dx (f * P_t) t^(-1/2) dt.


    Independent of V: the closed-form kernel is convolved with f.

    Raises:
        PreconditionError: Unless 0 < eps < d(Q)^2.
    """
    tau = cube.diameter**2
    if not 0 < epsilon < tau:
        raise PreconditionError(
            f"epsilon must lie in (0, d(Q)^2 = {tau}), got {epsilon}"
        )
    return grid_service.convolve_with_kernel(
        f, lambda offsets: local_free_kernel(offsets, epsilon, tau)
    )


def _quadrature_weights_sqrt(eigenvalues, epsilon, upper, nodes):
    """

    Gauss-Legendre in u = sqrt(t) of int_eps^M exp(-t lambda) t^(-1/2) dt,
    that is int 2 exp(-u^2 lambda) du.
    """
    abscissae, weights = legendre.leggauss(nodes)
    low, high = math.sqrt(epsilon), math.sqrt(upper)
    u = low + 0.5 * (high - low) * (abscissae + 1.0)
    scaled = 0.5 * (high - low) * weights
    return np.exp(-np.outer(eigenvalues, u**2)) @ (2.0 * scaled)


def w_weights(op, reference, epsilon, tau, method="spectral", nodes=64):
    """Weights of the perturbed and free operators for W over [eps, tau]."""
    if method == "spectral":
        return (
            riesz_weights(op.eigenvalues, epsilon, tau),
            riesz_weights(reference.eigenvalues, epsilon, tau),
        )
    if method == "quadrature":
        return (
            _quadrature_weights_sqrt(op.eigenvalues, epsilon, tau, nodes),
            _quadrature_weights_sqrt(reference.eigenvalues, epsilon, tau, nodes),
        )
    raise DomainError(f"unknown W method '{method}'")


def w_kernel(op, cube, epsilon=0.0, reference=None, method="spectral", nodes=64):
    """

    W_Q^eps(x, y) = int_eps^{d(Q)^2} d/dx (T_t - P_t)(x, y) t^(-1/2) dt.


    P_t is the free operator on the same grid. "spectral" uses the closed-form
    weights, "quadrature" integrates in u = sqrt(t) by Gauss-Legendre.

    Raises:
        RangeError: If d(Q)^2 exceeds the reliable time range.
    """
    tau = cube.diameter**2
    t_max = semigroup_service.reliable_time_range(op.grid)[1]
    if tau > t_max:
        raise RangeError(
            f"d(Q)^2 = {tau:g} exceeds the reliable time range (<= {t_max:g})"
        )
    _require_positive(op)
    reference = reference or semigroup_service.free_operator(op.grid)
    weights, free_weights = w_weights(op, reference, epsilon, tau, method, nodes)
    entries = kernel_from_weights(op, weights) - kernel_from_weights(
        reference, free_weights
    )
    logger.debug("W kernel on %s (%s)", cube, method)
    return KernelMatrix(op.grid, (float(epsilon), float(tau)), entries)


def w_apply(op, cube, f, epsilon=0.0, reference=None):
    """Apply W_Q^eps to a grid function without forming the kernel."""
    tau = cube.diameter**2
    reference = reference or semigroup_service.free_operator(op.grid)
    weights, free_weights = w_weights(op, reference, epsilon, tau)
    return GridFunction(
        op.grid,
        apply_weights(op, weights, f) - apply_weights(reference, free_weights, f),
    )
