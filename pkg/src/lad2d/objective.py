"""Fit objectives (absolute, squared, smoothed-absolute) and the periodogram.

The periodogram drives frequency initialization: its p sharpest sufficiently
separated peaks on a refined lattice locate the component frequencies.
"""

from __future__ import annotations

import math

import numpy as np

from .model import Grid, ModelParams, SignalField, model_grid_values


class PeakPickingError(RuntimeError):
    """Raised when the periodogram does not expose enough separated peaks."""


def _check_same_grid(params_grid: Grid, data: SignalField) -> None:
    if params_grid != data.grid:
        raise ValueError(f"grid mismatch: {params_grid} vs {data.grid}")


def residual_field(params: ModelParams, data: SignalField) -> SignalField:
    """Observed minus modeled values, position by position."""
    model = model_grid_values(params.as_vector(), data.grid.t_values(), data.grid.s_values())
    return SignalField(data.grid, data.values - model)


def lad_objective(params: ModelParams, data: SignalField) -> float:
    """Mean absolute residual over the grid."""
    return lad_objective_vec(params.as_vector(), data)


def lse_objective(params: ModelParams, data: SignalField) -> float:
    """Mean squared residual over the grid."""
    return lse_objective_vec(params.as_vector(), data)


def lad_objective_vec(theta: np.ndarray, data: SignalField) -> float:
    """LAD objective on a flat parameter vector (optimizer hot path)."""
    model = model_grid_values(theta, data.grid.t_values(), data.grid.s_values())
    return float(np.abs(data.values - model).mean())


def lse_objective_vec(theta: np.ndarray, data: SignalField) -> float:
    """Least-squares objective on a flat parameter vector (optimizer hot path)."""
    r = data.values - model_grid_values(theta, data.grid.t_values(), data.grid.s_values())
    return float((r * r).mean())


def smooth_abs(x, beta: float):
    """Twice continuously differentiable surrogate for |x|.

    Inside |x| <= 1/beta the absolute value is replaced by the cubic
    -(beta^2/3)|x|^3 + beta x^2 + 1/(3 beta); outside it equals |x| exactly.
    The surrogate is even, sits above |x|, and exceeds it by at most
    1/(3 beta) (attained at 0).  Accepts scalars or arrays.
    """
    if not (beta > 0):
        raise ValueError(f"beta must be positive, got {beta}")
    ax = np.abs(x)
    inner = -(beta**2 / 3.0) * ax**3 + beta * ax**2 + 1.0 / (3.0 * beta)
    # |x| is a true lower envelope of the cubic; enforce it against the last
    # ulp of rounding near the join so the gap is never spuriously negative.
    inner = np.maximum(inner, ax)
    out = np.where(ax > 1.0 / beta, ax, inner)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def default_smoothing_beta(grid: Grid) -> float:
    """Default smoothing rate (T*S)^0.9: grows fast enough that the smoothed
    objective tracks the exact one, slowly enough to stay differentiable at
    the working scale."""
    return float(grid.n**0.9)


def smoothed_lad_objective(params: ModelParams, data: SignalField, beta: float) -> float:
    """Mean of the smoothed absolute value over the residuals."""
    r = residual_field(params, data)
    return float(np.mean(smooth_abs(r.values, beta)))


def objective_value(kind: str, params: ModelParams, data: SignalField, beta: float | None = None) -> float:
    """Dispatch on objective kind: 'lad', 'lse', or 'smoothed_lad'."""
    if kind == "lad":
        return lad_objective(params, data)
    if kind == "lse":
        return lse_objective(params, data)
    if kind == "smoothed_lad":
        return smoothed_lad_objective(params, data, beta if beta is not None else default_smoothing_beta(data.grid))
    raise ValueError(f"unknown objective kind {kind!r}")


def periodogram(data: SignalField, lam: float, mu: float) -> float:
    """|sum_t sum_s y(t,s) exp(-i(lam t + mu s))|^2 / (T S) at one frequency pair."""
    for name, value in (("lam", lam), ("mu", mu)):
        if not (0.0 <= value <= math.pi):
            raise ValueError(f"{name}={value} outside [0, pi]")
    t, s = data.grid.t_values(), data.grid.s_values()
    z = np.exp(-1j * lam * t) @ data.values @ np.exp(-1j * mu * s)
    return float(abs(z) ** 2 / data.grid.n)


def periodogram_lattice(
    data: SignalField, refinement: int = 2
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Periodogram on the lattice lam_j = pi j / (R T), mu_k = pi k / (R S).

    Returns (lams, mus, I) with I of shape (len(lams), len(mus)).  The double
    sum separates, so the whole lattice costs two small matrix products.
    """
    if refinement < 1:
        raise ValueError(f"refinement must be >= 1, got {refinement}")
    T, S = data.grid.T, data.grid.S
    lams = np.pi * np.arange(refinement * T + 1) / (refinement * T)
    mus = np.pi * np.arange(refinement * S + 1) / (refinement * S)
    t, s = data.grid.t_values(), data.grid.s_values()
    et = np.exp(-1j * np.outer(lams, t))  # (L, T)
    es = np.exp(-1j * np.outer(s, mus))  # (S, M)
    z = et @ data.values @ es
    return lams, mus, (z.real**2 + z.imag**2) / data.grid.n


def _local_maxima(intensity: np.ndarray) -> np.ndarray:
    """Boolean mask of strict local maxima over the available 8-neighborhood."""
    inner = np.pad(intensity, 1, mode="constant", constant_values=-np.inf)
    mask = np.ones_like(intensity, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = inner[1 + di : 1 + di + intensity.shape[0], 1 + dj : 1 + dj + intensity.shape[1]]
            np.logical_and(mask, intensity > shifted, out=mask)
    return mask


def peak_candidates(
    data: SignalField, grid_refinement: int = 2, same_lobe_only: bool = False
) -> list[tuple[float, float, float]]:
    """Separated periodogram local maxima as (lam, mu, height), tallest first.

    By default a shorter candidate is dropped when a taller one sits within
    2 pi / min(T, S) of it in *either* coordinate: that spacing is one
    main-lobe width, so a single component cannot contribute two entries (its
    sidelobes sit on the lobe axes and get swallowed).  With
    ``same_lobe_only`` the suppression needs closeness in *both* coordinates;
    that keeps weak genuine peaks that merely share a frequency row or column
    with an unrelated taller bump, which matters when scanning residuals.
    """
    lams, mus, intensity = periodogram_lattice(data, grid_refinement)
    mask = _local_maxima(intensity)
    idx = np.argwhere(mask)
    heights = intensity[mask]
    # Tallest first; ties broken by lattice position for determinism.
    order = np.lexsort((idx[:, 1], idx[:, 0], -heights))
    separation = 2.0 * np.pi / min(data.grid.T, data.grid.S)
    chosen: list[tuple[float, float, float]] = []
    for row in order:
        lam, mu = float(lams[idx[row, 0]]), float(mus[idx[row, 1]])
        if same_lobe_only:
            keep = all(
                max(abs(lam - l0), abs(mu - m0)) >= separation for l0, m0, _ in chosen
            )
        else:
            keep = all(
                abs(lam - l0) >= separation and abs(mu - m0) >= separation
                for l0, m0, _ in chosen
            )
        if keep:
            chosen.append((lam, mu, float(intensity[idx[row, 0], idx[row, 1]])))
    return chosen


def pick_peaks(data: SignalField, p: int, grid_refinement: int = 2) -> list[tuple[float, float]]:
    """The p tallest separated periodogram peaks, tallest first."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    chosen = peak_candidates(data, grid_refinement)
    if len(chosen) < p:
        raise PeakPickingError(
            f"insufficient peaks: found {len(chosen)} separated local maxima, need {p}"
        )
    return [(lam, mu) for lam, mu, _ in chosen[:p]]
