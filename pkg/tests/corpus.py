"""Smooth test functions of one variable shared by the norm tests."""

import numpy as np

INTERPOLATION_CORPUS = {
    "gauss_w1": lambda X: np.exp(-X[..., 0] ** 2),
    "gauss_w4": lambda X: np.exp(-X[..., 0] ** 2 / 4),
    "gauss_w025": lambda X: np.exp(-4 * X[..., 0] ** 2),
    "gauss_shift": lambda X: np.exp(-(X[..., 0] - 0.5) ** 2),
    "sin1": lambda X: np.sin(X[..., 0]),
    "sin3": lambda X: np.sin(3 * X[..., 0]),
    "cos2": lambda X: np.cos(2 * X[..., 0]),
    "cos5": lambda X: np.cos(5 * X[..., 0]),
    "tanh1": lambda X: np.tanh(X[..., 0]),
    "tanh4": lambda X: np.tanh(4 * X[..., 0]),
    "lorentz": lambda X: 1 / (1 + X[..., 0] ** 2),
    "lorentz_narrow": lambda X: 1 / (1 + 9 * X[..., 0] ** 2),
    "x_gauss": lambda X: X[..., 0] * np.exp(-X[..., 0] ** 2),
    "x2_gauss": lambda X: X[..., 0] ** 2 * np.exp(-X[..., 0] ** 2),
    "sin_gauss": lambda X: np.sin(2 * X[..., 0]) * np.exp(-X[..., 0] ** 2 / 2),
    "atan2x": lambda X: np.arctan(2 * X[..., 0]),
    "sech": lambda X: 1 / np.cosh(X[..., 0]),
    "cubic": lambda X: X[..., 0] ** 3 - X[..., 0],
    "exp_sin": lambda X: np.exp(np.sin(X[..., 0])),
    "two_bumps": lambda X: np.exp(-(X[..., 0] - 1) ** 2 * 3) + np.exp(-(X[..., 0] + 1) ** 2 * 3),
}
