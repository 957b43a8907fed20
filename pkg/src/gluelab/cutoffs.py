"""Quintic-smoothstep cutoff functions shared by weights and pre-gluing.

All bridges are the quintic smoothstep s^3(10 - 15s + 6s^2): C^2, monotone,
plateau-exact outside [0, 1], max slope 15/8 = 1.875.
"""

import numpy as np

MAX_SMOOTHSTEP_SLOPE = 1.875


def smoothstep5(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def kappa_plus(tau):
    """0 on (-inf, 1], 1 on [2, inf), smooth monotone bridge."""
    return smoothstep5(np.asarray(tau, dtype=float) - 1.0)


def kappa0(tau, R):
    """1 for |tau| <= R, 0 for |tau| >= R+1; |slope| <= 2."""
    return 1.0 - smoothstep5(np.abs(np.asarray(tau, dtype=float)) - R)


def phi_plus(tau, K):
    """1 for tau <= K, 0 for tau >= K+1."""
    return 1.0 - smoothstep5(np.asarray(tau, dtype=float) - K)


def phi_minus(tau, K):
    """0 for tau <= K, 1 for tau >= K+1 (complement of phi_plus)."""
    return smoothstep5(np.asarray(tau, dtype=float) - K)


def phi0(tau, K):
    """1 for |tau| <= K, 0 for |tau| >= K+1."""
    return 1.0 - smoothstep5(np.abs(np.asarray(tau, dtype=float)) - K)
