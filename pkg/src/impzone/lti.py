"""Impulsive LTI plant, rational spectrum and modal transition matrices.

The continuous flow ``x' = A x`` runs uncontrolled between impulse instants
``k T``; at each instant the state jumps by ``B u``.  Everything downstream
evaluates ``exp(A t)`` through the modal form ``sum_r phi_r exp(lambda_r t)``,
with ``lambda_r = eta_r / rho`` recovered as exact rationals.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import (
    ComplexSpectrum,
    IllConditionedEigenbasis,
    NonRationalEigenvalue,
    RepeatedEigenvalue,
)
from .geometry import Polytope

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_Q_MAX = 1000
DEFAULT_COND_MAX = 1e8


def rationalize_spectrum(eigs, tol=DEFAULT_TOL, q_max=DEFAULT_Q_MAX):
    """Write real eigenvalues as ``eta_r / rho`` over their least common denominator.

    Parameters
    ----------
    eigs : sequence of real or complex
    tol : float
        Accepted distance between an eigenvalue and its rational approximation;
        also the threshold for imaginary parts and for coincident eigenvalues.
    q_max : int
        Largest admissible denominator.

    Returns
    -------
    etas : list of int, sorted increasing
    rho : int
    """
    eigs = np.atleast_1d(np.asarray(eigs, dtype=complex))
    if np.any(np.abs(eigs.imag) > tol):
        raise ComplexSpectrum(f"eigenvalues {eigs} have nonzero imaginary parts")
    lam = np.sort(eigs.real)
    if lam.size > 1 and np.min(np.diff(lam)) <= tol:
        raise RepeatedEigenvalue(f"eigenvalues {lam} are not pairwise distinct")
    fracs = []
    for x in lam:
        fr = Fraction(float(x)).limit_denominator(q_max)
        if abs(float(fr) - x) >= tol:
            raise NonRationalEigenvalue(f"{x!r} has no p/q with q <= {q_max} within {tol}")
        fracs.append(fr)
    rho = math.lcm(*(fr.denominator for fr in fracs))
    etas = [int(fr * rho) for fr in fracs]
    return etas, rho


@dataclass(frozen=True)
class ModalDecomposition:
    """``exp(A t) = sum_r modal_matrices[r] * exp(etas[r] / rho * t)``."""

    etas: tuple
    rho: int
    modal_matrices: np.ndarray

    @property
    def eigenvalues(self):
        return np.array(self.etas, dtype=float) / self.rho

    @property
    def n(self):
        return self.modal_matrices.shape[1]

    def transition(self, t):
        """``exp(A t)``; ``t`` may be an array, giving shape ``t.shape + (n, n)``."""
        t = np.asarray(t, dtype=float)
        ex = np.exp(np.multiply.outer(t, self.eigenvalues))
        return np.tensordot(ex, self.modal_matrices, axes=1)

    def free_response(self, x0, t):
        """``exp(A t) x0``; vectorized over ``t``."""
        return self.transition(t) @ np.asarray(x0, dtype=float)


def modal_decompose(A, tol=DEFAULT_TOL, q_max=DEFAULT_Q_MAX, cond_max=DEFAULT_COND_MAX):
    """Spectral projectors ``phi_r = V e_r e_r' V^-1`` of a diagonalizable ``A``.

    Accepts either a matrix or an :class:`ImpulsiveSystem`.
    """
    if isinstance(A, ImpulsiveSystem):
        A = A.A
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w, V = np.linalg.eig(A)
    etas, rho = rationalize_spectrum(w, tol, q_max)
    order = np.argsort(w.real)
    V = V[:, order].real
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > cond_max:
        raise IllConditionedEigenbasis(f"eigenvector matrix condition number {cond:.3g}")
    Vinv = np.linalg.inv(V)
    phis = np.einsum("ir,rj->rij", V, Vinv)
    phis.setflags(write=False)
    return ModalDecomposition(tuple(etas), rho, phis)


@dataclass(frozen=True)
class DiscreteSystem:
    Ad: np.ndarray
    Bd: np.ndarray

    def step(self, x, u):
        return self.Ad @ np.asarray(x, dtype=float) + self.Bd @ np.atleast_1d(u)


@dataclass(frozen=True)
class ImpulsiveSystem:
    """Plant with uncontrolled flow ``x' = A x`` and jumps ``B u`` every ``period``.

    ``state_set`` is the polyhedron X, ``input_set`` the compact polytope U.
    """

    A: np.ndarray
    B: np.ndarray
    period: float
    state_set: Polytope
    input_set: Polytope

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.state_set.dim != n or self.input_set.dim != B.shape[1]:
            raise ValueError("state/input set dimensions do not match (A, B)")
        if not self.input_set.is_bounded:
            raise ValueError("input set must be compact")
        for name, P in (("state", self.state_set), ("input", self.input_set)):
            if not np.all(P.v > 0):
                log.warning("origin is not interior to the %s set", name)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @cached_property
    def modal(self):
        return modal_decompose(self.A)

    def origin_interior(self):
        return bool(np.all(self.state_set.v > 0) and np.all(self.input_set.v > 0))


def discretize(sys):
    """Impulse-sampled model ``x(k+1) = exp(A T) x(k) + B u(k)``."""
    Ad = sys.modal.transition(sys.period)
    Ad.setflags(write=False)
    return DiscreteSystem(Ad, sys.B)


def free_response(md, x0, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("free response is defined for t >= 0")
    return md.free_response(x0, t)
