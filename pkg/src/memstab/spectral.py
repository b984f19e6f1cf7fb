"""Spectrum of the principal operator of the coupled memory system.

For each Dirichlet-Laplacian eigenvalue ``Lam`` the operator has the two
eigenvalues solving::

    mu^2 + (bg + lam + eta Lam) mu + (bg lam + (eta lam + kappa) Lam) = 0,

with ``bg = beta * gamma``. On the unit square ``Lam = pi^2 (m^2 + n^2)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .numkit import check_dense_limit, dense_eig

__all__ = [
    "SpectrumEntry",
    "Spectrum",
    "InconclusiveEnumerationError",
    "laplacian_eigenvalues_square",
    "mu_pair",
    "complex_band",
    "analytic_spectrum",
    "count_unstable",
    "discrete_spectrum",
    "discrete_eigenpairs",
]


class InconclusiveEnumerationError(RuntimeError):
    pass


def laplacian_eigenvalues_square(kmax):
    """The ``kmax`` smallest distinct values ``pi^2 (m^2 + n^2)``, ``m, n >= 1``.

    Returns a list of ``(Lam, multiplicity)`` in ascending order.
    """
    if int(kmax) != kmax or kmax < 1:
        raise ValueError(f"kmax must be a positive integer, got {kmax!r}")
    kmax = int(kmax)
    bound = 2
    while True:
        counts = {}
        for m in range(1, bound + 1):
            for n in range(1, bound + 1):
                s = m * m + n * n
                counts[s] = counts.get(s, 0) + 1
        # every s <= bound^2 + 1 is complete: it forces m, n <= bound
        complete = sorted(s for s in counts if s <= bound * bound + 1)
        if len(complete) >= kmax:
            return [(math.pi ** 2 * s, counts[s]) for s in complete[:kmax]]
        bound *= 2


def _coefficients(Lam, params):
    p = params
    b = p.beta_gamma + p.lam + p.eta * Lam
    c = p.beta_gamma * p.lam + (p.eta * p.lam + p.kappa) * Lam
    return b, c


def mu_pair(Lam, params):
    """Roots ``(mu_plus, mu_minus)`` for the Laplacian eigenvalue ``Lam``.

    ``mu_plus`` has the larger real part; for a complex pair it is the root
    with positive imaginary part.
    """
    b, c = _coefficients(Lam, params)
    disc = b * b - 4.0 * c
    if disc < 0:
        re, im = -0.5 * b, 0.5 * math.sqrt(-disc)
        return complex(re, im), complex(re, -im)
    mu_minus = -0.5 * (b + math.sqrt(disc))
    mu_plus = c / mu_minus if mu_minus != 0 else 0.0  # cancellation-free
    return complex(mu_plus), complex(mu_minus)


def complex_band(params):
    """Open interval of ``Lam`` giving a complex conjugate pair, or ``None``."""
    p = params
    rad = p.kappa ** 2 + p.kappa * p.eta * p.lam - p.beta_gamma * p.eta * p.kappa
    if rad <= 0:
        return None
    mid = p.eta * p.lam + 2 * p.kappa - p.beta_gamma * p.eta
    half = 2 * math.sqrt(rad)
    return ((mid - half) / p.eta ** 2, (mid + half) / p.eta ** 2)


@dataclass(frozen=True)
class SpectrumEntry:
    Lambda: float
    multiplicity: int
    mu_plus: complex
    mu_minus: complex
    is_complex_pair: bool

    def unstable(self, nu):
        """Distinct members of the pair with ``Re(mu + nu) >= 0``."""
        mus = [self.mu_plus] if self.mu_plus == self.mu_minus else [self.mu_plus, self.mu_minus]
        return [mu for mu in mus if mu.real + nu >= 0]


@dataclass(frozen=True)
class Spectrum:
    entries: list
    nu0: float
    band: object = None
    params: object = field(default=None, repr=False)

    def unstable_count(self, nu):
        return sum(len(e.unstable(nu)) for e in self.entries)


def analytic_spectrum(params, kmax):
    entries = []
    for Lam, mult in laplacian_eigenvalues_square(kmax):
        mp, mm = mu_pair(Lam, params)
        entries.append(SpectrumEntry(Lam, mult, mp, mm, mp.imag != 0.0))
    return Spectrum(entries, params.nu0, complex_band(params), params)


def _tail_bound(params, Lam_last):
    """Upper bound of ``Re mu`` over all ``Lam >= Lam_last``, or ``None``.

    Inside the complex band ``Re mu = -b(Lam)/2`` decreases; above it both
    roots are real and stay below ``-nu0`` (they cannot cross ``-nu0`` because
    the characteristic polynomial equals ``(nu0 - bg) kappa/eta > 0`` there).
    """
    band = complex_band(params)
    if band is None or params.nu0 <= params.beta_gamma or Lam_last < band[0]:
        return None
    b, _ = _coefficients(Lam_last, params)
    return max(-params.nu0, -0.5 * b)


def count_unstable(params, nu, kmax):
    """Number of distinct eigenvalues ``mu`` with ``Re(mu + nu) >= 0``.

    Returns ``(count, mus)`` with the offending unshifted eigenvalues. The
    enumeration must reach far enough that every larger ``Lam`` is provably
    stable under the shift, otherwise ``InconclusiveEnumerationError``.
    """
    spec = analytic_spectrum(params, kmax)
    Lam_last = spec.entries[-1].Lambda
    bound = _tail_bound(params, Lam_last)
    if bound is None or bound + nu >= 0:
        raise InconclusiveEnumerationError(
            f"inconclusive enumeration: kmax={kmax} (Lambda up to {Lam_last:.6g}) does not "
            f"certify Re(mu + nu) < 0 beyond the enumerated range for nu={nu}"
        )
    mus = [mu for e in spec.entries for mu in e.unstable(nu)]
    return len(mus), mus


def discrete_spectrum(blocks, limit=None):
    """Generalized eigenvalues of ``(A + nu E, E)``, descending real part."""
    check_dense_limit(blocks.dim, limit)
    ev = dense_eig(blocks.Anu, blocks.E)
    return _conjugate_closed(ev)


def discrete_eigenpairs(blocks, limit=None):
    check_dense_limit(blocks.dim, limit)
    return dense_eig(blocks.Anu, blocks.E, vectors=True)


def _conjugate_closed(ev, tol=1e-10):
    """Snap near-real values to the real axis and make complex pairs exact conjugates."""
    ev = np.array(ev, dtype=complex)
    scale = max(1.0, np.max(np.abs(ev)))
    ev[np.abs(ev.imag) <= tol * scale] = ev[np.abs(ev.imag) <= tol * scale].real
    upper = np.flatnonzero(ev.imag > 0)
    lower = np.flatnonzero(ev.imag < 0)
    if len(upper) == len(lower):
        for i in upper:
            j = lower[np.argmin(np.abs(ev[lower] - np.conj(ev[i])))]
            ev[j] = np.conj(ev[i])
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]
