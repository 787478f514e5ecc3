"""Exact KL divergence for homogeneous hidden Markov chains.

Implements the closed form for the unconditional divergence, its large-N rate,
a spectral O(d^3 log N) evaluation, the classical upper bound (which equals
the exact value), and the divergence between the two models' hidden-path
posteriors given a fully observed emission sequence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .divergence import _check_kinds, emission_kl_per_state, local_k_root, local_k_vector, weighted_sum
from .errors import SpectralError, StationaryError, ZeroLikelihoodError
from .model import Evidence, HmmModel, check_evidence

__all__ = [
    "kld_hmm_no_evidence",
    "kld_hmm_fast",
    "kld_rate",
    "do_bound",
    "stationary_distribution",
    "Spectral",
    "spectral_split",
    "BackwardTable",
    "backward_quantities",
    "posterior_conditionals",
    "kld_hmm_evidence",
]


def _check_pair(m1: HmmModel, m0: HmmModel):
    if m1.length != m0.length:
        raise ValueError(f"length mismatch: {m1.length} vs {m0.length}")
    if m1.n_states != m0.n_states:
        raise ValueError(f"state count mismatch: {m1.n_states} vs {m0.n_states}")
    _check_kinds(m1.emission, m0.emission)


def _local_terms(m1: HmmModel, m0: HmmModel):
    root = local_k_root(m1.initial, m0.initial, m1.emission, m0.emission)
    step = local_k_vector(m1.transition, m0.transition, m1.emission, m0.emission)
    return root, step


def kld_hmm_no_evidence(m1: HmmModel, m0: HmmModel) -> float:
    """Exact KL divergence between the two chains' joint laws, in nats.

    Evaluates ``k_root + mu1 @ (I + pi1 + ... + pi1^(N-2)) @ k`` by a right
    fold in O(N d^2) without forming matrix powers.
    """
    _check_pair(m1, m0)
    root, step = _local_terms(m1, m0)
    pi1 = m1.transition
    acc = np.zeros(m1.n_states)
    if np.isfinite(step).all():
        for _ in range(m1.length - 1):
            acc = step + pi1 @ acc
    else:
        for _ in range(m1.length - 1):
            acc = step + weighted_sum(pi1, acc)
    return float(root + weighted_sum(m1.initial, acc))


def stationary_distribution(pi) -> np.ndarray:
    """Row vector nu with nu @ pi = nu, entries >= 0, sum 1.

    Solves the linear system (pi^T - I | sum = 1) directly.  Raises
    StationaryError when the unit eigenvalue is not simple or another
    eigenvalue sits on (or numerically at) the unit circle, i.e. for
    reducible or periodic chains.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise ValueError(f"transition matrix must be square, got {pi.shape}")
    if (pi < 0).any() or np.abs(pi.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("transition matrix must be row-stochastic")
    d = pi.shape[0]
    eigenvalues = np.linalg.eigvals(pi)
    unit = np.abs(eigenvalues - 1.0) <= 1e-8
    if unit.sum() != 1:
        raise StationaryError(f"no unique stationary distribution: eigenvalue 1 has multiplicity {unit.sum()}")
    if (np.abs(eigenvalues[~unit]) > 1.0 - 1e-8).any():
        raise StationaryError("no unique stationary distribution: another eigenvalue lies on the unit circle")
    system = pi.T - np.eye(d)
    system[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    nu = np.linalg.solve(system, rhs)
    if nu.min() < -1e-12:
        raise StationaryError(f"stationary solve produced a negative mass {nu.min():.3g}")
    return np.clip(nu, 0.0, None)


def kld_rate(m1: HmmModel, m0: HmmModel) -> float:
    """Per-symbol divergence rate lim D/N = nu @ k, with nu stationary for m1."""
    _check_pair(m1, m0)
    nu = stationary_distribution(m1.transition)
    step = local_k_vector(m1.transition, m0.transition, m1.emission, m0.emission)
    return float(weighted_sum(nu, step))


def do_bound(m1: HmmModel, m0: HmmModel) -> float:
    """The classical decomposition-based upper bound, which is in fact exact.

    U = D(mu) + mu1 @ ( sum_{i=1}^{N-1} pi1^(i-1) [D(pi) + D(e)] + pi1^(N-1) D(e) ),
    where D(mu), D(pi), D(e) are the row divergences of the initial laws,
    transition rows and emission rows.  Always equals kld_hmm_no_evidence up to
    rounding; the two are computed along different routes on purpose.
    """
    _check_pair(m1, m0)
    d_initial = float(rel_entr(m1.initial, m0.initial).sum())
    d_emission = emission_kl_per_state(m1.emission, m0.emission)
    d_transition = rel_entr(m1.transition, m0.transition).sum(axis=1)
    step = d_transition + d_emission
    acc = np.zeros(m1.n_states)
    power = np.eye(m1.n_states)
    for _ in range(m1.length - 1):
        acc = acc + weighted_sum(power, step)
        power = power @ m1.transition
    acc = acc + weighted_sum(power, d_emission)
    return float(d_initial + weighted_sum(m1.initial, acc))


# ---------------------------------------------------------------------------
# Spectral fast path


@dataclass(frozen=True, eq=False)
class Spectral:
    """Eigendecomposition of a stochastic matrix with a simple unit eigenvalue.

    ``basis @ diag(eigenvalues) @ basis_inv`` reconstructs the matrix;
    ``unit_index`` points at the eigenvalue equal to 1.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    basis_inv: np.ndarray
    unit_index: int


def spectral_split(pi, unit_tol=1e-10, contraction_margin=1e-10, residual_tol=1e-9) -> Spectral:
    """Eigendecompose `pi`, requiring a simple unit eigenvalue and all other
    eigenvalue moduli below 1 by `contraction_margin`.

    Raises SpectralError when the preconditions fail (defective basis,
    multiple unit eigenvalues, or a periodic chain).
    """
    pi = np.asarray(pi, dtype=float)
    eigenvalues, basis = np.linalg.eig(pi)
    unit = np.abs(eigenvalues - 1.0) <= unit_tol
    n_unit = int(unit.sum())
    if n_unit != 1:
        raise SpectralError(f"eigenvalue 1 must be simple, found multiplicity {n_unit}")
    if (np.abs(eigenvalues[~unit]) > 1.0 - contraction_margin).any():
        worst = np.abs(eigenvalues[~unit]).max()
        raise SpectralError(f"second-largest eigenvalue modulus {worst:.12g} is too close to 1")
    try:
        basis_inv = np.linalg.inv(basis)
    except np.linalg.LinAlgError as exc:
        raise SpectralError("eigenvector basis is singular (matrix not diagonalizable)") from exc
    residual = np.abs(basis @ np.diag(eigenvalues) @ basis_inv - pi).max()
    if residual > residual_tol:
        raise SpectralError(f"eigendecomposition residual {residual:.3g} exceeds {residual_tol:.3g}")
    return Spectral(eigenvalues, basis, basis_inv, int(np.flatnonzero(unit)[0]))


def _spectral_series(split: Spectral, k, n_terms: int) -> np.ndarray:
    """``sum_{i=0}^{n_terms-1} pi^i @ k`` through the eigendecomposition.

    Splitting k along the unit eigenvector turns the divergent direction into
    the linear term ``n_terms * k1 * v1``; the remainder is a convergent
    geometric series of the contraction obtained by zeroing the unit
    eigenvalue, with its power taken by binary decomposition of the exponent.
    """
    k = np.asarray(k, dtype=complex)
    unit = split.unit_index
    v1 = split.basis[:, unit]
    k1 = (split.basis_inv @ k)[unit]
    k_rest = k - k1 * v1
    contraction_eigs = split.eigenvalues.copy()
    contraction_eigs[unit] = 0.0
    contraction = split.basis @ (contraction_eigs[:, None] * split.basis_inv)
    identity = np.eye(k.shape[0], dtype=complex)
    power = np.linalg.matrix_power(contraction, n_terms)
    series = n_terms * k1 * v1 + (identity - power) @ np.linalg.solve(identity - contraction, k_rest)
    scale = max(1.0, float(np.abs(series.real).max()))
    if np.abs(series.imag).max() > 1e-9 * scale:
        raise SpectralError("spectral series has a non-negligible imaginary part")
    return series.real


def _kld_hmm_spectral(m1: HmmModel, m0: HmmModel) -> float:
    """Fast-path value; raises SpectralError when the preconditions fail."""
    _check_pair(m1, m0)
    root, step = _local_terms(m1, m0)
    if m1.length == 1:
        return float(root)
    if not (np.isfinite(step).all() and math.isfinite(root)):
        raise SpectralError("local divergences are infinite; the spectral series does not apply")
    split = spectral_split(m1.transition)
    series = _spectral_series(split, step, m1.length - 1)
    return float(root + m1.initial @ series)


def kld_hmm_fast(m1: HmmModel, m0: HmmModel) -> float:
    """kld_hmm_no_evidence in O(d^3 log N) when the transition matrix allows it.

    Falls back to the O(N) direct summation (with a warning naming the reason)
    whenever the eigendecomposition preconditions fail, so the result is never
    wrong, only occasionally slower.
    """
    try:
        return _kld_hmm_spectral(m1, m0)
    except SpectralError as exc:
        warnings.warn(f"fast path unavailable ({exc}); using direct summation", stacklevel=2)
        return kld_hmm_no_evidence(m1, m0)


# ---------------------------------------------------------------------------
# Evidence conditioning


@dataclass(frozen=True, eq=False)
class BackwardTable:
    """Backward quantities B_i(s) = P(X_{i+1:N} = x_{i+1:N} | S_i = s), scaled.

    ``values[i-1] * exp(log_scale[i-1])`` recovers the unscaled B_i; each row
    is scaled to maximum 1 so that chains hundreds of symbols long do not
    underflow.  The last row is identically 1 with zero scale.
    """

    values: np.ndarray
    log_scale: np.ndarray
    log_likelihood: float


def backward_quantities(model: HmmModel, evidence: Evidence) -> BackwardTable:
    """Backward recursion B_{i-1}(r) = sum_s pi(r,s) e(s, x_i) B_i(s), scaled.

    The evidence likelihood P(X = x) = sum_s mu(s) e(s, x_1) B_1(s) is exposed
    as ``log_likelihood``.  Raises ZeroLikelihoodError carrying the 1-based
    position of the symbol at which all backward mass vanishes.
    """
    check_evidence(model, evidence)
    x = evidence.symbols
    n = model.length
    emis = model.emission.matrix
    pi = model.transition
    values = np.ones((n, model.n_states))
    log_scale = np.zeros(n)
    b = values[-1]
    acc = 0.0
    for i in range(n, 1, -1):
        raw = pi @ (emis[:, x[i - 1]] * b)
        top = raw.max()
        if not top > 0:
            raise ZeroLikelihoodError(i)
        b = raw / top
        acc += math.log(top)
        values[i - 2] = b
        log_scale[i - 2] = acc
    mass = model.initial * emis[:, x[0]] * values[0]
    total = mass.sum()
    if not total > 0:
        raise ZeroLikelihoodError(1)
    return BackwardTable(values, log_scale, math.log(total) + acc)


def posterior_conditionals(model: HmmModel, evidence: Evidence):
    """Initial posterior P(S_1 | X = x) and the conditionals P(S_i | S_{i-1}, X = x).

    Returns ``(initial, conditionals)`` where ``conditionals[i-2]`` is the
    row-stochastic matrix for position i (i = 2..N).  Rows whose state cannot
    occur given the evidence are left all-zero; chaining the returned factors
    reproduces the posterior probability of any hidden path.
    """
    table = backward_quantities(model, evidence)
    x = evidence.symbols
    n = model.length
    emis = model.emission.matrix
    mass = model.initial * emis[:, x[0]] * table.values[0]
    initial = mass / mass.sum()
    # factors[i-2][r, s] ~ pi(r, s) e(s, x_i) B_i(s), normalized per row
    factors = model.transition[None, :, :] * (emis[:, x[1:]].T * table.values[1:])[:, None, :]
    row_sums = factors.sum(axis=2)
    positive = row_sums > 0
    factors[positive] /= row_sums[positive][:, None]
    factors[~positive] = 0.0
    return initial, factors


def kld_hmm_evidence(m1: HmmModel, m0: HmmModel, evidence: Evidence) -> float:
    """KL divergence between the models' hidden-path posteriors given x, in nats.

    Runs the inward recursion on the evidence-conditioned chain: from
    K_N = 0 down to K_1 through the posterior conditionals, then aggregates
    under the first model's posterior of S_1.  Raises ZeroLikelihoodError
    (stating which model) when the evidence is impossible under either model.
    """
    _check_pair(m1, m0)
    try:
        initial1, factors1 = posterior_conditionals(m1, evidence)
    except ZeroLikelihoodError as exc:
        raise ZeroLikelihoodError(
            exc.position, f"zero likelihood under the first model (position {exc.position})"
        ) from None
    try:
        initial0, factors0 = posterior_conditionals(m0, evidence)
    except ZeroLikelihoodError as exc:
        raise ZeroLikelihoodError(
            exc.position, f"zero likelihood under the second model (position {exc.position})"
        ) from None
    inward = np.zeros(m1.n_states)
    for i in range(m1.length - 2, -1, -1):
        inward = rel_entr(factors1[i], factors0[i]).sum(axis=1) + weighted_sum(factors1[i], inward)
    return float(rel_entr(initial1, initial0).sum() + weighted_sum(initial1, inward))
