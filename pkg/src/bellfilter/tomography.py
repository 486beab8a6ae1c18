"""Maximum-likelihood state and process tomography from coincidence counts.

Both reconstructions parameterize a PSD matrix as X = T^dagger T with T
lower-triangular (real diagonal), so positivity holds for every parameter
vector: a 4x4 density matrix has 16 real parameters, a 16x16 Choi matrix 256.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .homsim import CountRecord
from .polarization import (
    TOMOGRAPHIC_LABELS,
    Basis,
    TomographicSet,
    TwoPhotonState,
    devectorize_matrix,
    state_from_label,
    vectorize_matrix,
)
from .superop import (
    ChoiMatrix,
    SuperMatrix,
    apply_matrix,
    choi_to_matrix,
    matrix_to_choi,
    normalize_superoperator,
)

MU_FLOOR = 1e-300
TNI_TOL = 1e-6
MAX_ITER = 100_000


class UnderdeterminedError(ValueError):
    pass


# -- Cholesky parameterization ---------------------------------------------------


def _tril(n: int):
    rows, cols = np.tril_indices(n)
    strict = rows != cols
    return rows, cols, rows[strict], cols[strict]


def params_to_t(x: np.ndarray, n: int) -> np.ndarray:
    rows, cols, srows, scols = _tril(n)
    t = np.zeros((n, n), complex)
    t[rows, cols] = x[: len(rows)]
    t[srows, scols] += 1j * x[len(rows):]
    return t


def t_to_params(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    rows, cols, srows, scols = _tril(n)
    return np.concatenate([t[rows, cols].real, t[srows, scols].imag])


def psd_to_t(x: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Lower-triangular T with T^dagger T = X (+ ridge * I), X PSD.

    Negative eigenvalues are clipped first. Uses the Cholesky factor of the
    index-reversed matrix, which is the reversal of an upper factor.
    """
    n = x.shape[0]
    w, v = np.linalg.eigh(0.5 * (x + x.conj().T))
    x = (v * np.clip(w, 0, None)) @ v.conj().T + ridge * np.eye(n)
    flip = x[::-1, ::-1]
    low = np.linalg.cholesky(flip)
    upper = low[::-1, ::-1]
    return upper.conj().T


class CholeskyPoissonProblem:
    """Negative log-likelihood of counts n_k with means rate * Tr[X B_k], X = T^dagger T."""

    def __init__(self, operators: np.ndarray, counts: np.ndarray, rate_scale: float, likelihood: str = "poisson"):
        ops = np.asarray(operators, dtype=complex)
        self.n = ops.shape[-1]
        # Tr[X B] = sum_pq X_pq B_qp
        self.design = rate_scale * np.transpose(ops, (0, 2, 1)).reshape(len(ops), -1)
        self.counts = np.asarray(counts, dtype=float).ravel()
        if likelihood not in ("poisson", "gaussian"):
            raise ValueError(f"unknown likelihood {likelihood!r}")
        self.likelihood = likelihood
        self._pos = self.counts > 0

    def means(self, x: np.ndarray) -> np.ndarray:
        t = params_to_t(x, self.n)
        return (self.design @ (t.conj().T @ t).ravel()).real

    def nll(self, x: np.ndarray) -> float:
        """Poisson: -sum[n log mu - mu] (log n! dropped). Gaussian: sum (mu - n)^2 / 2 max(n, 1)."""
        mu = self.means(x)
        if self.likelihood == "gaussian":
            return float(np.sum((mu - self.counts) ** 2 / (2 * np.maximum(self.counts, 1))))
        mu = np.maximum(mu, MU_FLOOR)
        return float(np.sum(mu - self.counts * np.log(mu)))

    def objective(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        t = params_to_t(x, self.n)
        mu = (self.design @ (t.conj().T @ t).ravel()).real
        if self.likelihood == "gaussian":
            var = np.maximum(self.counts, 1)
            f = np.sum((mu - self.counts) ** 2 / (2 * var))
            dmu = (mu - self.counts) / var
        else:
            mu = np.maximum(mu, MU_FLOOR)
            # deviance, summed termwise: each term is >= 0 and small near the optimum,
            # so no large cancelling sums limit the line search
            n, pos = self.counts, self._pos
            f = np.sum(mu[~pos]) + np.sum(mu[pos] - n[pos] - n[pos] * np.log(mu[pos] / n[pos]))
            dmu = 1.0 - self.counts / mu
        # dF/dX (X = T^dagger T) as the matrix G with dF = Tr[G dX]
        g = (dmu @ self.design).reshape(self.n, self.n).T
        q = (g @ t.conj().T).T
        rows, cols, srows, scols = _tril(self.n)
        grad = np.concatenate([2 * q[rows, cols].real, -2 * q[srows, scols].imag])
        return float(f), grad

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.objective(x)[1]

    def solve(self, x0: np.ndarray, max_iter: int = MAX_ITER, gtol: float = 1e-8, ftol: float = 1e-12):
        trace = [self.objective(x0)[0]]
        last = {}

        def fun(x):
            f, g = self.objective(x)
            last["f"] = f
            return f, g

        def record(xk):
            # L-BFGS-B evaluates the accepted iterate last
            trace.append(last["f"])

        res = minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": max_iter, "maxfun": 2 * max_iter, "gtol": gtol, "ftol": ftol, "maxcor": 30},
        )
        converged = bool(res.success) or np.linalg.norm(res.jac) < gtol
        if not converged and res.nit < max_iter and len(trace) >= 2:
            # line search stalls at round-off once the fit is exact; judge the
            # last step against the full NLL rather than the deviance
            scale = max(abs(self.nll(res.x)), 1.0)
            converged = abs(trace[-2] - trace[-1]) <= ftol * scale
        return res.x, int(res.nit), converged, trace


# -- state tomography ----------------------------------------------------------------


@dataclass(frozen=True)
class StateTomoResult:
    rho_hat: TwoPhotonState
    neg_log_likelihood: float
    iterations: int
    converged: bool
    nll_trace: tuple = field(default=(), repr=False, compare=False)


def linear_invert_state(
    counts: Sequence[float],
    rate_scale: float,
    analyzers: TomographicSet = TomographicSet(),
) -> TwoPhotonState:
    """Solve Tr[rho P_j] = n_j / rate_scale exactly; the result may be unphysical.

    Check ``is_physical()`` on the returned state before trusting it.
    """
    design = analyzers.design_matrix()
    if np.linalg.matrix_rank(design) < 16:
        raise ValueError("analyzer set is not informationally complete")
    v = np.linalg.solve(design, np.asarray(counts, dtype=float) / rate_scale)
    return TwoPhotonState(devectorize_matrix(v), Basis.COMPUTATIONAL, check=False)


def mle_state(
    counts: Sequence[float],
    rate_scale: float,
    analyzers: TomographicSet = TomographicSet(),
    likelihood: str = "poisson",
    max_iter: int = MAX_ITER,
) -> StateTomoResult:
    """Maximum-likelihood two-photon state for one row of analyzer counts.

    The trace is free, so a lossy output comes back sub-normalized.
    """
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    if counts.sum() == 0:
        warnings.warn("all counts are zero; returning the zero state", RuntimeWarning, stacklevel=2)
        return StateTomoResult(TwoPhotonState(np.zeros((4, 4))), 0.0, 0, True)
    problem = CholeskyPoissonProblem(analyzers.projectors, counts, rate_scale, likelihood)
    init = linear_invert_state(counts, rate_scale, analyzers).matrix
    x0 = t_to_params(psd_to_t(init, ridge=1e-3 * max(np.trace(init).real, 1e-12)))
    x, nit, converged, trace = problem.solve(x0, max_iter)
    t = params_to_t(x, 4)
    rho = t.conj().T @ t
    return StateTomoResult(
        TwoPhotonState(rho, check=False), problem.nll(x), nit, converged, tuple(trace)
    )


# -- process tomography -------------------------------------------------------------


@dataclass(frozen=True)
class ProcessTomoResult:
    m_hat: SuperMatrix
    choi_hat: ChoiMatrix
    neg_log_likelihood: float
    converged: bool
    iterations: int = 0
    normalization: str = "rate-scale"  # probabilities per generated pair
    nll_trace: tuple = field(default=(), repr=False, compare=False)

    def normalized(self) -> SuperMatrix:
        return normalize_superoperator(self.m_hat)


def process_operators(inputs: Sequence[str], analyzers: Sequence[str]) -> np.ndarray:
    """B_ij = P_j (x) rho_i^T so that Tr[E(rho_i) P_j] = Tr[C B_ij]."""
    rhos = [state_from_label(lab).matrix for lab in inputs]
    projs = [state_from_label(lab).matrix for lab in analyzers]
    return np.array([np.kron(p, r.T) for r in rhos for p in projs])


def _full_grid(record: CountRecord) -> CountRecord:
    missing = [lab for lab in TOMOGRAPHIC_LABELS if lab not in record.inputs]
    missing += [lab for lab in TOMOGRAPHIC_LABELS if lab not in record.analyzers]
    if missing:
        raise UnderdeterminedError(f"count grid lacks tomographic settings {missing}")
    cols = [record.analyzers.index(lab) for lab in TOMOGRAPHIC_LABELS]
    rows = [record.inputs.index(lab) for lab in TOMOGRAPHIC_LABELS]
    return CountRecord(record.counts[np.ix_(rows, cols)], record.rate_scale, record.seed)


def linear_invert_process(record: CountRecord) -> SuperMatrix:
    """Process matrix solving the noiseless rate equations exactly (may be non-CP)."""
    rec = _full_grid(record)
    tomo = TomographicSet()
    design = tomo.design_matrix()
    vin = np.array([vectorize_matrix(state_from_label(lab).matrix) for lab in tomo.labels]).T
    # counts^T / rate = design @ M @ vin
    m = np.linalg.solve(design, rec.counts.T / rec.rate_scale) @ np.linalg.inv(vin)
    return SuperMatrix(m, Basis.COMPUTATIONAL)


def mle_process(
    record: CountRecord,
    likelihood: str = "poisson",
    max_iter: int = MAX_ITER,
    enforce_trace_nonincreasing: bool = True,
) -> ProcessTomoResult:
    """Completely positive maximum-likelihood process from the 16 x 16 count grid.

    The estimate is expressed in rate_scale units (Tr_out C <= 1 is a
    transmission probability); call ``normalized()`` for the mixed-input
    convention.
    """
    rec = _full_grid(record)
    ops = process_operators(TOMOGRAPHIC_LABELS, TOMOGRAPHIC_LABELS)
    problem = CholeskyPoissonProblem(ops, rec.counts, rec.rate_scale, likelihood)
    init = matrix_to_choi(linear_invert_process(rec)).c
    x0 = t_to_params(psd_to_t(init, ridge=1e-4 * max(np.trace(init).real, 1e-12) / 16))
    x, nit, converged, trace = problem.solve(x0, max_iter)
    t = params_to_t(x, 16)
    choi = ChoiMatrix(t.conj().T @ t, Basis.COMPUTATIONAL)
    nll = problem.nll(x)
    if enforce_trace_nonincreasing:
        gain = choi.max_transmission()
        if gain > 1 + TNI_TOL:
            choi = ChoiMatrix(choi.c / gain, Basis.COMPUTATIONAL)
            nll = problem.nll(x / np.sqrt(gain))
    return ProcessTomoResult(choi_to_matrix(choi), choi, nll, converged, nit, "rate-scale", tuple(trace))


# -- bootstrap ----------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapEnsemble:
    replicas: tuple
    mean: np.ndarray
    std: np.ndarray
    seed: int
    n_failed: int = 0
    basis: Basis = Basis.BELL

    @property
    def unreliable(self) -> bool:
        return self.n_failed > 0.2 * (len(self.replicas) + self.n_failed)


def resample_counts(record: CountRecord, seed: int, replica: int) -> CountRecord:
    """Poisson-resample every cell around the observed count."""
    rng = np.random.default_rng([seed, replica])
    return CountRecord(rng.poisson(record.counts), record.rate_scale, seed, record.inputs, record.analyzers)


def _entries(result, basis: Basis) -> np.ndarray:
    if isinstance(result, ProcessTomoResult):
        return result.normalized().in_basis(basis).m
    rho = result.rho_hat.in_basis(basis).matrix
    return vectorize_matrix(rho / np.trace(rho).real)


def bootstrap(
    record: CountRecord,
    n_replicas: int = 100,
    seed: int = 0,
    reconstructor: Callable[[CountRecord], object] = mle_process,
    basis: Basis | str = Basis.BELL,
    n_jobs: int = 1,
) -> BootstrapEnsemble:
    """Error bars from reconstructions of Poisson-resampled datasets.

    For process results the statistics are over the normalized process
    matrix in ``basis``; for state results over the normalized RhoVector.
    Non-converged replicas are dropped and counted in ``n_failed``.
    """
    if n_replicas < 2:
        raise ValueError("need at least two bootstrap replicas")
    basis = Basis(basis)

    def one(k):
        return reconstructor(resample_counts(record, seed, k))

    if n_jobs == 1:
        results = [one(k) for k in range(n_replicas)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(one)(k) for k in range(n_replicas))
    good = tuple(r for r in results if r.converged)
    if len(good) < 2:
        raise RuntimeError(f"only {len(good)} of {n_replicas} bootstrap replicas converged")
    stack = np.array([_entries(r, basis) for r in good])
    return BootstrapEnsemble(good, stack.mean(axis=0), stack.std(axis=0, ddof=1), seed, n_replicas - len(good), basis)


# -- holdout validation ---------------------------------------------------------------


def predict_output(e: SuperMatrix, label: str) -> TwoPhotonState:
    """Normalized output predicted by a process for a product input such as ``"LL"``."""
    out = apply_matrix(e.in_basis(Basis.COMPUTATIONAL), state_from_label(label).matrix)
    return TwoPhotonState(out / np.trace(out).real, check=False)


def holdout_fidelities(result: ProcessTomoResult, record: CountRecord, labels: Sequence[str]) -> dict:
    """Fidelity between predicted and directly reconstructed outputs of held-out inputs."""
    from .metrics import fidelity_matrix

    out = {}
    for lab in labels:
        pred = predict_output(result.m_hat, lab).matrix
        direct = mle_state(record.row(lab), record.rate_scale).rho_hat.matrix
        if np.trace(direct).real <= 0:
            raise ValueError(f"held-out input {lab} produced no coincidences")
        out[lab] = fidelity_matrix(pred, direct / np.trace(direct).real)
    return out
