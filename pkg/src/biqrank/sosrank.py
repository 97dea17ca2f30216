"""SOS certification and SOS-rank search over the Gram space.

``certify_sos`` maximizes the smallest eigenvalue of M(gamma), a concave
function of gamma.  Restarted projected subgradient ascent gets close; a
log-barrier Newton phase then resolves optima that sit on the boundary of
the PSD cone, which subgradient steps approach far too slowly.  P is SOS
exactly when the optimum is >= 0.

``sos_rank_search`` alternates between the Gram space and the set of PSD
matrices of rank <= r, for increasing r.  The rank-capped set is not convex,
so projections can stall at a rank that is attainable; when every start
stalls, a least-squares fit of r bilinear factors is tried before moving on.
The first r that succeeds is an upper bound on the SOS rank, nothing more.  For simple forms of C4-free graphs the exact rank is the edge count,
and ``simple_rank_exact`` checks the orthogonality argument behind that.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    InvalidDecomposition,
    NotC4Free,
    NotCertified,
    NotSimpleForm,
    RankSearchFailed,
)
from .forms import BiquadraticForm, simple_form_from_graph
from .graphs import BipartiteGraph, is_c4_free
from .gram import (
    GramSpace,
    SosDecomposition,
    decomposition_from_psd_gram,
    gram_at,
    identity_decomposition,
    index_of,
    project_to_space,
    verify_decomposition,
)
from .numerics import eig_sym, lambda_min, psd_project_rank_capped


@dataclass(frozen=True)
class Tolerances:
    cert_tol: float = 1e-7
    cert_margin: float = 1e-4
    conv_tol: float = 1e-9
    psd_tol: float = 1e-8
    residual_tol: float = 1e-8
    ascent_iters: int = 5000
    projection_iters: int = 20000
    restarts: int = 8
    restart_sigma: float = 1.0
    perturb_sigma: float = 0.1
    factor_evals: int = 500
    seed: int = 42

    def to_json(self) -> dict:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


class Status(str, enum.Enum):
    SOS = "SOS"
    NOT_SOS = "NOT_SOS"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class SosCertificate:
    status: Status
    gamma_star: np.ndarray
    lambda_star: float
    witness: np.ndarray
    iterations: int
    converged: bool
    restart_values: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "lambda_star": self.lambda_star,
            "gamma": self.gamma_star.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _scale(space: GramSpace) -> float:
    return max(1.0, float(np.linalg.norm(space.M0)))


def subgradient_ascent(
    space: GramSpace,
    gamma0,
    max_iter: int = 5000,
    radius: float | None = None,
    patience: int = 10,
    min_step: float = 1e-10,
) -> tuple[np.ndarray, float, int, bool]:
    """Maximize lambda_min(M(gamma)) by projected subgradient ascent.

    Steps follow the normalized subgradient ``u^T H_q u`` (u a unit minimal
    eigenvector).  The step is halved, restarting from the best point, after
    ``patience`` steps without improvement; iterates are projected onto the
    ball of the given radius.  Returns ``(best_gamma, best_value,
    iterations, stalled)``; stalled means the step fell below ``min_step``
    (relative) or the subgradient vanished.
    """
    scale = _scale(space)
    if radius is None:
        radius = 1e3 * scale
    gamma = np.asarray(gamma0, dtype=float).copy()
    best_gamma = gamma.copy()
    best = -np.inf
    step = 0.5 * scale
    since = 0
    it = 0
    stalled = False
    while it < max_iter:
        it += 1
        lam, u = lambda_min(gram_at(space, gamma))
        if lam > best:
            best, best_gamma, since = lam, gamma.copy(), 0
        else:
            since += 1
        g = space.subgradient(u)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= 1e-14 * scale:
            stalled = True
            break
        if since >= patience:
            step *= 0.5
            since = 0
            gamma = best_gamma.copy()
            if step < min_step * scale:
                stalled = True
                break
            continue
        gamma = gamma + step * g / gnorm
        norm = np.linalg.norm(gamma)
        if norm > radius:
            gamma *= radius / norm
    return best_gamma, float(best), it, stalled


def _barrier_polish(
    space: GramSpace, gamma0: np.ndarray, gap_tol: float, max_newton: int = 400
) -> tuple[np.ndarray, int, bool]:
    """Follow the central path of max t s.t. M(gamma) - t I >= 0.

    Works on the form scaled to unit size.  Returns ``(gamma, newton_steps,
    converged)``; converged means the duality-gap estimate N * mu fell
    below ``gap_tol`` with the last centering step complete.
    """
    q = space.dim
    scale = _scale(space)
    if q == 0:
        return gamma0.copy(), 0, True
    n = space.M0.shape[0]
    m0 = space.M0 / scale
    basis = np.stack(space.basis)
    pl, mi = space.plus, space.minus

    def s_of(w):
        s = m0 + np.tensordot(w[:q], basis, axes=1)
        s[np.diag_indices(n)] -= w[q]
        return s

    def phi(w, mu):
        try:
            c = np.linalg.cholesky(s_of(w))
        except np.linalg.LinAlgError:
            return -np.inf
        return w[q] / mu + 2.0 * float(np.sum(np.log(np.diag(c))))

    lam0 = np.linalg.eigvalsh(m0 + np.tensordot(gamma0 / scale, basis, axes=1))[0]
    w = np.concatenate([gamma0 / scale, [lam0 - 1.0]])
    mu = 1.0 / n
    steps = 0
    converged = False
    while steps < max_newton:
        centred = False
        t_before = w[q]
        for _ in range(60):
            steps += 1
            wi = np.linalg.inv(s_of(w))
            wi = 0.5 * (wi + wi.T)
            grad = np.empty(q + 1)
            grad[:q] = 2.0 * (wi[pl[:, 0], pl[:, 1]] - wi[mi[:, 0], mi[:, 1]])
            grad[q] = 1.0 / mu - np.trace(wi)
            wb = wi @ basis  # (q, n, n)
            hess = np.empty((q + 1, q + 1))
            hess[:q, :q] = -np.einsum("aij,bji->ab", wb, wb)
            wi2 = wi @ wi
            hess[:q, q] = hess[q, :q] = 2.0 * (wi2[pl[:, 0], pl[:, 1]] - wi2[mi[:, 0], mi[:, 1]])
            hess[q, q] = -np.trace(wi2)
            try:
                d = np.linalg.solve(-hess, grad)
            except np.linalg.LinAlgError:
                d = np.linalg.lstsq(-hess, grad, rcond=None)[0]
            dec2 = float(grad @ d)
            if dec2 <= 1e-12 or not np.isfinite(dec2):
                centred = True
                break
            f0 = phi(w, mu)
            s = 1.0
            while s > 1e-12:
                if phi(w + s * d, mu) >= f0 + 0.25 * s * dec2:
                    break
                s *= 0.5
            else:
                centred = True
                break
            w = w + s * d
            if steps >= max_newton:
                break
        # at tiny mu round-off keeps the decrement from vanishing; a round
        # that no longer moves t is as good as centred
        settled = centred or abs(w[q] - t_before) <= gap_tol
        if settled and n * mu <= gap_tol:
            converged = True
            break
        if steps >= max_newton:
            break
        mu *= 0.1
    return w[:q] * scale, steps, converged


def certify_sos(form: BiquadraticForm, tol: Tolerances = DEFAULT_TOLERANCES) -> SosCertificate:
    """Decide SOS-ness by maximizing the smallest Gram eigenvalue.

    Restart 0 starts at gamma = 0 (the natural Gram matrix); the others at
    Gaussian points drawn from ``tol.seed``.  The best restart, chosen by
    value and then by restart index, is refined by the barrier phase.
    """
    space = GramSpace.of(form)
    scale = _scale(space)
    rng = np.random.default_rng(tol.seed)
    if not form.coeffs:
        zero = np.zeros(space.dim)
        return SosCertificate(Status.SOS, zero, 0.0, space.M0.copy(), 0, True, [0.0])

    starts = [np.zeros(space.dim)]
    for _ in range(max(0, tol.restarts - 1)):
        starts.append(rng.normal(0.0, tol.restart_sigma * scale, space.dim))
    # the iteration cap is a budget shared by all restarts
    per_restart = max(1, tol.ascent_iters // len(starts))
    runs = []
    iterations = 0
    for idx, g0 in enumerate(starts):
        g, val, its, stalled = subgradient_ascent(space, g0, max_iter=per_restart)
        iterations += its
        runs.append((val, idx, g, stalled))
    runs.sort(key=lambda r: (-r[0], r[1]))
    best_val, _, best_gamma, ascent_stalled = runs[0]

    gamma, newton_steps, polished = _barrier_polish(space, best_gamma, gap_tol=1e-2 * tol.cert_tol)
    iterations += newton_steps
    lam = lambda_min(gram_at(space, gamma))[0]
    if lam < best_val:
        gamma, lam = best_gamma, best_val
    converged = polished or ascent_stalled

    rel = lam / scale
    if rel >= -tol.cert_tol:
        status = Status.SOS
    elif rel <= -tol.cert_margin and converged:
        status = Status.NOT_SOS
    else:
        status = Status.INCONCLUSIVE
    return SosCertificate(
        status,
        gamma,
        float(lam),
        gram_at(space, gamma),
        iterations,
        converged,
        [r[0] for r in sorted(runs, key=lambda r: r[1])],
    )


@dataclass
class RankAttempt:
    rank: int
    restart: int
    converged: bool
    gap: float
    iterations: int
    method: str = "projection"


@dataclass
class RankSearchResult:
    r_upper: int
    r_lower: int | None
    gram: np.ndarray
    decomposition: SosDecomposition
    restarts_used: int
    residual: float
    attempts: list[RankAttempt] = field(default_factory=list)

    def failed_ranks(self) -> list[int]:
        """Ranks at which every restart failed to converge."""
        by_rank: dict[int, bool] = {}
        for a in self.attempts:
            by_rank[a.rank] = by_rank.get(a.rank, False) or a.converged
        return sorted(r for r, ok in by_rank.items() if not ok)


def _alternate(space: GramSpace, x0: np.ndarray, r: int, tol: Tolerances):
    """Alternating projections between the Gram space and rank-<=r PSD matrices."""
    target = tol.conv_tol
    x = x0
    window = 200
    history: list[float] = []
    y = x0
    gap = np.inf
    for it in range(1, tol.projection_iters + 1):
        y = psd_project_rank_capped(x, r)
        gap = float(np.linalg.norm(x - y))
        if gap <= target:
            return True, y, gap, it
        history.append(gap)
        if it >= 2 * window and gap > 0.9 * history[-window - 1]:
            # geometric progress too slow to reach the target within the cap
            remaining = tol.projection_iters - it
            rate = (gap / history[-window - 1]) ** (1.0 / window)
            if rate >= 1.0 or gap * rate ** remaining > target:
                return False, y, gap, it
        x = project_to_space(space, y)
    return False, y, gap, tol.projection_iters


def _monomial_map(space: GramSpace) -> np.ndarray:
    """0/1 matrix taking vec(X) to the monomial coefficients of z^T X z."""
    m, n = space.m, space.n
    mn = m * n
    rows = []
    for i in range(m):
        for k in range(i, m):
            for j in range(n):
                for l in range(j, n):
                    row = np.zeros(mn * mn)
                    for a, b, c, d in {(i, j, k, l), (k, j, i, l), (k, l, i, j), (i, l, k, j)}:
                        row[(a * n + b) * mn + (c * n + d)] = 1.0
                    rows.append(row)
    return np.array(rows)


def _factor_fit(
    lmap: np.ndarray, target: np.ndarray, c0: np.ndarray, max_nfev: int
) -> tuple[np.ndarray, float]:
    """Least-squares fit of C (r x mn) so that z^T C^T C z matches the form.

    Returns the fitted C and the largest monomial residual.
    """
    r, mn = c0.shape
    l3 = lmap.reshape(-1, mn, mn)
    ls = l3 + l3.transpose(0, 2, 1)

    def fun(x):
        c = x.reshape(r, mn)
        return lmap @ (c.T @ c).ravel() - target

    def jac(x):
        c = x.reshape(r, mn)
        return np.einsum("kab,pb->kpa", ls, c).reshape(len(target), r * mn)

    out = least_squares(fun, c0.ravel(), jac=jac, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return out.x.reshape(r, mn), float(np.max(np.abs(out.fun)))


def block_rank_bound(form: BiquadraticForm) -> int:
    """Lower bound on the rank of any Gram matrix of P.

    The blocks of entries ((i,j),(i,l)) and ((i,j),(k,j)) are the same in
    every Gram matrix (the nullity directions never touch them), and a
    principal submatrix cannot exceed the rank of the whole.
    """
    m0 = GramSpace.of(form).M0
    m, n = form.m, form.n
    best = 0
    for i in range(1, m + 1):
        idx = [index_of(i, j, m, n) for j in range(1, n + 1)]
        best = max(best, _rank(m0[np.ix_(idx, idx)]))
    for j in range(1, n + 1):
        idx = [index_of(i, j, m, n) for i in range(1, m + 1)]
        best = max(best, _rank(m0[np.ix_(idx, idx)]))
    return best


def _rank(block: np.ndarray, tol: float = 1e-9) -> int:
    w = eig_sym(block).values
    if w.size == 0:
        return 0
    return int(np.count_nonzero(np.abs(w) > tol * max(1.0, float(np.max(np.abs(w))))))


def _c4_free_support(form: BiquadraticForm) -> BipartiteGraph | None:
    if not form.is_simple():
        return None
    g = BipartiteGraph(form.m, form.n, frozenset(form.support_edges()))
    return g if is_c4_free(g) else None


def sos_rank_search(
    form: BiquadraticForm,
    r_min: int | None = None,
    r_max: int | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    certificate: SosCertificate | None = None,
) -> RankSearchResult:
    """Smallest rank cap r for which alternating projections converge.

    Every restart for rank r is tried before moving to r + 1.  Starting
    points are the certificate witness and Gaussian perturbations of its
    gamma.
    """
    if certificate is None:
        certificate = certify_sos(form, tol)
    if certificate.status is not Status.SOS:
        raise NotCertified(f"form is {certificate.status.value}, not certified SOS")
    space = GramSpace.of(form)
    mn = form.m * form.n
    graph = _c4_free_support(form)
    r_lower = len(graph.edges) if graph is not None else None
    if not form.coeffs:
        empty = SosDecomposition(form.m, form.n, [])
        return RankSearchResult(0, 0 if r_lower is not None else None, space.M0.copy(), empty, 0, 0.0)
    if r_min is None:
        r_min = r_lower if r_lower is not None else max(1, block_rank_bound(form))
    if r_max is None:
        r_max = mn
    if not 1 <= r_min <= r_max <= mn:
        raise ValueError(f"need 1 <= r_min <= r_max <= {mn}, got {r_min}, {r_max}")

    rng = np.random.default_rng(tol.seed)
    scale = _scale(space)
    starts = [certificate.witness]
    for _ in range(max(0, tol.restarts - 1)):
        g = certificate.gamma_star + rng.normal(0.0, tol.perturb_sigma * scale, space.dim)
        starts.append(gram_at(space, g))
    lmap = _monomial_map(space)
    target = lmap @ space.M0.ravel()

    attempts: list[RankAttempt] = []

    def accept(y, attempt):
        attempts.append(attempt)
        if not attempt.converged:
            return None
        dec = decomposition_from_psd_gram(y, form.m, form.n, tol.psd_tol)
        residual = verify_decomposition(form, dec)
        if residual > tol.residual_tol:
            attempt.converged = False
            return None
        return dec, residual

    for r in range(r_min, r_max + 1):
        endpoints = []
        for idx, x0 in enumerate(starts):
            ok, y, gap, its = _alternate(space, x0, r, tol)
            endpoints.append(y)
            got = accept(y, RankAttempt(r, idx, ok, gap, its))
            if got:
                return RankSearchResult(r, r_lower, y, got[0], idx + 1, got[1], attempts)
        # projections stalled: refine rank-r factors of their endpoints, and of
        # random factors, directly against the monomial equations
        for idx, y in enumerate(endpoints):
            if idx % 2:
                c0 = rng.normal(0.0, np.sqrt(scale / r), (r, mn))
            else:
                ed = eig_sym(y)
                c0 = (ed.vectors[:, :r] * np.sqrt(np.maximum(ed.values[:r], 0.0))).T
            c, resid = _factor_fit(lmap, target, c0, max_nfev=tol.factor_evals)
            y = c.T @ c
            ok = resid <= tol.conv_tol
            got = accept(y, RankAttempt(r, len(starts) + idx, ok, resid, 0, "factorization"))
            if got:
                return RankSearchResult(r, r_lower, y, got[0], len(starts) + idx + 1, got[1], attempts)
    raise RankSearchFailed(f"no rank cap in [{r_min}, {r_max}] converged")


def edge_vectors(dec: SosDecomposition) -> np.ndarray:
    """v[i, j] = (C_1[i, j], ..., C_r[i, j]) as an (m, n, r) array."""
    return np.moveaxis(dec.stacked(), 0, -1)


def check_cycle_condition(form: BiquadraticForm, dec: SosDecomposition, tol: float = 1e-8) -> float:
    """Largest violation of v_ij.v_kl + v_il.v_kj = 2 a_ijkl over mixed monomials.

    For i != k and j != l the right side is half the coefficient of
    x_i x_k y_j y_l; for a simple form it is zero everywhere off the
    diagonal monomials.
    """
    if verify_decomposition(form, dec) > tol:
        raise InvalidDecomposition("decomposition does not reconstruct the form")
    v = edge_vectors(dec)
    a = form.tensor()
    m, n = form.m, form.n
    worst = 0.0
    for i in range(m):
        for k in range(i, m):
            for j in range(n):
                for l in range(j, n):
                    if i == k and j == l:
                        continue
                    lhs = float(v[i, j] @ v[k, l] + v[i, l] @ v[k, j])
                    worst = max(worst, abs(lhs - 2.0 * a[i, j, k, l]))
    return worst


def orthogonality_rank_lower(form: BiquadraticForm, dec: SosDecomposition, tol: float = 1e-8) -> int:
    """Number of terms any decomposition of a C4-free simple form must have.

    Checks, on ``dec``, that v_ij has squared norm equal to the coefficient
    of x_i^2 y_j^2 (so zero off the support) and that the support vectors
    are pairwise orthogonal, then returns the support size.
    """
    if not form.is_simple():
        raise NotSimpleForm("form has terms other than positive x_i^2 y_j^2")
    graph = BipartiteGraph(form.m, form.n, frozenset(form.support_edges()))
    if not is_c4_free(graph):
        raise NotC4Free("support graph has a 4-cycle; orthogonality argument does not apply")
    if verify_decomposition(form, dec) > tol:
        raise InvalidDecomposition("decomposition does not reconstruct the form")
    v = edge_vectors(dec)
    a = form.tensor()
    for i in range(form.m):
        for j in range(form.n):
            if abs(float(v[i, j] @ v[i, j]) - a[i, j, i, j]) > tol:
                raise InvalidDecomposition(f"|v_{i + 1}{j + 1}|^2 does not match its coefficient")
    edges = sorted(graph.edges)
    for p, (i, j) in enumerate(edges):
        for k, l in edges[p + 1 :]:
            if abs(float(v[i - 1, j - 1] @ v[k - 1, l - 1])) > tol:
                raise InvalidDecomposition(f"v_{i}{j} and v_{k}{l} are not orthogonal")
    return len(edges)


def simple_rank_exact(graph: BipartiteGraph) -> int:
    """SOS rank of P_G for a C4-free graph: the number of edges."""
    if not is_c4_free(graph):
        raise NotC4Free("graph has a 4-cycle; exact rank is not known from the edge count")
    form = simple_form_from_graph(graph)
    dec = identity_decomposition(form)
    if check_cycle_condition(form, dec) > 1e-12:
        raise InvalidDecomposition("identity decomposition violates the cycle condition")
    lower = orthogonality_rank_lower(form, dec)
    if lower != len(dec):
        raise InvalidDecomposition("orthogonality bound does not meet the identity decomposition")
    return len(graph.edges)
