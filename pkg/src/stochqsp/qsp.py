"""Single-qubit quantum signal processing in the Wx convention.

U_phi(x) = S(phi_0) prod_{i=1}^{d} W(x) S(phi_i), with the signal rotation
W(x) = [[x, i s], [i s, x]], s = sqrt(1 - x^2), and S(phi) = exp(i phi Z).
The top-left entry is P(x) and the top-right entry is i Q(x) s.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.fft import dct
from scipy.optimize import least_squares

from .chebyshev import Basis, Parity, chebyshev_grid, eval_series
from .errors import ArgumentError, DomainError, SolverError

MAX_SOLVER_DEGREE = 40
DEFAULT_RESTARTS = 32


def reduce_phases(phases):
    """Map angles into (-pi, pi]."""
    r = np.mod(np.asarray(phases, dtype=float) + np.pi, 2 * np.pi) - np.pi
    r[r <= -np.pi] = np.pi
    return r


@dataclass(frozen=True)
class QspPhases:
    phases: np.ndarray

    def __post_init__(self):
        ph = reduce_phases(np.atleast_1d(self.phases).reshape(-1))
        if ph.size == 0:
            raise ArgumentError("need at least one phase")
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    @property
    def degree(self):
        return self.phases.size - 1

    def to_list(self):
        return [float(p) for p in self.phases]


def _as_phases(p):
    return p if isinstance(p, QspPhases) else QspPhases(np.asarray(p, dtype=float))


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("signal value outside [-1, 1]")
    return x


def signal_op(x):
    x = float(_check_x(x))
    s = math.sqrt(max(0.0, 1.0 - x * x))
    return np.array([[x, 1j * s], [1j * s, x]])


def processing_op(phi):
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def qsp_unitary_batch(p, x):
    """Stack of QSP unitaries, shape (len(x), 2, 2)."""
    ph = _as_phases(p).phases
    x = np.atleast_1d(_check_x(x))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    w = np.empty(x.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = x
    w[..., 1, 1] = x
    w[..., 0, 1] = 1j * s
    w[..., 1, 0] = 1j * s
    e = np.exp(1j * ph)
    m = np.zeros(x.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = e[0]
    m[..., 1, 1] = np.conj(e[0])
    for k in range(1, ph.size):
        m = m @ w
        m[..., :, 0] *= e[k]
        m[..., :, 1] *= np.conj(e[k])
    return m


def qsp_unitary(p, x):
    """The 2x2 QSP unitary at a single signal value x."""
    return qsp_unitary_batch(p, np.array([float(_check_x(x))]))[0]


def extract_poly(p, grid):
    """P(x) = <0|U_phi(x)|0> on the grid (complex)."""
    grid = np.asarray(grid, dtype=float)
    out = qsp_unitary_batch(p, grid.reshape(-1))[:, 0, 0]
    return out.reshape(grid.shape)


def extract_q(p, grid):
    """Q(x) from the top-right entry i Q(x) sqrt(1 - x^2); grid must avoid x = +-1."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    s = np.sqrt(1.0 - grid * grid)
    if np.any(s == 0.0):
        raise DomainError("Q cannot be read off at x = +-1")
    return qsp_unitary_batch(p, grid)[:, 0, 1] / (1j * s)


def plus_frame_batch(p, x):
    """Unitaries H S(pi/4) U_phi S(-pi/4) H.

    For symmetric phases the top-left entry of these is exactly Re P(x):
    the gauge shift makes the complementary entry purely imaginary, and
    the Hadamard change of frame then cancels Im P from the <0|.|0> block.
    """
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2.0)
    u = qsp_unitary_batch(p, x)
    left = h @ processing_op(math.pi / 4)
    right = processing_op(-math.pi / 4) @ h
    return left @ u @ right


def plus_frame_column(p, x):
    """(top, bottom) of the first column of plus_frame_batch: (Re P, Q-part)."""
    m = plus_frame_batch(p, x)
    return m[:, 0, 0], m[:, 1, 0]


def _cheb_coeffs_from_values(vals, m):
    c = dct(vals, type=2) / m
    c[0] *= 0.5
    return c


@dataclass(frozen=True)
class ConditionReport:
    degree_violation: float
    parity_violation: float
    normalization_violation: float

    def ok(self, tol=1e-9):
        return max(self.degree_violation, self.parity_violation,
                   self.normalization_violation) <= tol


def verify_conditions(p, unitary_fn=None, n_check=101):
    """Maximum violation of each structural QSP condition.

    1. deg P <= d and deg Q <= d - 1;
    2. P has parity d mod 2 and Q parity (d - 1) mod 2;
    3. |P|^2 + (1 - x^2)|Q|^2 = 1.
    Degree and parity are read from Chebyshev interpolants of Re/Im P and Q.
    ``unitary_fn`` overrides the matrix source (used for negative controls).
    """
    p = _as_phases(p)
    d = p.degree
    fn = (lambda x: qsp_unitary_batch(p, x)) if unitary_fn is None else unitary_fn
    m = max(2 * (d + 1), 64)
    k = np.arange(m)
    nodes = np.cos(np.pi * (k + 0.5) / m)
    u = fn(nodes)
    s = np.sqrt(1.0 - nodes * nodes)
    pv = u[:, 0, 0]
    qv = u[:, 0, 1] / (1j * s)
    deg_viol = 0.0
    par_viol = 0.0
    for vals, top, parity in ((pv, d, d % 2), (qv, d - 1, (d - 1) % 2)):
        for part in (vals.real, vals.imag):
            c = _cheb_coeffs_from_values(part, m)
            if top < 0:
                deg_viol = max(deg_viol, float(np.max(np.abs(c))))
                continue
            deg_viol = max(deg_viol, float(np.max(np.abs(c[top + 1:]), initial=0.0)))
            wrong = c[: top + 1][(np.arange(top + 1) % 2) != parity]
            par_viol = max(par_viol, float(np.max(np.abs(wrong), initial=0.0)))
    kk = np.arange(n_check)
    xs = np.cos(np.pi * (kk + 0.5) / n_check)
    u = fn(xs)
    norm = np.abs(u[:, 0, 0]) ** 2 + np.abs(u[:, 0, 1]) ** 2
    return ConditionReport(deg_viol, par_viol, float(np.max(np.abs(norm - 1.0))))


def _expand_symmetric(h, d):
    if d % 2:
        return np.concatenate([h, h[::-1]])
    return np.concatenate([h, h[-2::-1]])


def _as_chebyshev(target):
    if target.basis is Basis.CHEBYSHEV:
        return np.array(target.coeffs)
    return npcheb.poly2cheb(np.array(target.coeffs))


def solver_nodes(d):
    dt = (d + 2) // 2
    k = np.arange(1, dt + 1)
    return np.cos((2 * k - 1) * np.pi / (4 * dt))


def _re_p_jacobian(phases, x, n_free):
    """d Re P / d h for the symmetric parameters h (analytic, via prefix/suffix products)."""
    d = phases.size - 1
    x = np.atleast_1d(x)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    w = np.empty(x.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = x
    w[..., 1, 1] = x
    w[..., 0, 1] = 1j * s
    w[..., 1, 0] = 1j * s
    e = np.exp(1j * phases)

    def sop(k):
        return np.array([e[k], np.conj(e[k])])

    # left[k] = S(phi_0) W ... W (ends just before S(phi_k)); right[k] = W S(phi_{k+1}) ... S(phi_d)
    left = [None] * (d + 1)
    cur = np.broadcast_to(np.eye(2, dtype=complex), x.shape + (2, 2)).copy()
    for k in range(d + 1):
        if k > 0:
            cur = cur @ w
        left[k] = cur
        cur = cur * sop(k)[None, :]
    right = [None] * (d + 1)
    cur = np.broadcast_to(np.eye(2, dtype=complex), x.shape + (2, 2)).copy()
    for k in range(d, -1, -1):
        right[k] = cur
        cur = (w @ (sop(k)[:, None] * cur)) if k > 0 else cur
    grads = np.empty((x.size, d + 1))
    z = np.array([1j, -1j])
    for k in range(d + 1):
        mid = (z * sop(k))[:, None] * right[k]
        grads[:, k] = (left[k] @ mid)[:, 0, 0].real
    jac = np.zeros((x.size, n_free))
    for k in range(d + 1):
        jac[:, min(k, d - k)] += grads[:, k]
    return jac


def find_phases(target, tol=1e-8, max_restarts=DEFAULT_RESTARTS, seed=0):
    """Symmetric phases whose Re P matches a real definite-parity target.

    Solves the node residuals Re P_phi(x_k) - f(x_k) = 0 at the positive
    Chebyshev nodes with a trust-region Gauss-Newton method, starting from
    pi/4 at both ends and zero inside, then from random restarts.
    """
    if target.parity is Parity.INDEFINITE:
        raise ArgumentError("target must have definite parity; split it into even and odd parts")
    c = _as_chebyshev(target)
    nz = np.nonzero(c)[0]
    d = int(nz[-1]) if nz.size else 0
    if target.parity is Parity.ODD and d == 0:
        d = 1
    if d % 2 != (1 if target.parity is Parity.ODD else 0):
        d += 1
    if d > MAX_SOLVER_DEGREE:
        raise ArgumentError(f"target degree {d} exceeds solver cap {MAX_SOLVER_DEGREE}")
    c = np.pad(c[: d + 1], (0, max(0, d + 1 - c.size)))
    if abs(c[d]) == 1.0 and not np.any(c[:d]):
        # +-T_d is realised exactly by zero phases, with S(pi) = -I for the sign
        phases = np.zeros(d + 1)
        phases[0] = 0.0 if c[d] > 0 else math.pi
        return QspPhases(phases)
    grid = chebyshev_grid(2001)
    peak = float(np.max(np.abs(npcheb.chebval(grid, c))))
    if peak >= 1.0 - 1e-8:
        raise ArgumentError(f"target max-norm {peak:.12g} is not below 1; rescale it first")
    if d == 0:
        return QspPhases(np.array([math.acos(c[0])]))

    nodes = solver_nodes(d)
    f = npcheb.chebval(nodes, c)
    check_nodes = np.cos(np.pi * (np.arange(d + 1) + 0.5) / (d + 1))
    f_check = npcheb.chebval(check_nodes, c)

    def resid(h):
        return extract_poly(_expand_symmetric(h, d), nodes).real - f

    def jac(h):
        return _re_p_jacobian(_expand_symmetric(h, d), nodes, h.size)

    n_free = nodes.size
    h0 = np.zeros(n_free)
    h0[0] = math.pi / 4
    rng = np.random.default_rng(seed)
    best, best_err = None, math.inf
    for attempt in range(max_restarts + 1):
        start = h0 if attempt == 0 else h0 + rng.uniform(-math.pi / 2, math.pi / 2, n_free)
        sol = least_squares(resid, start, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * (n_free + 1))
        phases = _expand_symmetric(sol.x, d)
        err = float(np.max(np.abs(extract_poly(phases, check_nodes).real - f_check)))
        if err < best_err:
            best, best_err = phases, err
        if err <= tol:
            return QspPhases(phases)
    raise SolverError(f"no phases within {tol:g} after {max_restarts} restarts "
                      f"(best {best_err:.3g})", best_phases=best, residual=best_err)


def _column_jacobian(phases, x):
    """d(first plus-frame column)/d(phi_k) for every phase, shape (len(x), 2, d+1).

    U = A_k B_k with A_k ending in S(phi_k), and dS/dphi = iZ S, so
    dU/dphi_k = A_k (iZ) B_k.
    """
    ph = np.asarray(phases, dtype=float)
    n = ph.size
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    w = np.empty(x.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = x
    w[..., 1, 1] = x
    w[..., 0, 1] = 1j * s
    w[..., 1, 0] = 1j * s
    sm = [processing_op(p) for p in ph]
    pre = [np.broadcast_to(sm[0], x.shape + (2, 2))]
    for k in range(1, n):
        pre.append(pre[-1] @ w @ sm[k])
    suf = [None] * n
    suf[n - 1] = np.broadcast_to(np.eye(2, dtype=complex), x.shape + (2, 2))
    for k in range(n - 2, -1, -1):
        suf[k] = w @ sm[k + 1] @ suf[k + 1]
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2.0)
    left = h @ processing_op(math.pi / 4)
    right_col = (processing_op(-math.pi / 4) @ h)[:, 0]
    iz = np.diag([1j, -1j])
    out = np.empty(x.shape + (2, n), dtype=complex)
    for k in range(n):
        out[..., k] = left @ (pre[k] @ iz @ suf[k]) @ right_col
    return out


def fit_column(target, bottom, interval=(-1.0, 1.0), n_nodes=48, warm=None, restarts=8,
               seed=0):
    """General (non-symmetric) phases whose plus-frame first column approximates
    (target(x), bottom(x)) on Chebyshev nodes of ``interval``.

    Used for completion-aware realisations, where the complementary entry
    matters as well as Re P. There is usually no exact solution, so the best
    least-squares fit is returned as (QspPhases, max abs residual).
    """
    lo, hi = interval
    if not -1.0 <= lo < hi <= 1.0:
        raise ArgumentError(f"interval {interval} must lie inside [-1, 1]")
    k = np.arange(n_nodes)
    xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * (k + 0.5) / n_nodes)
    top_t = eval_series(target, xs)
    bot_t = np.asarray(bottom(xs), dtype=complex)
    nz = np.nonzero(target.coeffs)[0]
    d = int(nz[-1]) if nz.size else 0
    if target.parity is Parity.ODD and d % 2 == 0:
        d += 1
    if target.parity is Parity.EVEN and d % 2 == 1:
        d += 1

    def resid(ph):
        top, bot = plus_frame_column(ph, xs)
        return np.concatenate([top.real - top_t, top.imag, bot.real - bot_t.real,
                               bot.imag - bot_t.imag])

    def jac(ph):
        j = _column_jacobian(ph, xs)
        return np.concatenate([j[:, 0].real, j[:, 0].imag, j[:, 1].real, j[:, 1].imag])

    rng = np.random.default_rng(seed)
    starts = [] if warm is None else [np.asarray(warm, dtype=float)]
    starts += [rng.uniform(-math.pi, math.pi, d + 1) for _ in range(restarts)]
    best, best_err = None, math.inf
    for x0 in starts:
        if x0.size != d + 1:
            continue
        sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=200 * (d + 2))
        err = float(np.max(np.abs(sol.fun)))
        if err < best_err:
            best, best_err = sol.x, err
    return QspPhases(best), best_err


def round_trip_error(p, target, grid=None):
    """max |Re P_phi(x) - target(x)| over a dense grid."""
    grid = chebyshev_grid(2001) if grid is None else grid
    return float(np.max(np.abs(extract_poly(p, grid).real - eval_series(target, grid))))


def solve_target(target, tol=1e-8, seed=0):
    """Phases for a possibly indefinite target, one set per definite-parity part.

    Returns a list of (part, phases); the parts add up to the target.
    """
    if target.parity is not Parity.INDEFINITE:
        return [(target, find_phases(target, tol=tol, seed=seed))]
    c = np.array(target.coeffs)
    even, odd = c.copy(), c.copy()
    even[1::2] = 0.0
    odd[0::2] = 0.0
    out = []
    for part, parity in ((even, Parity.EVEN), (odd, Parity.ODD)):
        if np.any(part != 0.0):
            s = target.with_coeffs(part, parity=parity)
            out.append((s, find_phases(s, tol=tol, seed=seed)))
    return out
