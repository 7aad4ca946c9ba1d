"""Dense-matrix simulation of polynomial ensembles acting on Hermitian operators.

Channel distances are measured with normalised Choi matrices: half the trace
norm of the Choi difference lower-bounds the diamond distance, so every
lemma bound a^2 + 2b (or a^2 + 2b||S||) can be checked without an SDP.
"""

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chebyshev import Basis, Parity, chebyshev_grid, eval_series, truncate
from .ensemble import sample
from .errors import ArgumentError, DomainError, PrecisionError
from .qsp import QspPhases, find_phases, fit_column, plus_frame_column

MAX_DIM = 64
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HermitianOperator:
    matrix: np.ndarray
    eigvals: np.ndarray = field(repr=False)
    eigvecs: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, a):
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ArgumentError("operator must be a square matrix of size >= 2")
        if a.shape[0] > MAX_DIM:
            raise ArgumentError(f"dimension {a.shape[0]} exceeds cap {MAX_DIM}")
        if np.max(np.abs(a - a.conj().T)) > 1e-13:
            raise ArgumentError("operator is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        w, v = np.linalg.eigh(a)
        if np.max(np.abs(w)) > 1.0 + 1e-12:
            raise DomainError(f"spectral norm {np.max(np.abs(w)):.15g} exceeds 1")
        return cls(a, np.clip(w, -1.0, 1.0), v)


def random_unitary(dim, rng):
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim, seed, spectrum_range=(-1.0, 1.0)):
    """V diag(lambda) V^dag with lambda uniform in the range and V from QR of a Gaussian."""
    lo, hi = spectrum_range
    if not -1.0 <= lo <= hi <= 1.0:
        raise ArgumentError(f"spectrum range {spectrum_range} is empty or leaves [-1, 1]")
    if dim < 2:
        raise ArgumentError("dim must be >= 2")
    rng = np.random.default_rng(seed)
    lam = rng.uniform(lo, hi, dim)
    v = random_unitary(dim, rng)
    a = (v * lam) @ v.conj().T
    return HermitianOperator.from_matrix(0.5 * (a + a.conj().T))


def random_density(dim, seed, rank=None):
    rng = np.random.default_rng(seed)
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def maximally_mixed(dim):
    return np.eye(dim, dtype=complex) / dim


def _sqrtm_psd(h):
    w, v = np.linalg.eigh(h)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


@dataclass(frozen=True)
class BlockEncoding:
    unitary: np.ndarray
    dim: int

    def block(self, ket=None):
        """(<k| x I) U (|k> x I) for an ancilla ket, default |0>."""
        return project_block(self.unitary, self.dim, ket)


def project_block(u, dim, ket=None):
    k = np.array([1.0, 0.0]) if ket is None else np.asarray(ket, dtype=complex)
    k = k / np.linalg.norm(k)
    u4 = u.reshape(2, dim, 2, dim)
    return np.einsum("a,aibj,b->ij", k.conj(), u4, k)


def block_encode(a):
    """Reflection completion [[A, sqrt(I - A^2)], [sqrt(I - A^2), -A]]."""
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    m = a.matrix
    s = _sqrtm_psd(np.eye(a.dim) - m @ m)
    u = np.block([[m, s], [s, -m]])
    return BlockEncoding(u, a.dim)


def spectral_norm(m):
    return float(np.linalg.norm(m, 2))


def apply_poly(a, s, check=True):
    """P(A) by matrix Clenshaw (Horner for the stretched basis), cross-checked against
    the eigendecomposition route."""
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    m = a.matrix
    eye = np.eye(a.dim, dtype=complex)
    c = s.coeffs
    if s.basis is Basis.CHEBYSHEV:
        b1 = np.zeros_like(m)
        b2 = np.zeros_like(m)
        for cn in c[:0:-1]:
            b1, b2 = 2.0 * (m @ b1) - b2 + cn * eye, b1
        out = m @ b1 - b2 + c[0] * eye
    else:
        out = np.zeros_like(m)
        for cn in c[::-1]:
            out = m @ out + cn * eye
    if check:
        ref = eigen_apply(a, s)
        err = spectral_norm(out - ref)
        limit = 1e-9 * max(1.0, float(np.abs(c).sum()))
        if err > limit:
            raise PrecisionError(f"Clenshaw and eigen paths disagree by {err:.3g}")
    return out


def eigen_apply(a, s):
    vals = eval_series(s, a.eigvals)
    return (a.eigvecs * vals) @ a.eigvecs.conj().T


def eigen_function(a, values):
    return (a.eigvecs * values) @ a.eigvecs.conj().T


def qsp_operator(phases, a, frame="zero"):
    """Operator-level QSP unitary built from block_encode(A).

    The reflection R of block_encode and the x-rotation W(A) are related by
    W = -i S(3pi/4) R S(-pi/4) (S acting on the ancilla), which is how the
    scalar sequence is lifted. ``frame="plus"`` conjugates into the frame
    whose |0> block is Re P(A).
    """
    ph = np.asarray(phases.phases if isinstance(phases, QspPhases) else phases, dtype=float)
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    dim = a.dim
    r = block_encode(a).unitary
    eye = np.eye(dim)

    def s_op(phi):
        return np.kron(np.diag([np.exp(1j * phi), np.exp(-1j * phi)]), eye)

    w = -1j * s_op(3 * math.pi / 4) @ r @ s_op(-math.pi / 4)
    u = s_op(ph[0])
    for phi in ph[1:]:
        u = u @ w @ s_op(phi)
    if frame == "plus":
        h = np.kron(np.array([[1, 1], [1, -1]]) / math.sqrt(2), eye)
        u = h @ s_op(math.pi / 4) @ u @ s_op(-math.pi / 4) @ h
    elif frame != "zero":
        raise ArgumentError(f"unknown frame {frame!r}")
    return u


def choi(ops, probs=None):
    """Normalised Choi matrix sum_j p_j |K_j>><<K_j| / d_in of a Kraus-like family."""
    ops = [np.asarray(k, dtype=complex) for k in ops]
    probs = np.ones(len(ops)) if probs is None else np.asarray(probs, dtype=float)
    d_in = ops[0].shape[1]
    vecs = np.stack([k.reshape(-1) for k in ops])
    return (vecs.T * probs) @ vecs.conj() / d_in


def trace_norm_hermitian(h):
    return float(np.abs(np.linalg.eigvalsh(0.5 * (h + h.conj().T))).sum())


def choi_distance(ops1, probs1, ops2, probs2=None):
    """Half the trace norm of the normalised Choi difference (a diamond lower bound)."""
    return 0.5 * trace_norm_hermitian(choi(ops1, probs1) - choi(ops2, probs2))


def conjugation_distance(a, b):
    return choi_distance([a], [1.0], [b], [1.0])


def mixture_spectral_upper(ops, probs, target):
    """sum_j p_j ||R_j - S|| (||R_j|| + ||S||) / 2, an upper bound from spectral norms."""
    ns = spectral_norm(target)
    return float(sum(p * spectral_norm(r - target) * (spectral_norm(r) + ns) / 2
                     for r, p in zip(ops, probs)))


@dataclass
class ChannelReport:
    a: float
    b: float
    mixing_bound: float
    measured: float
    bound_satisfied: bool
    mode: str = "operator"
    norm_s: float = 1.0
    spectral_upper: float = float("nan")
    fallback: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def validate_mixing_lemma(ops, probs, target, mode="operator", ket=None, dim=None):
    """Check a mixture of R_j (or U_j) against the target channel.

    modes
      unitary   all inputs unitary, bound a^2 + 2b
      operator  arbitrary R_j and S, bound a^2 + 2b||S||
      block     U_j and V are block encodings; the projected channels with
                ancilla ket ``ket`` (default |0>) are compared, bound a^2 + 2b
    """
    ops = [np.asarray(o, dtype=complex) for o in ops]
    probs = np.asarray(probs, dtype=float)
    target = np.asarray(target, dtype=complex)
    if len(ops) != probs.size or len(ops) == 0:
        raise ArgumentError("need one probability per operator")
    if any(o.shape != target.shape for o in ops):
        raise ArgumentError("dimension mismatch between ensemble and target")
    if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
        raise ArgumentError("probabilities must be nonnegative and sum to 1")
    if mode == "unitary":
        for u in ops + [target]:
            if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-10:
                raise ArgumentError("unitary mode needs unitary inputs")
    elif mode == "block":
        n = target.shape[0]
        if n % 2:
            raise ArgumentError("block encodings must have even size")
        dim = n // 2 if dim is None else dim
        ops = [project_block(u, dim, ket) for u in ops]
        target = project_block(target, dim, ket)
    elif mode != "operator":
        raise ArgumentError(f"unknown mode {mode!r}")
    a = max(spectral_norm(r - target) for r in ops)
    mean = sum(p * r for r, p in zip(ops, probs))
    b = spectral_norm(mean - target)
    norm_s = spectral_norm(target)
    bound = a * a + 2 * b * (norm_s if mode == "operator" else 1.0)
    measured = choi_distance(ops, probs, [target], [1.0])
    return ChannelReport(a, b, bound, measured, measured <= 0.5 * bound + 1e-9, mode, norm_s,
                         mixture_spectral_upper(ops, probs, target))


def _members(e):
    return [(p, poly) for p, poly in e.members()]


def mixing_inputs(e, a):
    """a = max_j ||P_j(A) - S||, b = ||sum_j p_j P_j(A) - S|| with S = F(A).

    S uses the full stored source; ``tail`` is the envelope bound on what
    lies beyond it. Returns (a, b, S, tail).
    """
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    s = apply_poly(a, e.source)
    mats = [(p, apply_poly(a, poly)) for p, poly in _members(e)]
    a_err = max(spectral_norm(m - s) for _, m in mats)
    b_err = spectral_norm(sum(p * m for p, m in mats) - s)
    tail = e.model.tail_bound(e.source.degree)
    if not e.degenerate:
        assert a_err <= 2 * math.sqrt(e.epsilon) + tail + 1e-9, "individual error exceeds 2 sqrt(eps)"
        assert b_err <= e.epsilon + tail + 1e-9, "mean error exceeds eps"
    return a_err, b_err, s, tail


def _check_state(rho):
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise ArgumentError("state must have unit trace")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -1e-12:
        raise ArgumentError("state must be positive semidefinite")
    return rho


def exact_mixture_channel(e, a, rho):
    """sum_j p_j P_j(A) rho P_j(A)^dag."""
    rho = _check_state(rho)
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    out = np.zeros_like(rho)
    for p, poly in _members(e):
        m = apply_poly(a, poly)
        out += p * (m @ rho @ m.conj().T)
    return out


def target_channel(e, a, rho):
    s = apply_poly(a, e.source)
    return s @ _check_state(rho) @ s.conj().T


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def shard_seed(master, k):
    """Seed of shard k: splitmix64 of (master + k * golden gamma)."""
    return splitmix64((int(master) + k * 0x9E3779B97F4A7C15) & _MASK64)


def thread_count():
    try:
        return max(1, int(os.environ.get("STOCHQSP_THREADS", "1")))
    except ValueError:
        return 1


def sampled_mixture_channel(e, a, rho, n_samples, seed, n_shards=8):
    """Monte-Carlo estimate of the mixture channel and its entrywise standard error.

    Samples are split into fixed shards with derived seeds and reduced in
    shard order, so the result does not depend on the thread count.
    """
    if n_samples < 1:
        raise ArgumentError("n_samples must be >= 1")
    rho = _check_state(rho)
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    outs = [m @ rho @ m.conj().T for m in (apply_poly(a, poly) for _, poly in _members(e))]
    outs = np.stack(outs)
    n_shards = max(1, min(n_shards, n_samples))
    sizes = [n_samples // n_shards + (k < n_samples % n_shards) for k in range(n_shards)]

    def shard(k):
        if e.degenerate:
            return np.zeros(sizes[k], dtype=int)
        return sample(e, np.random.default_rng(shard_seed(seed, k)), sizes[k])

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        draws = list(pool.map(shard, range(n_shards)))
    counts = np.bincount(np.concatenate(draws), minlength=len(outs)).astype(float)
    freq = counts / n_samples
    mean = np.tensordot(freq, outs, axes=1)
    # entrywise standard error from the per-term outputs and empirical frequencies
    dev = outs - mean
    var_re = np.tensordot(freq, dev.real ** 2, axes=1)
    var_im = np.tensordot(freq, dev.imag ** 2, axes=1)
    stderr = np.sqrt(var_re / n_samples) + 1j * np.sqrt(var_im / n_samples)
    return mean, stderr


def channel_experiment(e, a, rho=None):
    """The mixture channel of the ensemble against F(A) . F(A)^dag."""
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    a_err, b_err, s, tail = mixing_inputs(e, a)
    mats = [apply_poly(a, poly) for _, poly in _members(e)]
    probs = [p for p, _ in _members(e)]
    rep = validate_mixing_lemma(mats, probs, s, mode="operator")
    rep.fallback = e.degenerate
    rep.extra = {
        "epsilon": e.epsilon,
        "tail": tail,
        "three_eps_ok": rep.measured <= 3 * e.epsilon + tail + 1e-9,
        "overhead": (1 + 2 * math.sqrt(e.epsilon)) ** 2,
    }
    if rho is not None:
        diff = exact_mixture_channel(e, a, rho) - s @ rho @ s.conj().T
        rep.extra["state_trace_distance"] = 0.5 * trace_norm_hermitian(diff)
    return rep


def realize_phases(e, tol=1e-10, seed=0):
    """Attach QSP phases to every member; members whose norm reaches 1 are all
    rescaled by 1/(1 + 2 sqrt(eps)) first (exact +-T_d members are left alone).

    Returns (ensemble, scale, phases); ``phases`` is the single phase set of a
    degenerate ensemble and None otherwise.
    """
    grid = chebyshev_grid(2001)
    members = e.members()
    peak = max(float(np.max(np.abs(eval_series(p, grid)))) for _, p in members)
    exact = all(np.count_nonzero(p.coeffs) == 1 and np.max(np.abs(p.coeffs)) == 1.0
                for _, p in members)
    if peak < 1.0 - 1e-8 or exact:
        scale = 1.0
    else:
        # a tiny eps may not clear the solver margin, so never scale by less than that
        scale = min(1.0 / (1.0 + 2.0 * math.sqrt(e.epsilon)), (1.0 - 1e-7) / peak)
    phase_sets = [find_phases(p.with_coeffs(scale * p.coeffs), tol=tol, seed=seed).phases
                  for _, p in members]
    if e.degenerate:
        return e, scale, phase_sets[0]
    return e.with_phases(phase_sets), scale, None


@dataclass
class PovmReport:
    a_map: float
    b_map: float
    epsilon: float
    measured: float
    a_map_ok: bool
    combined_ok: bool
    beta_chain_max: float
    beta_chain_ok: bool
    scale: float
    g_branch: str
    completion: str = "fit"

    def to_dict(self):
        return asdict(self)


def _reference_column(e, lam, ref_degree, tol, seed):
    deg = min(ref_degree, e.source.degree)
    ref = truncate(e.source, deg)
    if ref.parity is Parity.ODD and deg % 2 == 0:
        deg -= 1
    if ref.parity is Parity.EVEN and deg % 2 == 1:
        deg -= 1
    ref = truncate(e.source, deg)
    ph = find_phases(ref, tol=tol, seed=seed)
    return plus_frame_column(ph, lam)[1]


def _branch_factor(e, g_branch):
    if g_branch == "real":
        return 1.0
    # an even-degree circuit can only place an even function in Im of the bottom entry
    return 1j if e.source.parity is Parity.EVEN else 1.0


def povm_map_check(e, a, tol=1e-10, seed=0, g_branch="parity", completion="fit", ref_degree=40,
                   restarts=2):
    """Compare the unmeasured-ancilla QSP ensemble against |0>|l> -> F|0>|l> + G s|1>|l>.

    Each member is a QSP circuit read in the plus frame, whose first column
    is (P_j(l), bottom_j(l)). Ideal bottom entries:

      real       sqrt(1 - F^2), the nonnegative root
      parity     the same root times i for even-parity ensembles, the only
                 phase an even-degree circuit can reach there (an ancilla
                 phase gate, so the measured POVM is unchanged)
      reference  the bottom entry of the phases of a long truncation of F

    ``completion="fit"`` fits each member's full column (P_j, its own ideal
    bottom entry) on the spectral interval; ``"find_phases"`` uses the
    symmetric solver phases, whose complementary entry is not controlled.
    Fits start from the solver phases plus ``restarts`` random starts.
    """
    if not isinstance(a, HermitianOperator):
        a = HermitianOperator.from_matrix(a)
    lam = a.eigvals
    s = np.sqrt(1.0 - lam * lam)
    f = eval_series(e.source, lam)
    if np.max(np.abs(f)) > 1.0 - 1e-6:
        raise ArgumentError("POVM check needs |F| <= 1 - 1e-6 on the spectrum")
    if np.any(s < 1e-6):
        raise DomainError("spectrum touches +-1 where G is singular")
    if g_branch not in ("real", "parity", "reference"):
        raise ArgumentError(f"unknown G branch {g_branch!r}")
    if completion not in ("fit", "find_phases"):
        raise ArgumentError(f"unknown completion {completion!r}")
    if g_branch == "reference":
        if completion == "fit":
            raise ArgumentError("the reference branch needs completion='find_phases'")
        g_s = _reference_column(e, lam, ref_degree, tol, seed)
        factor = None
    else:
        factor = _branch_factor(e, g_branch)
        g_s = factor * np.sqrt(1.0 - f * f)
    ep, scale, single = realize_phases(e, tol=tol, seed=seed)
    members = e.members()
    probs = [p for p, _ in members]
    warm = [single] if e.degenerate else [t.phases for t in ep.terms]
    if completion == "fit":
        r = float(np.max(np.abs(lam)))
        phase_sets = []
        for (_, poly), w in zip(members, warm):
            def bottom(x, poly=poly):
                return factor * np.sqrt(np.clip(1.0 - eval_series(poly, x) ** 2, 0.0, None))
            ph, _ = fit_column(poly, bottom, (-r, r), warm=w, restarts=restarts, seed=seed)
            phase_sets.append(ph.phases)
        scale = 1.0
    else:
        phase_sets = warm
    cols = [plus_frame_column(ph, lam) for ph in phase_sets]
    ideal = np.stack([f, g_s])
    devs = [np.stack([top, bot]) - ideal for top, bot in cols]
    a_map = max(float(np.max(np.linalg.norm(dv, axis=0))) for dv in devs)
    mean_dev = sum(p * dv for p, dv in zip(probs, devs))
    b_map = float(np.max(np.linalg.norm(mean_dev, axis=0)))
    # |beta|^2 <= 3|alpha| with alpha = P_j - F and beta = Q_j - G
    chain = 0.0
    for dv in devs:
        alpha = np.abs(dv[0])
        beta2 = np.abs(dv[1] / s) ** 2
        chain = max(chain, float(np.max(beta2 - 3 * alpha)))
    v = a.eigvecs

    def iso(top, bot):
        return np.vstack([(v * top) @ v.conj().T, (v * bot) @ v.conj().T])

    measured = choi_distance([iso(t, b) for t, b in cols], probs, [iso(f, g_s)], [1.0])
    eps = e.epsilon
    return PovmReport(a_map, b_map, eps, measured,
                      a_map <= math.sqrt(40 * eps),
                      a_map ** 2 + 2 * b_map <= 48 * eps,
                      chain, chain <= 1e-12, scale, g_branch, completion)


REPORT_COLUMNS = ("function", "param", "d", "d_star", "d_avg", "epsilon", "a", "b", "bound",
                  "measured", "seed")


def fmt(x):
    if isinstance(x, float):
        return repr(x) if not math.isfinite(x) else f"{x:.17g}"
    return str(x)


def reports_to_csv(rows, header=None):
    """rows: dicts keyed by REPORT_COLUMNS."""
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def reports_to_json(rows, meta=None):
    return json.dumps({"meta": meta or {}, "rows": rows}, indent=2, sort_keys=True)
