"""Exact quantum reference on a uniform grid.

Provides grid wavefunctions, the momentum transform in the convention

    psi_tilde(p) = (2 i pi hbar)^(-1/2) * int dq exp(-i p q / hbar) psi(q),

split-operator propagation, exact Wigner transforms of states and
operators, Weyl quantization, expectation values, and the synthesis of a
semiclassical wavefunction from a sampled Lagrangian curve:

    psi(q) = a(s) / sqrt(|dq/ds|) * exp(i S(s)/hbar - i mu pi/2)

on intervals where q(s) is invertible, the analogous p-representation
form where p(s) is invertible, and a smooth partition of unity blending
the two around each caustic.  The p-representation index picks up an
extra unit relative to mu wherever dp/dq < 0, which keeps the phase
continuous across turning points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft, ifft

from .errors import BoundaryBreachError, BranchRepresentationError
from .manifold import Manifold1D

logger = logging.getLogger("chordal.quantum")

__all__ = [
    "GridSpec", "GridState", "to_momentum", "to_position", "overlap",
    "propagate_exact", "WignerFunction", "wigner_exact",
    "weyl_quantize", "operator_wigner", "expectation_exact",
    "build_maslov_state",
]


def _is_pow2(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform q grid: n points q_min + j dq, dq = (q_max - q_min)/n.

    The right endpoint is excluded (periodic layout); take q_max with
    margin for non-periodic boxes.  n must be a power of two.
    """

    q_min: float
    q_max: float
    n: int
    hbar: float
    periodic: bool = False

    def __post_init__(self):
        if not self.q_min < self.q_max:
            raise ValueError("grid bounds must be strictly ordered")
        if not _is_pow2(self.n):
            raise ValueError(f"grid size must be a power of two, got {self.n}")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def dq(self):
        return (self.q_max - self.q_min) / self.n

    @property
    def q(self):
        return self.q_min + self.dq * np.arange(self.n)

    @property
    def p_fft(self):
        """Momentum grid in FFT (unshifted) order."""
        return 2 * np.pi * self.hbar * np.fft.fftfreq(self.n, d=self.dq)

    @property
    def dp(self):
        return 2 * np.pi * self.hbar / (self.n * self.dq)


@dataclass
class GridState:
    """Complex wavefunction samples on a uniform grid.

    ``coord`` is "q" for position-space states and "p" for the output of
    :func:`to_momentum` (then x0/dx describe the ascending p grid).
    """

    psi: np.ndarray
    x0: float
    dx: float
    hbar: float
    periodic: bool = False
    coord: str = "q"
    conj_x0: float = 0.0  # origin of the partner representation
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if not _is_pow2(len(self.psi)):
            raise ValueError("state length must be a power of two")

    @property
    def n(self):
        return len(self.psi)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.n)

    # q-representation aliases
    @property
    def q_min(self):
        return self.x0

    @property
    def dq(self):
        return self.dx

    @property
    def q(self):
        return self.x

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.dx))

    def normalized(self):
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero state")
        out = GridState(self.psi / nrm, self.x0, self.dx, self.hbar,
                        self.periodic, self.coord, self.conj_x0,
                        dict(self.diagnostics))
        return out

    def spec(self):
        if self.coord != "q":
            raise ValueError("spec() applies to position-space states")
        return GridSpec(self.x0, self.x0 + self.n * self.dx, self.n,
                        self.hbar, self.periodic)


def overlap(a: GridState, b: GridState) -> complex:
    """<a|b> = sum conj(a) b dx on a shared grid."""
    if a.n != b.n or abs(a.dx - b.dx) > 1e-15 or abs(a.x0 - b.x0) > 1e-12:
        raise ValueError("states live on different grids")
    return complex(np.sum(np.conj(a.psi) * b.psi) * a.dx)


def to_momentum(state: GridState) -> GridState:
    """Momentum representation with the (2 i pi hbar)^(-1/2) prefactor.

    Unitary: sum |psi_tilde|^2 dp = sum |psi|^2 dq to round-off.
    """
    if state.coord != "q":
        raise ValueError("state is already in momentum representation")
    n, dq, hbar = state.n, state.dx, state.hbar
    p_fft = 2 * np.pi * hbar * np.fft.fftfreq(n, d=dq)
    pref = dq / np.sqrt(2 * np.pi * hbar) * np.exp(-1j * np.pi / 4)
    phi = pref * np.exp(-1j * p_fft * state.x0 / hbar) * fft(state.psi)
    phi = np.fft.fftshift(phi)
    p_sorted = np.fft.fftshift(p_fft)
    dp = 2 * np.pi * hbar / (n * dq)
    return GridState(phi, float(p_sorted[0]), dp, hbar, state.periodic,
                     coord="p", conj_x0=state.x0)


def to_position(state: GridState) -> GridState:
    """Inverse of :func:`to_momentum`."""
    if state.coord != "p":
        raise ValueError("state is not in momentum representation")
    n, dp, hbar = state.n, state.dx, state.hbar
    q0 = state.conj_x0
    phi = np.fft.ifftshift(state.psi)
    p_fft = np.fft.ifftshift(state.x)
    pref = np.exp(1j * np.pi / 4) / np.sqrt(2 * np.pi * hbar)
    psi = pref * dp * n * ifft(phi * np.exp(1j * p_fft * q0 / hbar))
    dq = 2 * np.pi * hbar / (n * dp)
    return GridState(psi, q0, dq, hbar, state.periodic, coord="q",
                     conj_x0=float(np.fft.fftshift(p_fft)[0]))


# -- propagation --------------------------------------------------------------


def _boundary_density(psi, dx, periodic, edge=3):
    if periodic:
        return 0.0
    d = np.abs(psi) ** 2 * dx
    return float(max(d[:edge].max(), d[-edge:].max()))


def _p_edge_density(psi, edge=3):
    phi = np.fft.fftshift(fft(psi))
    d = np.abs(phi) ** 2
    total = d.sum()
    if total == 0:
        return 0.0
    return float(max(d[:edge].max(), d[-edge:].max()) / total)


def propagate_exact(state: GridState, sys, t, *, dt=None,
                    boundary_tol=1e-10, check_every=50) -> GridState:
    """Split-operator evolution of a grid state.

    Continuous systems use the symmetric exp(-iV dt/2) exp(-iT dt)
    exp(-iV dt/2) splitting with the same step as the classical
    integrator; kicked maps apply the kick and drift factors exactly,
    one pair per period.  Density reaching the grid edge (in q for open
    boxes, in p always) raises :class:`BoundaryBreachError`.
    """
    if state.coord != "q":
        raise ValueError("propagate position-space states")
    spec = state.spec()
    q, p_fft, hbar = spec.q, spec.p_fft, spec.hbar
    psi = state.psi.copy()

    def check(time):
        bd = _boundary_density(psi, spec.dq, state.periodic)
        if bd > boundary_tol:
            raise BoundaryBreachError(time, bd)
        pd = _p_edge_density(psi)
        if pd > max(boundary_tol, 1e-9):
            raise BoundaryBreachError(time, pd)

    if sys.kind == "kicked-map":
        n_kicks = int(round(t))
        if abs(t - n_kicks) > 1e-9 or n_kicks < 0:
            raise ValueError("kicked-map time must be a non-negative integer")
        kick = np.exp(-1j * sys.V(q) / hbar)
        drift = np.exp(-1j * sys.T(p_fft) / hbar)
        for k in range(n_kicks):
            psi *= kick
            psi = ifft(drift * fft(psi))
            if (k + 1) % check_every == 0:
                check(k + 1)
        check(t)
    else:
        if t < 0:
            raise ValueError("time must be non-negative")
        if t > 0:
            n_steps, h = sys._steps(t, dt)
            expV_half = np.exp(-0.5j * h * sys.V(q) / hbar)
            expV_full = expV_half * expV_half
            expT = np.exp(-1j * h * sys.T(p_fft) / hbar)
            psi *= expV_half
            for k in range(n_steps):
                psi = ifft(expT * fft(psi))
                if k + 1 < n_steps:
                    psi *= expV_full
                    if (k + 1) % check_every == 0:
                        check((k + 1) * h)
            psi *= expV_half
            check(t)

    return GridState(psi, state.x0, state.dx, hbar, state.periodic,
                     conj_x0=state.conj_x0)


# -- Wigner transforms ---------------------------------------------------------


@dataclass
class WignerFunction:
    """Real phase-space density sampled on a rectangular grid.

    w has shape (n_q, n_p); q runs over the refined (half-step) centers of
    the source grid and p over the conjugate lattice.
    """

    w: np.ndarray
    q_axis: np.ndarray
    p_axis: np.ndarray
    hbar: float

    @property
    def dq(self):
        return float(self.q_axis[1] - self.q_axis[0])

    @property
    def dp(self):
        return float(self.p_axis[1] - self.p_axis[0])

    def normalization(self):
        return float(self.w.sum() * self.dq * self.dp)

    def marginal_q(self):
        return self.w.sum(axis=1) * self.dp

    def marginal_p(self):
        return self.w.sum(axis=0) * self.dq


def _refined_psi(state: GridState):
    """Band-limited resampling on the half-step grid (2n points)."""
    n = state.n
    spec_k = fft(state.psi)
    pad = np.zeros(2 * n, dtype=complex)
    half = n // 2
    pad[:half] = spec_k[:half]
    pad[-(n - half):] = spec_k[half:]
    # split the Nyquist bin symmetrically to keep the interpolant balanced
    pad[half] = 0.5 * spec_k[half]
    pad[2 * n - half] += 0.5 * spec_k[half]
    psi2 = ifft(pad) * 2.0
    return psi2


def wigner_exact(state: GridState, *, q_indices=None, chunk=256):
    """Exact Wigner transform of a grid state.

    For each half-step center q_c the product
    conj(psi(q_c - q'/2)) psi(q_c + q'/2) is transformed over q' (exactly
    representable on the refined grid), yielding a real array with the
    marginal identities built in.  ``q_indices`` restricts the output to a
    subset of the 2n refined centers.
    """
    if state.coord != "q":
        raise ValueError("Wigner transform expects a position-space state")
    n, dq, hbar = state.n, state.dx, state.hbar
    psi2 = _refined_psi(state)
    N = 2 * n
    q_axis_full = state.x0 + (dq / 2) * np.arange(N)
    idx = np.arange(N) if q_indices is None else np.asarray(q_indices, int)

    m = np.arange(N)
    m_signed = np.where(m < n, m, m - N)   # FFT-ordered displacement index
    p_fft = 2 * np.pi * hbar * np.fft.fftfreq(N, d=dq)
    p_axis = np.fft.fftshift(p_fft)

    w = np.empty((len(idx), N), dtype=float)
    for lo in range(0, len(idx), chunk):
        sel = idx[lo:lo + chunk]
        ia = sel[:, None] + m_signed[None, :]
        ib = sel[:, None] - m_signed[None, :]
        if state.periodic:
            f = psi2[ia % N] * np.conj(psi2[ib % N])
        else:
            valid = (ia >= 0) & (ia < N) & (ib >= 0) & (ib < N)
            f = np.zeros((len(sel), N), dtype=complex)
            f[valid] = psi2[ia[valid]] * np.conj(psi2[ib[valid]])
        rows = fft(f, axis=1) * (dq / (2 * np.pi * hbar))
        w[lo:lo + chunk] = np.fft.fftshift(rows.real, axes=1)
    return WignerFunction(w, q_axis_full[idx], p_axis, hbar)


def weyl_quantize(obs, spec: GridSpec) -> np.ndarray:
    """Operator matrix of a phase-space symbol.

    Returns the coefficient operator: (O psi)_a = sum_b M[a, b] psi_b.
    """
    q = spec.q
    p = spec.p_fft
    qa = q[:, None]
    qb = q[None, :]
    qbar = 0.5 * (qa + qb)
    dqab = qa - qb
    # sum over the momentum grid; exact for band-limited symbols
    M = np.zeros((spec.n, spec.n), dtype=complex)
    for pk in p:
        M += obs(pk, qbar) * np.exp(1j * pk * dqab / spec.hbar)
    M *= spec.dp * spec.dq / (2 * np.pi * spec.hbar)
    return M


def operator_wigner(op_matrix: np.ndarray, spec: GridSpec):
    """Phase-space symbol of a Hermitian coefficient operator.

    Multiplication operators (diagonal matrices) map exactly to their
    diagonal profile; general kernels are transformed over the chord
    displacement lattice, which resolves symbols band-limited to half the
    grid's momentum range (the physical setting: symbols varying on the
    classical scale).  The two pieces are split so both limits are exact.
    Returns (symbol, q_axis, p_axis), symbol real with shape (n, n).
    """
    M = np.asarray(op_matrix, dtype=complex)
    n = spec.n
    if M.shape != (n, n):
        raise ValueError("operator shape does not match the grid")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.conj().T)) > 1e-10 * scale:
        raise ValueError("operator is not Hermitian")

    p_axis = np.fft.fftshift(2 * np.pi * spec.hbar
                             * np.fft.fftfreq(n, d=2 * spec.dq))
    off_mass = float(np.max(np.abs(M - np.diag(np.diag(M)))))
    if off_mass <= 1e-12 * scale:
        # multiplication operator: the symbol is its diagonal profile
        sym = np.real(np.diag(M))[:, None] * np.ones((1, n))
        return sym, spec.q, p_axis

    K = M / spec.dq  # smooth kernel samples
    m = np.arange(n)
    m_signed = np.where(m < n // 2, m, m - n)
    i = np.arange(n)
    ia = i[:, None] + m_signed[None, :]
    ib = i[:, None] - m_signed[None, :]
    # keep |q'| below half the box so the periodized kernel image drops out
    in_window = np.abs(m_signed) <= n // 4
    if spec.periodic:
        f = K[ia % n, ib % n] * in_window[None, :]
    else:
        valid = (ia >= 0) & (ia < n) & (ib >= 0) & (ib < n) & in_window[None, :]
        f = np.zeros((n, n), dtype=complex)
        f[valid] = K[ia[valid], ib[valid]]
    sym = np.fft.fftshift(fft(f, axis=1), axes=1) * (2 * spec.dq)
    resid = float(np.max(np.abs(sym.imag)))
    if resid > 1e-8 * max(1.0, float(np.max(np.abs(sym.real)))):
        logger.warning("operator symbol has imaginary residue %.3e", resid)
    return sym.real, spec.q, p_axis


def expectation_exact(state: GridState, obs) -> float:
    """<psi|O|psi> for an Observable (Wigner overlap) or a matrix."""
    if isinstance(obs, np.ndarray):
        val = np.vdot(state.psi, obs @ state.psi) * state.dx
        return float(val.real)
    wf = wigner_exact(state)
    O = obs(wf.p_axis[None, :], wf.q_axis[:, None])
    return float(np.sum(wf.w * O) * wf.dq * wf.dp)


# -- Maslov synthesis ----------------------------------------------------------


def _raised_cosine(u):
    """Smooth ramp 0 -> 1 on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * u))


def _window_weight(s, s_c, core, outer):
    """Partition weight of a caustic window: 1 inside the core, a raised
    cosine down to 0 at the outer radius."""
    u = (np.abs(np.asarray(s, float) - s_c) - core) / max(outer - core, 1e-300)
    return 1.0 - _raised_cosine(u)


def build_maslov_state(m: Manifold1D, hbar: float, spec: GridSpec,
                       *, window_frac=0.05, fine_factor=8,
                       normalize=True) -> GridState:
    """Synthesize the semiclassical wavefunction carried by a manifold.

    Between caustics the q-representation form is evaluated directly on
    the grid; around each caustic the p-representation form is built on
    the conjugate momentum grid and transformed back, the two glued with
    raised-cosine partition weights over windows of half-width
    ``window_frac`` times the shorter adjacent branch.  The output is
    normalized; diagnostics carry the window table, the pre-normalization
    norm, and (for closed curves) the seam phase mismatch.
    """
    if spec.hbar != hbar:
        spec = GridSpec(spec.q_min, spec.q_max, spec.n, hbar, spec.periodic)
    s_lo, s_hi = m.s_min, m.s_max
    caustics = list(m.caustics)

    # Window half-widths.  The primitive branch forms fail inside the
    # Airy neighbourhood of a caustic, whose parameter scale is
    # (hbar / |p' q''|)^(1/3); the window must bury that zone while
    # staying clear of its neighbours and of any p-turning point.
    windows = []
    n_c = len(caustics)
    for k, c in enumerate(caustics):
        # distance to the neighbouring caustics (cyclic for closed curves)
        if n_c > 1:
            left = (c.s - caustics[k - 1].s) % max(m.length, 1e-300) if m.closed \
                else (c.s - caustics[k - 1].s if k > 0 else np.inf)
            right = (caustics[(k + 1) % n_c].s - c.s) % max(m.length, 1e-300) \
                if m.closed else (caustics[k + 1].s - c.s if k + 1 < n_c
                                  else np.inf)
        elif m.closed:
            left = right = m.length
        else:
            left = right = np.inf
        if m.closed:
            # windows may not straddle the parameter seam
            seam_gap = min(c.s - s_lo, s_hi - c.s)
        else:
            seam_gap = np.inf  # open curves simply clip at their ends
        pdot = abs(m.tangent(c.s)[0])
        qddot = abs(m.second_derivative(c.s)[1])
        s_airy = (hbar / max(pdot * qddot, 1e-300)) ** (1.0 / 3.0)
        outer = min(0.45 * left, 0.45 * right, seam_gap, 0.5 * m.length)
        if not np.isfinite(outer):
            outer = m.length
        # p(s) must stay monotone (and not vanish) across the window
        for _ in range(48):
            probe = np.linspace(c.s - outer, c.s + outer, 96)
            probe = probe[(probe > s_lo) & (probe < s_hi)]
            tang = m.tangent(probe)
            dpds = tang[:, 0]
            norm = np.hypot(tang[:, 0], tang[:, 1])
            if (np.all(dpds > 0.12 * norm) or np.all(dpds < -0.12 * norm)):
                break
            outer *= 0.85
        else:
            raise BranchRepresentationError(s_lo, s_hi)
        span = min(left, right) if np.isfinite(min(left, right)) else m.length
        core = min(max(1.5 * s_airy, window_frac * span), 0.7 * outer)
        if core < 1.2 * s_airy:
            logger.warning(
                "caustic window at s=%.4g has core %.3g, under 1.2x its Airy "
                "scale %.3g; the synthesized state will be degraded",
                c.s, core, s_airy)
        windows.append((core, outer))

    def q_weight(s):
        w = np.ones_like(np.asarray(s, float))
        for c, (core, outer) in zip(caustics, windows):
            w = w - _window_weight(s, c.s, core, outer)
        return np.clip(w, 0.0, 1.0)

    psi = np.zeros(spec.n, dtype=complex)
    qs = spec.q
    p_fft = spec.p_fft
    windows_diag = []

    def mu_of(s_arr):
        out = np.zeros(len(s_arr), dtype=int)
        for c in caustics:
            out += c.increment * (s_arr > c.s)
        return out

    # q-representation pieces between the caustic window cores
    pieces = []
    cut_lo = s_lo
    for c, (core, outer) in zip(caustics, windows):
        pieces.append((cut_lo, c.s - core))
        cut_lo = c.s + core
    pieces.append((cut_lo, s_hi))

    for (sa, sb) in pieces:
        if sb - sa <= 0:
            continue
        s_fine = np.linspace(sa, sb, max(int(fine_factor * len(m.s)
                                             * (sb - sa) / m.length), 64))
        q_fine = m.position(s_fine)[:, 1]
        dqds = m.tangent(s_fine)[:, 1]
        if np.any(dqds == 0.0) or (np.any(dqds > 0) and np.any(dqds < 0)):
            raise BranchRepresentationError(sa, sb)
        order = np.argsort(q_fine)
        q_sorted, s_sorted = q_fine[order], s_fine[order]
        lo, hi = q_sorted[0], q_sorted[-1]
        sel = (qs >= lo) & (qs <= hi)
        if not np.any(sel):
            continue
        s_of_q = np.interp(qs[sel], q_sorted, s_sorted)
        w_part = q_weight(s_of_q)
        amp = m.amplitude(s_of_q)
        jac = np.abs(m.tangent(s_of_q)[:, 1])
        phase = m.action_at(s_of_q) / hbar - 0.5 * np.pi * mu_of(s_of_q)
        psi[sel] += w_part * amp / np.sqrt(jac) * np.exp(1j * phase)

    # p-representation pieces on the caustic windows
    for c, (core, outer) in zip(caustics, windows):
        sa, sb = max(c.s - outer, s_lo), min(c.s + outer, s_hi)
        s_fine = np.linspace(sa, sb, max(4 * fine_factor * 8, 256))
        tang = m.tangent(s_fine)
        dpds = tang[:, 0]
        if np.any(dpds == 0.0) or (np.any(dpds > 0) and np.any(dpds < 0)):
            raise BranchRepresentationError(sa, sb)
        p_fine = m.position(s_fine)[:, 0]
        order = np.argsort(p_fine)
        p_sorted, s_sorted = p_fine[order], s_fine[order]
        sel = (p_fft >= p_sorted[0]) & (p_fft <= p_sorted[-1])
        if not np.any(sel):
            raise ValueError(
                "momentum grid does not cover a caustic window; enlarge "
                "the grid or refine its spacing")
        s_of_p = np.interp(p_fft[sel], p_sorted, s_sorted)
        w_part = _window_weight(s_of_p, c.s, core, outer)
        amp = m.amplitude(s_of_p)
        tang_w = m.tangent(s_of_p)
        jac = np.abs(tang_w[:, 0])
        # integration by parts: the p-representation action sharing the
        # q-branch phase reference is S - p q (no extra constant)
        pos_w = m.position(s_of_p)
        S_tilde = m.action_at(s_of_p) - pos_w[:, 0] * pos_w[:, 1]
        slope = tang_w[:, 0] / tang_w[:, 1]  # dp/dq, flips sign at the caustic
        mu_tilde = mu_of(s_of_p) + (slope < 0)
        # both mu and the slope sign switch at the caustic; away from the
        # switch the p-representation index must come out constant
        away = np.abs(s_of_p - c.s) > 1e-3 * core
        if np.any(away):
            vals = mu_tilde[away]
            if np.ptp(vals) != 0:
                raise BranchRepresentationError(sa, sb)
            mu_tilde = np.full_like(mu_tilde, vals[0])
        phase = S_tilde / hbar - 0.5 * np.pi * mu_tilde
        phi_w = np.zeros(spec.n, dtype=complex)
        phi_w[sel] = w_part * amp / np.sqrt(jac) * np.exp(1j * phase)
        # back to the position representation
        pref = np.exp(1j * np.pi / 4) / np.sqrt(2 * np.pi * hbar)
        psi += pref * spec.dp * ifft(phi_w * np.exp(1j * p_fft * spec.q_min
                                                    / hbar)) * spec.n
        windows_diag.append({"s_c": c.s, "core": core, "outer": outer,
                             "mu_tilde": int(mu_tilde[0])})

    diagnostics = {"windows": windows_diag, "window_frac": window_frac}
    if m.closed:
        loop_action = float(m.action[-1])
        mu_loop = int(sum(c.increment for c in caustics))
        mismatch = (loop_action / hbar - 0.5 * np.pi * mu_loop) % (2 * np.pi)
        mismatch = min(mismatch, 2 * np.pi - mismatch)
        diagnostics["seam_phase_mismatch"] = float(mismatch)
        if mismatch > 1e-2:
            logger.warning("closed-curve phase mismatch %.3e rad; the "
                           "quantization condition is not satisfied", mismatch)

    out = GridState(psi, spec.q_min, spec.dq, hbar, spec.periodic,
                    diagnostics=diagnostics)
    diagnostics["raw_norm"] = out.norm()
    if normalize:
        out = out.normalized()
    return out
