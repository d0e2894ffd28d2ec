"""One-shot impulse control steering the state near zero at time 2T.

For initial data phi0 the quadratic functional

    J(z) = (k^2/2) |z(T)|_{L2(omega)}^2 + (eps^2/2) |z|^2 - <phi0, z(2T)>

over initial fields z is minimized in the truncated basis.  With the
diagonal propagators D_t = diag(exp(-lambda_j int_0^t p)) and the subinterval
Gram matrix G the normal equations read

    (k^2 D_T G D_T + eps^2 I) c = D_2T phi0.

The impulse added at time T is h = -k^2 * (evolution of c to T), supported on
omega with coefficient vector b = -k^2 G D_T c, and the duality residual
psi = D_2T phi0 + D_T b equals eps^2 c identically; psi is the quantity the
local reconstruction consumes, and it coincides with the physical terminal
state phi(2T) whenever p is constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConfigError
from .observability import ObservabilityConstants
from .spectral import DiffusionProfile, EigenBasis, SpectralField, Subdomain

_REL_SLACK = 1e-12  # float slack on certified inequalities


def weight_from_chain(chain: ObservabilityConstants, T: float, eps: float) -> float:
    """Observability weight k = sqrt(c1 e^{c1/T}) / eps^{c2}."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if not math.isfinite(chain.c1):
        raise ConfigError(
            "constant chain overflows double range for this geometry; "
            "use the empirical constants mode"
        )
    ln_k = 0.5 * (chain.ln_c1 + chain.c1 / T) - chain.c2 * math.log(eps)
    if ln_k > 350.0:
        raise ConfigError(f"control weight exp({ln_k:.3g}) not representable")
    return math.exp(ln_k)


@dataclass(frozen=True)
class ControlSetup:
    """Fixed data of one control problem on the window (0, 2T)."""

    basis: EigenBasis
    T: float
    profile: DiffusionProfile
    subdomain: Subdomain
    gram: np.ndarray
    eps: float
    k: float

    def __post_init__(self):
        if self.T <= 0.0 or self.eps <= 0.0 or self.k <= 0.0:
            raise ValueError("T, eps and k must be positive")
        if 2.0 * self.T > self.profile.horizon * (1.0 + 1e-12):
            raise ValueError("profile horizon shorter than the control window (0, 2T)")

    @classmethod
    def from_chain(
        cls,
        basis: EigenBasis,
        T: float,
        profile: DiffusionProfile,
        subdomain: Subdomain,
        gram: np.ndarray,
        eps: float,
        chain: ObservabilityConstants,
    ) -> "ControlSetup":
        return cls(basis, T, profile, subdomain, gram, eps, weight_from_chain(chain, T, eps))

    @property
    def decay_to_T(self) -> np.ndarray:
        return np.exp(-self.basis.eigenvalues * self.profile.integral(0.0, self.T))

    @property
    def decay_to_2T(self) -> np.ndarray:
        return np.exp(-self.basis.eigenvalues * self.profile.integral(0.0, 2.0 * self.T))

    @property
    def decay_T_to_2T(self) -> np.ndarray:
        return np.exp(-self.basis.eigenvalues * self.profile.integral(self.T, 2.0 * self.T))


@dataclass(frozen=True)
class ControlSolution:
    """Minimizer c, impulse coefficients b, duality residual psi, diagnostics."""

    c: np.ndarray
    b: np.ndarray
    psi: np.ndarray
    h_norm_omega: float
    identity_residual: float
    cg_iters: int
    used_fallback: bool


def assemble_control_system(setup: ControlSetup):
    """Normal-equation matrix M = k^2 D_T G D_T + eps^2 I and rhs map phi0 -> D_2T phi0."""
    dT = setup.decay_to_T
    M = (setup.k**2) * (dT[:, None] * setup.gram * dT[None, :])
    M[np.diag_indices_from(M)] += setup.eps**2
    d2T = setup.decay_to_2T

    def rhs(phi0: np.ndarray) -> np.ndarray:
        return d2T * np.asarray(phi0, dtype=float)

    return M, rhs


def _cg(M: np.ndarray, b: np.ndarray, rel_tol: float, max_iters: int):
    """Plain conjugate gradients on the SPD system M x = b."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    b_norm = math.sqrt(float(b @ b))
    if b_norm == 0.0:
        return x, 0, True
    for it in range(1, max_iters + 1):
        Mp = M @ p
        alpha = rs / float(p @ Mp)
        x += alpha * p
        r -= alpha * Mp
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= rel_tol * b_norm:
            return x, it, True
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, max_iters, False


def solve_control(setup: ControlSetup, phi0: np.ndarray, method: str = "cholesky") -> ControlSolution:
    """Solve the normal equations for phi0 and package the control quantities.

    The solve is refined until the residual is small against eps^2 |c| (the
    scale of psi) or stops improving; the optimality identity psi = eps^2 c
    then holds as tightly as the conditioning k^2 |D_T G D_T| / eps^2 allows,
    and the achieved residual is recorded on the solution.  CG falls back to
    the dense factorization when it fails to converge within 10 N iterations.
    """
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape != (setup.basis.size,):
        raise ValueError(f"phi0 must have {setup.basis.size} coefficients")
    if not np.any(phi0):
        raise ValueError("phi0 must be nonzero")
    M, rhs_map = assemble_control_system(setup)
    rhs = rhs_map(phi0)

    cg_iters = 0
    used_fallback = False
    factor = None
    try:
        if method == "cg":
            c, cg_iters, converged = _cg(M, rhs, 1e-12, 10 * setup.basis.size)
            if not converged:
                used_fallback = True
                factor = cho_factor(M)
                c = cho_solve(factor, rhs)
        elif method == "cholesky":
            factor = cho_factor(M)
            c = cho_solve(factor, rhs)
        else:
            raise ValueError(f"unknown method {method!r}")

        if factor is None:
            factor = cho_factor(M)
    except LinAlgError as exc:
        raise ConfigError(
            f"control system numerically singular (eps={setup.eps}, k={setup.k}): {exc}"
        ) from exc
    eps2 = setup.eps**2
    best = math.inf
    for _ in range(30):
        resid = rhs - M @ c
        res_norm = float(np.linalg.norm(resid))
        if res_norm <= 0.25e-12 * eps2 * float(np.linalg.norm(c)) or res_norm >= 0.5 * best:
            break
        best = res_norm
        c = c + cho_solve(factor, resid)

    dT = setup.decay_to_T
    dTc = dT * c
    b = -(setup.k**2) * (setup.gram @ dTc)
    psi = setup.decay_to_2T * phi0 + dT * b
    h_norm = (setup.k**2) * math.sqrt(max(float(dTc @ setup.gram @ dTc), 0.0))
    identity_residual = float(np.linalg.norm(psi - eps2 * c))
    return ControlSolution(c, b, psi, h_norm, identity_residual, cg_iters, used_fallback)


def physical_terminal(setup: ControlSetup, phi0: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of the controlled trajectory at 2T: evolve, kick, evolve."""
    phi0 = np.asarray(phi0, dtype=float)
    b = np.asarray(b, dtype=float)
    return setup.decay_T_to_2T * (setup.decay_to_T * phi0 + b)


def functional_J(setup: ControlSetup, z: np.ndarray, phi0: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    dTz = setup.decay_to_T * z
    return (
        0.5 * setup.k**2 * float(dTz @ setup.gram @ dTz)
        + 0.5 * setup.eps**2 * float(z @ z)
        - float(np.asarray(phi0, dtype=float) @ (setup.decay_to_2T * z))
    )


def gradient_J(setup: ControlSetup, z: np.ndarray, phi0: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    dT = setup.decay_to_T
    return (
        setup.k**2 * dT * (setup.gram @ (dT * z))
        + setup.eps**2 * z
        - setup.decay_to_2T * np.asarray(phi0, dtype=float)
    )


def h_values(setup: ControlSetup, sol: ControlSolution, xs: np.ndarray) -> np.ndarray:
    """Impulse profile h(x) = -k^2 sum_j (D_T c)_j e_j(x), valid on omega."""
    dTc = setup.decay_to_T * sol.c
    return -(setup.k**2) * (setup.basis.eigenfunction_matrix(xs) @ dTc)


@dataclass(frozen=True)
class ControlCertificate:
    """Per-instance inequality checks attached to one control solve."""

    s: float
    s_inner: float
    identity_rel: float
    cauchy_ok: bool
    surrogate_ok: bool
    h_ok: bool
    psi_ok: bool
    h_norm: float
    psi_norm: float


def verify_control_bounds(
    setup: ControlSetup, sol: ControlSolution, phi0: np.ndarray
) -> ControlCertificate:
    """Check the energy split and the observability surrogate for one solve.

    s = |h|^2/k^2 + |psi|^2/eps^2 equals <phi0, D_2T c> algebraically; the
    surrogate |D_2T c|^2 <= k^2 (D_T c)' G (D_T c) + eps^2 |c|^2 is geometry
    dependent, and when it holds it forces |h| <= k |phi0| and
    |psi| <= eps |phi0|.  Failures are reported, not raised.
    """
    phi0 = np.asarray(phi0, dtype=float)
    eps2 = setup.eps**2
    psi_norm = float(np.linalg.norm(sol.psi))
    s = sol.h_norm_omega**2 / setup.k**2 + psi_norm**2 / eps2
    d2Tc = setup.decay_to_2T * sol.c
    s_inner = float(phi0 @ d2Tc)
    identity_rel = abs(s - s_inner) / max(abs(s), abs(s_inner), 1e-300)

    phi0_norm = float(np.linalg.norm(phi0))
    d2Tc_norm = float(np.linalg.norm(d2Tc))
    cauchy_ok = s <= phi0_norm * d2Tc_norm * (1.0 + _REL_SLACK) + 1e-300

    dTc = setup.decay_to_T * sol.c
    surrogate_rhs = setup.k**2 * float(dTc @ setup.gram @ dTc) + eps2 * float(sol.c @ sol.c)
    surrogate_ok = d2Tc_norm**2 <= surrogate_rhs * (1.0 + _REL_SLACK) + 1e-300

    h_ok = sol.h_norm_omega <= setup.k * phi0_norm * (1.0 + _REL_SLACK)
    psi_ok = psi_norm <= setup.eps * phi0_norm * (1.0 + _REL_SLACK)
    return ControlCertificate(
        s, s_inner, identity_rel, cauchy_ok, surrogate_ok, h_ok, psi_ok,
        sol.h_norm_omega, psi_norm,
    )


def control_mode_bank(
    setup: ControlSetup, n_bank: int, method: str = "cholesky"
) -> list[ControlSolution]:
    """Controls for the first n_bank unit-mode initial states."""
    if not 1 <= n_bank <= setup.basis.size:
        raise ValueError(f"bank size must lie in [1, {setup.basis.size}], got {n_bank}")
    bank = []
    for i in range(1, n_bank + 1):
        phi0 = SpectralField.unit_mode(setup.basis, i).coeffs
        bank.append(solve_control(setup, phi0, method=method))
    return bank


def dual_pairing(
    setup: ControlSetup, phi0: np.ndarray, b: np.ndarray, c: np.ndarray, t: float
) -> float:
    """<phi(t), Phi(2T - t)> for the controlled phi and the adjoint field from c.

    Constant in t on each half window when p is constant; the asymmetry for
    time-dependent p is why psi, not phi(2T), carries the certified identity.
    """
    two_T = 2.0 * setup.T
    if not 0.0 <= t <= two_T:
        raise ValueError("t must lie in [0, 2T]")
    lam = setup.basis.eigenvalues
    if t <= setup.T:
        phi_t = np.exp(-lam * setup.profile.integral(0.0, t)) * np.asarray(phi0, dtype=float)
    else:
        kick = setup.decay_to_T * np.asarray(phi0, dtype=float) + np.asarray(b, dtype=float)
        phi_t = np.exp(-lam * setup.profile.integral(setup.T, t)) * kick
    adj = np.exp(-lam * setup.profile.integral(0.0, two_T - t)) * np.asarray(c, dtype=float)
    return float(phi_t @ adj)
