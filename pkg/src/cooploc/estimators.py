"""Position estimators operating on anchor beacons.

Closed-form least squares (plain and weighted), an l1 plane-fitting solver,
normalized-step gradient descent on the l1 ranging loss, and the
mobility-adaptive gradient descent (MAGD) whose learning rate follows four
adaptation rules across timesteps and whose gradient is reputation weighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateGeometryError, DomainError, UsageError


@dataclass
class Beacon:
    """One anchor broadcast as seen by the target.

    reported_position and reported_sigma_p are the anchor's own (possibly
    falsified) claims; measured_distance is the target's RSSI range to it.
    """

    anchor_id: int
    reported_position: np.ndarray
    reported_sigma_p: float
    measured_distance: float

    def __post_init__(self):
        self.reported_position = np.asarray(self.reported_position, dtype=float)
        if self.measured_distance <= 0:
            raise DomainError(f"measured distance must be positive, got {self.measured_distance}")
        if self.reported_sigma_p <= 0:
            raise DomainError(f"reported sigma_p must be positive, got {self.reported_sigma_p}")


def beacon_arrays(beacons):
    """(positions (N,3), distances (N,), sigma_p (N,)) from a beacon list."""
    positions = np.array([b.reported_position for b in beacons], dtype=float)
    distances = np.array([b.measured_distance for b in beacons], dtype=float)
    sigma_p = np.array([b.reported_sigma_p for b in beacons], dtype=float)
    return positions, distances, sigma_p


@dataclass(frozen=True)
class Ln1Config:
    k_max: int = 300
    rho: float = 0.3
    theta: float = 1e-3

    def __post_init__(self):
        if self.theta <= 0 or self.rho <= 0 or self.k_max < 1:
            raise DomainError("invalid l1 solver configuration")


@dataclass(frozen=True)
class GdConfig:
    k_max: int = 50
    alpha0: float = 1.5
    beta: float = 0.8
    theta: float = 1e-5

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise DomainError(f"discount beta must be in (0,1), got {self.beta}")
        if self.theta <= 0 or self.alpha0 <= 0 or self.k_max < 1:
            raise DomainError("invalid GD configuration")


@dataclass(frozen=True)
class MagdConfig:
    eps_max_t0: float = 50.0
    eps_min_t0: float = 5.0
    beta1: float = 0.5
    beta2: float = 0.05
    momentum: float = 1e-5
    theta: float = 1e-8
    k_max: int = 30
    phi: int = 5
    step3_ratio: float = 0.3
    step4_ratio: float = 1.3

    def __post_init__(self):
        if not 0 < self.beta1 < 1:
            raise DomainError(f"beta1 must be in (0,1), got {self.beta1}")
        if self.eps_min_t0 >= self.eps_max_t0:
            raise DomainError("eps_min_t0 must be below eps_max_t0")
        if self.theta <= 0 or self.k_max < 1 or self.phi < 1:
            raise DomainError("invalid MAGD configuration")


@dataclass(frozen=True)
class EstimatorConfig:
    ln1: Ln1Config = field(default_factory=Ln1Config)
    gd: GdConfig = field(default_factory=GdConfig)
    magd: MagdConfig = field(default_factory=MagdConfig)


def _design_matrix(beacons):
    if len(beacons) < 4:
        raise UsageError(f"need at least 4 beacons, got {len(beacons)}")
    positions, distances, _ = beacon_arrays(beacons)
    a = np.empty((len(beacons), 4))
    a[:, :3] = -2.0 * positions
    a[:, 3] = 1.0
    b = distances ** 2 - np.sum(positions ** 2, axis=1)
    return a, b


def _solve_lstsq(a, b):
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 4:
        raise DegenerateGeometryError(f"rank-deficient design matrix (rank {rank})")
    return sol


def ls_estimate(beacons):
    """Least-squares position from the linearized ranging equations."""
    a, b = _design_matrix(beacons)
    return _solve_lstsq(a, b)[:3]


def wls_estimate(beacons, weights):
    """Weighted least squares; uniform weights reproduce ls_estimate."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise DomainError("weights must be positive")
    a, b = _design_matrix(beacons)
    sw = np.sqrt(weights)
    return _solve_lstsq(a * sw[:, None], b * sw)[:3]


def _soft_threshold(x, kappa):
    return np.sign(x) * np.maximum(np.abs(x) - kappa, 0.0)


def l1_estimate(beacons, cfg: Ln1Config = Ln1Config(), full_output=False):
    """Plane-fitting l1 estimate: minimize ||A u - b||_1 over u = (x,y,z,||p||^2).

    Solved by ADMM with shrinkage steps (penalty cfg.rho); iterations stop
    when the position update norm drops below cfg.theta or k_max is reached,
    in which case the best iterate by objective is returned unconverged.
    With full_output=True returns (position, converged, iterations).
    """
    a, b = _design_matrix(beacons)
    # Column scaling keeps the quadratic subproblem well conditioned despite
    # the mixed meter / meter^2 coordinates of u.
    col = np.maximum(np.max(np.abs(a), axis=0), 1e-12)
    a_s = a / col
    gram = a_s.T @ a_s
    if np.linalg.matrix_rank(gram) < 4:
        raise DegenerateGeometryError("rank-deficient design matrix")
    w = np.zeros_like(b)
    z = np.zeros_like(b)
    v = np.linalg.solve(gram, a_s.T @ b)
    best_v, best_obj = v, float(np.sum(np.abs(a_s @ v - b)))
    converged = False
    k = 0
    for k in range(1, cfg.k_max + 1):
        v_prev = v
        v = np.linalg.solve(gram, a_s.T @ (b + w - z))
        av = a_s @ v
        w = _soft_threshold(av - b + z, 1.0 / cfg.rho)
        z = z + av - b - w
        obj = float(np.sum(np.abs(av - b)))
        if obj < best_obj:
            best_obj, best_v = obj, v
        if np.linalg.norm((v - v_prev)[:3] / col[:3]) < cfg.theta:
            converged = True
            break
    u = (v if converged else best_v) / col
    if full_output:
        return u[:3], converged, k
    return u[:3]


def ranging_loss_and_grad(p, positions, distances, weights=None, mu=None):
    """l1 ranging loss sum w|.|.| and its subgradient at p.

    The residual per anchor is ||p - p_n|| - d_n (+ mu_n when a modeled error
    mean is supplied).
    """
    diffs = p[None, :] - positions
    d_hat = np.linalg.norm(diffs, axis=1)
    d_hat = np.maximum(d_hat, 1e-12)
    res = d_hat - distances
    if mu is not None:
        res = res + mu
    if weights is None:
        loss = float(np.sum(np.abs(res)))
        grad = (np.sign(res) / d_hat) @ diffs
    else:
        loss = float(np.sum(weights * np.abs(res)))
        grad = (weights * np.sign(res) / d_hat) @ diffs
    return loss, grad


def gd_descend(initial, positions, distances, cfg: GdConfig):
    """Normalized-step descent on the l1 ranging loss with loss-increase discounting.

    Candidate steps that raise the loss are rejected and shrink the step by
    cfg.beta, so the loss is non-increasing across accepted iterations; the
    search stops once the step size falls below cfg.theta.
    """
    p = np.asarray(initial, dtype=float).copy()
    alpha = cfg.alpha0
    loss, grad = ranging_loss_and_grad(p, positions, distances)
    for _ in range(cfg.k_max):
        if alpha < cfg.theta:
            break
        gn = np.linalg.norm(grad)
        if gn == 0.0:
            break
        cand = p - alpha * grad / gn
        cand_loss, cand_grad = ranging_loss_and_grad(cand, positions, distances)
        if cand_loss > loss:
            alpha *= cfg.beta
        else:
            p, loss, grad = cand, cand_loss, cand_grad
    return p


def gd_estimate(initial, beacons, cfg: GdConfig = GdConfig()):
    """Gradient-descent estimate from a beacon list; see :func:`gd_descend`."""
    positions, distances, _ = beacon_arrays(beacons)
    return gd_descend(np.asarray(initial, dtype=float), positions, distances, cfg)


def weights_from_sigma(sigma_f):
    """Per-anchor weights max(sigma)/sigma_n; the noisiest anchor gets weight 1."""
    sigma_f = np.asarray(sigma_f, dtype=float)
    if np.any(sigma_f <= 0):
        raise DomainError("sigma values must be positive (clamp before weighting)")
    return np.max(sigma_f) / sigma_f


@dataclass
class MagdState:
    """Persistent MAGD state across timesteps.

    Histories are append-only within a run; dbar_history holds the weighted
    mean absolute distance residual per timestep, v_history the estimated
    speeds between consecutive estimates.
    """

    p_hat: np.ndarray
    alpha_hat: float | None = None
    t: int = 0
    dbar_history: tuple = ()
    v_history: tuple = ()
    last_ok: bool = True

    @property
    def dbar_mean(self):
        return float(np.mean(self.dbar_history)) if self.dbar_history else 0.0

    @property
    def v_mean(self):
        return float(np.mean(self.v_history)) if self.v_history else 0.0


def _weighted_residual_stats(p, positions, distances, wr, mu):
    diffs = p[None, :] - positions
    d_hat = np.maximum(np.linalg.norm(diffs, axis=1), 1e-12)
    res = d_hat - distances + mu
    dbar = float(np.mean(np.abs(res) * wr))
    grad = (wr * res / d_hat) @ diffs
    return dbar, grad


def magd_step(state: MagdState, beacons, reputations=None, weights=None,
              cfg: MagdConfig = MagdConfig(), mu_f=None, dt=1.0):
    """Advance the MAGD estimator by one timestep and return the new state.

    Learning-rate rules: at t=0 the rate starts at max(eps_max_t0/N,
    eps_min_t0); inside the iteration loop a candidate that raises the
    weighted mean absolute residual is rejected and the rate shrinks by
    beta1; after a stable timestep (residual within step3_ratio of its
    running mean) the rate bleeds off by beta2 down to eps_min_t0/N; when
    the residual trend outgrows the speed trend by more than step4_ratio
    over the last phi timesteps the rate is scaled back up by that trend.
    The gradient weighs each anchor by its fused-error weight times its
    reputation; an empty beacon list leaves the state unchanged and flagged.
    """
    if not beacons:
        return replace(state, last_ok=False)
    positions, distances, _ = beacon_arrays(beacons)
    n = len(beacons)
    reps = np.ones(n) if reputations is None else np.asarray(reputations, dtype=float)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    mu = np.zeros(n) if mu_f is None else np.asarray(mu_f, dtype=float)
    wr = w * reps

    alpha = state.alpha_hat
    if alpha is None:
        alpha = max(cfg.eps_max_t0 / n, cfg.eps_min_t0)  # Step 1

    p = np.asarray(state.p_hat, dtype=float).copy()
    dbar, grad = _weighted_residual_stats(p, positions, distances, wr, mu)
    for _ in range(cfg.k_max):  # Step 2
        if alpha < cfg.theta:
            break
        gn = np.linalg.norm(grad)
        if gn == 0.0:
            break
        cand = p + cfg.momentum * p - alpha * grad / gn
        cand_dbar, cand_grad = _weighted_residual_stats(cand, positions, distances, wr, mu)
        if cand_dbar > dbar:
            alpha *= cfg.beta1
        else:
            p, dbar, grad = cand, cand_dbar, cand_grad

    dbar_history = state.dbar_history + (dbar,)
    dbar_mean = float(np.mean(dbar_history))

    v_history = state.v_history
    if state.t >= 1:
        v_t = float(np.linalg.norm(p - np.asarray(state.p_hat, dtype=float))) / dt
        v_history = v_history + (v_t,)

    if state.t >= 1:
        if dbar_mean > 0 and abs(dbar - dbar_mean) / dbar_mean <= cfg.step3_ratio:
            alpha = max(alpha - cfg.beta2, cfg.eps_min_t0 / n)  # Step 3
        if len(v_history) >= cfg.phi and dbar_mean > 0:  # Step 4
            v_mean = float(np.mean(v_history))
            window_d = np.asarray(dbar_history[-cfg.phi:])
            window_v = np.maximum(np.asarray(v_history[-cfg.phi:]), 1e-9)
            rho = float(np.sqrt(np.mean((window_d * v_mean) / (dbar_mean * window_v))))
            if rho > cfg.step4_ratio:
                alpha = alpha * rho

    return replace(
        state,
        p_hat=p,
        alpha_hat=alpha,
        t=state.t + 1,
        dbar_history=dbar_history,
        v_history=v_history,
        last_ok=True,
    )
