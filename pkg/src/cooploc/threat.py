"""Falsified-information injection and empirical attack effectiveness.

Three beacon corruption modes (jamming, position bias, error-power
manipulation), three orchestration strategies over time, and a Monte Carlo
harness that measures error inflation E, detection rate P_d, false alarm
rate P_f and the detected effectiveness E_d over (p_a, A_t) grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errormodel import DISTANCE_FLOOR_M, _fused_scene
from .errors import DomainError, UsageError


@dataclass(frozen=True)
class Jamming:
    """Beacon jamming with power sigma_j_sq: noisy position, inflated distance
    (uniform offset clamped positive) and honestly inflated reported sigma_p."""

    sigma_j_sq: float = 8.0

    def __post_init__(self):
        if self.sigma_j_sq < 0:
            raise DomainError("jamming power must be non-negative")


@dataclass(frozen=True)
class Bias:
    """Hijacked anchor reporting its position shifted by a fixed vector b."""

    b: tuple = (3.0, 3.0, 3.0)

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))


@dataclass(frozen=True)
class Manipulation:
    """Extra position error of index sigma_m_sq plus an understated sigma_p
    of 1/sqrt(sigma_m_sq), aimed at inflating the anchor's fusion weight."""

    sigma_m_sq: float = 400.0

    def __post_init__(self):
        if self.sigma_m_sq < 0:
            raise DomainError("manipulation index must be non-negative")


AttackMode = Jamming | Bias | Manipulation


def attack_param(mode: AttackMode) -> float:
    """Scalar magnitude knob A_t of a mode (norm of the bias vector for Bias)."""
    if isinstance(mode, Jamming):
        return mode.sigma_j_sq
    if isinstance(mode, Bias):
        return float(np.linalg.norm(mode.b))
    return mode.sigma_m_sq


def with_param(mode: AttackMode, a_t: float) -> AttackMode:
    """Copy of a mode with its magnitude knob set to a_t.

    For Bias the current direction is kept and rescaled to norm a_t (an
    axis-diagonal direction is used when the current vector is zero).
    """
    if isinstance(mode, Bias):
        b = np.asarray(mode.b, dtype=float)
        norm = np.linalg.norm(b)
        direction = b / norm if norm > 0 else np.ones(3) / math.sqrt(3.0)
        return Bias(tuple(direction * a_t))
    if isinstance(mode, Jamming):
        return Jamming(float(a_t))
    return Manipulation(float(a_t))


@dataclass(frozen=True)
class GlobalRandom:
    """Each malicious UAV independently falsifies with probability attack_rate."""

    attack_rate: float = 0.7

    def __post_init__(self):
        if not 0 <= self.attack_rate <= 1:
            raise DomainError("attack rate must be in [0,1]")


@dataclass(frozen=True)
class GlobalCoordinated:
    """All malicious UAVs falsify in the same frames; the attacking block of
    each frame_period-long window is sized so the long-run rate matches."""

    attack_rate: float = 0.7
    frame_period: int = 10

    def __post_init__(self):
        if not 0 <= self.attack_rate <= 1:
            raise DomainError("attack rate must be in [0,1]")
        if self.frame_period < 1:
            raise DomainError("frame period must be at least 1")


@dataclass(frozen=True)
class Stalking:
    """All malicious UAVs follow one victim and attack it with attack_rate."""

    victim_id: int = 0
    attack_rate: float = 0.7

    def __post_init__(self):
        if not 0 <= self.attack_rate <= 1:
            raise DomainError("attack rate must be in [0,1]")


AttackStrategy = GlobalRandom | GlobalCoordinated | Stalking


@dataclass(frozen=True)
class AttackPlan:
    """Who is malicious, how beacons are falsified and when."""

    malicious_ids: frozenset
    mode: AttackMode
    strategy: AttackStrategy
    p_a: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "malicious_ids", frozenset(self.malicious_ids))
        if self.p_a is not None and not 0 <= self.p_a <= 1:
            raise DomainError("p_a must be in [0,1]")


def corrupt_beacon(beacon, mode: AttackMode, rng):
    """Falsified copy of a beacon; the input is never mutated."""
    from .estimators import Beacon

    if isinstance(mode, Jamming):
        if mode.sigma_j_sq == 0:
            return replace(beacon, reported_position=beacon.reported_position.copy())
        sj = math.sqrt(mode.sigma_j_sq)
        pos = beacon.reported_position + rng.normal(0.0, sj / math.sqrt(3.0), size=3)
        dist = max(beacon.measured_distance + rng.uniform(0.0, mode.sigma_j_sq),
                   DISTANCE_FLOOR_M)
        return Beacon(beacon.anchor_id, pos, beacon.reported_sigma_p + sj, dist)
    if isinstance(mode, Bias):
        pos = beacon.reported_position + np.asarray(mode.b, dtype=float)
        return Beacon(beacon.anchor_id, pos, beacon.reported_sigma_p,
                      beacon.measured_distance)
    if isinstance(mode, Manipulation):
        if mode.sigma_m_sq == 0:
            return replace(beacon, reported_position=beacon.reported_position.copy())
        span = math.sqrt(mode.sigma_m_sq / 3.0)
        offset = rng.uniform(0.0, span, size=3) * (rng.integers(0, 2, size=3) * 2 - 1)
        return Beacon(beacon.anchor_id, beacon.reported_position + offset,
                      1.0 / math.sqrt(mode.sigma_m_sq), beacon.measured_distance)
    raise DomainError(f"unknown attack mode {mode!r}")


def _corrupt_scene(reported, d_meas, mode: AttackMode, rng):
    """Vectorized counterpart of corrupt_beacon for (n,3)/(n,) arrays."""
    n = reported.shape[0]
    if isinstance(mode, Jamming):
        if mode.sigma_j_sq == 0:
            return reported, d_meas
        sj = math.sqrt(mode.sigma_j_sq)
        pos = reported + rng.normal(0.0, sj / math.sqrt(3.0), size=(n, 3))
        dist = np.maximum(d_meas + rng.uniform(0.0, mode.sigma_j_sq, size=n),
                          DISTANCE_FLOOR_M)
        return pos, dist
    if isinstance(mode, Bias):
        return reported + np.asarray(mode.b, dtype=float)[None, :], d_meas
    if isinstance(mode, Manipulation):
        if mode.sigma_m_sq == 0:
            return reported, d_meas
        span = math.sqrt(mode.sigma_m_sq / 3.0)
        offset = rng.uniform(0.0, span, size=(n, 3)) * (rng.integers(0, 2, size=(n, 3)) * 2 - 1)
        return reported + offset, d_meas
    raise DomainError(f"unknown attack mode {mode!r}")


def attacked_sigma_m(mode: AttackMode, path_loss, profile, coverage, samples, rng):
    """Empirical fused error scale of falsified beacons at a coverage radius.

    There is no closed form for the error power under attacks, so the
    attack's extra error is pushed through the same fused-error Monte Carlo
    that builds the clean sigma_M table.
    """
    reported, d_meas, _ = _fused_scene(coverage, path_loss, profile, int(samples), rng)
    pos, dist = _corrupt_scene(reported, d_meas, mode, rng)
    err = dist - np.linalg.norm(pos, axis=1)
    return float(np.std(err))


def schedule_attacks(plan: AttackPlan, t, world, rng):
    """(attacker_id, target_id) pairs launched at timestep t.

    Under the random strategy each malicious UAV attacks one random in-range
    neighbor with probability attack_rate; under the coordinated strategy
    every malicious UAV does so in shared attack frames; under stalking every
    malicious UAV aims at the victim with probability attack_rate. The
    falsified broadcast physically reaches every receiver in range; the pair
    records the primary target.
    """
    strategy = plan.strategy
    pairs = set()
    if isinstance(strategy, Stalking):
        if strategy.victim_id not in world.uav_ids():
            raise UsageError(f"stalking victim {strategy.victim_id} not in world")
        for attacker in sorted(plan.malicious_ids):
            if rng.random() < strategy.attack_rate:
                pairs.add((attacker, strategy.victim_id))
        return pairs
    if isinstance(strategy, GlobalCoordinated):
        block = round(strategy.attack_rate * strategy.frame_period)
        if t % strategy.frame_period >= block:
            return pairs
        for attacker in sorted(plan.malicious_ids):
            victims = world.in_range_ids(attacker)
            if victims:
                pairs.add((attacker, victims[rng.integers(0, len(victims))]))
        return pairs
    if isinstance(strategy, GlobalRandom):
        for attacker in sorted(plan.malicious_ids):
            if rng.random() < strategy.attack_rate:
                victims = world.in_range_ids(attacker)
                if victims:
                    pairs.add((attacker, victims[rng.integers(0, len(victims))]))
        return pairs
    raise DomainError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class EffectivenessSetup:
    """Round-based analysis scenario: a static target watching N anchors that
    are redrawn uniformly inside the coverage sphere every round while
    keeping persistent identities (so reputations can accumulate)."""

    path_loss: object
    profile: object
    dist_table: object
    modeled_table: object
    n_anchors: int = 20
    coverage: float = 50.0
    rounds: int = 15
    attack_rate: float = 0.7
    coordinated: bool = False
    frame_period: int = 10
    magd_cfg: object = None
    tad_cfg: object = None


@dataclass
class EffectivenessPoint:
    p_a: float
    a_t: float
    mode: str
    strategy: str
    mean_err_noad: float
    mean_err_tad: float
    se_noad: float
    se_tad: float
    e: float
    e_d: float
    p_d: float
    p_f: float
    crlb_floor: float


@dataclass
class EffectivenessReport:
    baseline_err: float
    baseline_se: float
    trials: int
    points: list


def _shell_radii(n, coverage, rng):
    # uniform in the spherical shell [1, coverage]
    r3 = rng.uniform(1.0, coverage ** 3, size=n)
    return np.cbrt(r3)


def _effectiveness_trial(setup: EffectivenessSetup, mode, n_mal, detector, rng):
    """One trial of the round-based analysis scenario.

    Returns (mean localization error, (flagged&corrupt, missed&corrupt,
    flagged&honest, passed&honest) confusion counts).
    """
    from . import defense as defense_mod
    from .errormodel import measure_distances
    from .estimators import Beacon, MagdConfig, MagdState, magd_step, weights_from_sigma

    magd_cfg = setup.magd_cfg or MagdConfig()
    tad_cfg = setup.tad_cfg or defense_mod.TadConfig()
    n = setup.n_anchors
    ledger = defense_mod.ReputationLedger(owner_id=-1)
    state = None
    errors = []
    tp = fn = fp = tn = 0
    block = round(setup.attack_rate * setup.frame_period)
    for t in range(setup.rounds):
        radii = _shell_radii(n, setup.coverage, rng)
        dirs = rng.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        true_pos = radii[:, None] * dirs
        lo, hi = setup.profile.sigma_p_range
        sigma_p = rng.uniform(lo, hi, size=n)
        reported = true_pos + rng.normal(size=(n, 3)) * (sigma_p / math.sqrt(3.0))[:, None]
        d_meas = measure_distances(radii, setup.path_loss, rng)
        beacons = [Beacon(i, reported[i], sigma_p[i], d_meas[i]) for i in range(n)]

        if setup.coordinated:
            attack_now = (t % setup.frame_period) < block
            attackers = set(range(n_mal)) if attack_now else set()
        else:
            attackers = {i for i in range(n_mal) if rng.random() < setup.attack_rate}
        corrupted = set()
        if attack_param(mode) > 0:
            for i in sorted(attackers):
                beacons[i] = corrupt_beacon(beacons[i], mode, rng)
                corrupted.add(i)

        sigma_f = defense_mod.sigma_f_for_beacons(setup.dist_table, beacons, tad_cfg)
        w = weights_from_sigma(sigma_f)
        mu = setup.dist_table.mu_at([b.measured_distance for b in beacons])
        if detector:
            reps = np.array([ledger.get(b.anchor_id) for b in beacons])
        else:
            reps = None
        if state is None:
            centroid = np.mean([b.reported_position for b in beacons], axis=0)
            state = MagdState(p_hat=centroid)
        state = magd_step(state, beacons, reps, w, magd_cfg, mu_f=mu)
        errors.append(float(np.linalg.norm(state.p_hat)))

        if detector:
            _, flags = defense_mod.tad_update(
                ledger, state.p_hat, beacons, setup.dist_table, tad_cfg)
            for b in beacons:
                flagged = flags[b.anchor_id]
                if b.anchor_id in corrupted:
                    tp += flagged
                    fn += not flagged
                else:
                    fp += flagged
                    tn += not flagged
    return float(np.mean(errors)), (tp, fn, fp, tn)


def _grid_point(setup, mode, p_a, detector_on, trials, seed_seq):
    n_mal = round(p_a * setup.n_anchors / setup.attack_rate) if p_a > 0 else 0
    n_mal = min(n_mal, setup.n_anchors)
    errs_noad, errs_tad = [], []
    tp = fn = fp = tn = 0
    children = seed_seq.spawn(trials)
    for i in range(trials):
        rng = np.random.default_rng(children[i])
        err, _ = _effectiveness_trial(setup, mode, n_mal, False, rng)
        errs_noad.append(err)
        if detector_on:
            rng = np.random.default_rng(children[i].spawn(1)[0])
            err_d, conf = _effectiveness_trial(setup, mode, n_mal, True, rng)
            errs_tad.append(err_d)
            tp, fn, fp, tn = tp + conf[0], fn + conf[1], fp + conf[2], tn + conf[3]
    mean_noad = float(np.mean(errs_noad))
    se_noad = float(np.std(errs_noad) / math.sqrt(trials))
    if detector_on:
        mean_tad = float(np.mean(errs_tad))
        se_tad = float(np.std(errs_tad) / math.sqrt(trials))
        p_d = tp / (tp + fn) if tp + fn else 0.0
        p_f = fp / (fp + tn) if fp + tn else 0.0
    else:
        mean_tad, se_tad, p_d, p_f = math.nan, math.nan, math.nan, math.nan
    realized_p_a = n_mal * setup.attack_rate / setup.n_anchors
    return realized_p_a, mean_noad, se_noad, mean_tad, se_tad, p_d, p_f


def measure_effectiveness(setup: EffectivenessSetup, mode: AttackMode, plan_grid,
                          detector, trials, rng):
    """Monte Carlo attack effectiveness over a grid of (p_a, A_t) points.

    E is the mean error inflation over the no-attack baseline; with the
    detector active E_d, P_d and P_f are measured as well, plus the
    information floor of the bound with N(1 - p_a P_d - P_f) anchors.
    """
    if trials < 1:
        raise UsageError("need at least one trial")
    from .crlb import closed_form_crlb

    seed_seq = np.random.SeedSequence(rng.integers(0, 2 ** 63))
    base_p_a, base_err, base_se, *_ = _grid_point(
        setup, with_param(mode, 0.0), 0.0, False, trials, seed_seq.spawn(1)[0])
    del base_p_a
    sigma_m_clean = float(
        np.sqrt(setup.dist_table.sigma_at(setup.coverage * 2 / 3) ** 2
                + np.mean(np.square(setup.profile.sigma_p_range))))
    points = []
    children = seed_seq.spawn(len(list(plan_grid)))
    strategy = "coordinated" if setup.coordinated else "random"
    for (p_a, a_t), child in zip(plan_grid, children):
        m = with_param(mode, a_t)
        realized_p_a, mean_noad, se_noad, mean_tad, se_tad, p_d, p_f = _grid_point(
            setup, m, p_a, detector, trials, child)
        if detector and not math.isnan(p_d):
            n_eff = setup.n_anchors * max(1.0 - realized_p_a * p_d - p_f, 1e-6)
            floor = closed_form_crlb(sigma_m_clean, max(n_eff, 1.0))
        else:
            floor = math.nan
        points.append(EffectivenessPoint(
            p_a=realized_p_a, a_t=a_t, mode=type(m).__name__.lower(),
            strategy=strategy,
            mean_err_noad=mean_noad, mean_err_tad=mean_tad,
            se_noad=se_noad, se_tad=se_tad,
            e=mean_noad - base_err,
            e_d=(mean_tad - base_err) if detector else math.nan,
            p_d=p_d, p_f=p_f, crlb_floor=floor))
    return EffectivenessReport(baseline_err=base_err, baseline_se=base_se,
                               trials=trials, points=points)


@dataclass
class OptimizeResult:
    a_opt: float
    e_d_opt: float
    p_d_at_opt: float
    at_boundary: bool
    p_d_near_half: bool


def optimize_attack_param(setup: EffectivenessSetup, mode: AttackMode, p_a,
                          search_grid, trials, rng):
    """Grid search for the attack magnitude maximizing detected effectiveness.

    Only meaningful for a resource-constrained adversary (p_a < 0.5). The
    measured P_d at the optimum is reported together with whether it falls in
    [0.35, 0.65], the neighborhood of the theoretical P_d = 1/2 condition.
    """
    grid = [float(a) for a in search_grid]
    if not grid:
        raise UsageError("search grid must be non-empty")
    if not 0 <= p_a < 0.5:
        raise DomainError("optimization assumes a resource-constrained p_a < 0.5")
    report = measure_effectiveness(
        setup, mode, [(p_a, a) for a in grid], True, trials, rng)
    e_ds = [pt.e_d for pt in report.points]
    best = int(np.argmax(e_ds))
    pt = report.points[best]
    return OptimizeResult(
        a_opt=grid[best], e_d_opt=pt.e_d, p_d_at_opt=pt.p_d,
        at_boundary=best in (0, len(grid) - 1),
        p_d_near_half=0.35 <= pt.p_d <= 0.65)
