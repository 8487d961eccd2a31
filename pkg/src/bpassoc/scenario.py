"""Single-scan grid tracking scenarios and their association weights.

Targets sit on a regular grid. Each track's prior covariance comes from
running a constant-velocity Kalman filter for a number of steps with
random missed detections, then predicting one step ahead; the prior mean
is the true state perturbed by that covariance. One scan is simulated
with Bernoulli detections, Gaussian position noise and uniform Poisson
clutter over a box that covers every gate.

State vectors are ``[x, vx, y, vy]``; measurements are ``[x, y]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NumericalError, ParseError, SingularInnovation
from .model import WeightMatrix
from .rng import stream

POSITION = np.kron(np.eye(2), np.array([[1.0, 0.0]]))


def cv_transition(T: float) -> np.ndarray:
    return np.kron(np.eye(2), np.array([[1.0, T], [0.0, 1.0]]))


def cv_process_noise(q: float, T: float) -> np.ndarray:
    return q * np.kron(np.eye(2), np.array([[T**3 / 3, T**2 / 2], [T**2 / 2, T]]))


@dataclass(frozen=True)
class SensorModel:
    p_d: float
    lambda_fa: float
    r_meas: float
    existence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_d <= 1.0:
            raise DomainError(f"p_d must lie in [0, 1], got {self.p_d}")
        if not self.lambda_fa > 0:
            raise DomainError(f"false-alarm intensity must be positive, got {self.lambda_fa}")
        if not self.r_meas > 0:
            raise DomainError(f"measurement variance must be positive, got {self.r_meas}")
        if not 0.0 < self.existence <= 1.0:
            raise DomainError(f"existence must lie in (0, 1], got {self.existence}")

    @property
    def R(self) -> np.ndarray:
        return self.r_meas * np.eye(2)

    def weight_scale(self) -> float:
        """``r P_d / (lambda (1 - r P_d))``, the factor in front of every likelihood."""
        rp = self.existence * self.p_d
        if not rp < 1.0:
            raise DomainError("association weights need existence * p_d < 1")
        return rp / (self.lambda_fa * (1.0 - rp))


@dataclass(frozen=True, eq=False)
class TrackPrior:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        cov = np.array(self.covariance, dtype=float).reshape(4, 4)
        if np.max(np.abs(cov - cov.T)) > 1e-10:
            raise DomainError("prior covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise DomainError("prior covariance is not positive definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def predicted_measurement(self) -> np.ndarray:
        return POSITION @ self.mean

    def innovation_covariance(self, R: np.ndarray) -> np.ndarray:
        return POSITION @ self.covariance @ POSITION.T + R


@dataclass(frozen=True, eq=False)
class Scan:
    measurements: np.ndarray
    truth_assignment: tuple[int, ...] | None = None  # 1-based measurement per target, 0 = missed

    def __post_init__(self):
        z = np.array(self.measurements, dtype=float).reshape(-1, 2)
        z.setflags(write=False)
        object.__setattr__(self, "measurements", z)

    def __len__(self):
        return len(self.measurements)


class Region(NamedTuple):
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def preinit_covariance(
    q: float, T_step: float, r_meas: float, p_d: float, steps: int, rng: np.random.Generator
) -> np.ndarray:
    """Posterior covariance after ``steps`` predict / maybe-update cycles from zero."""
    if not (q > 0 and T_step > 0 and r_meas > 0):
        raise DomainError("q, T_step and r_meas must be positive")
    if steps < 0:
        raise DomainError("steps must be non-negative")
    F = cv_transition(T_step)
    Q = cv_process_noise(q, T_step)
    H = POSITION
    R = r_meas * np.eye(2)
    P = np.zeros((4, 4))
    for _ in range(steps):
        P = F @ P @ F.T + Q
        if rng.random() < p_d:
            K = P @ H.T @ np.linalg.inv(H @ P @ H.T + R)
            P = P - K @ H @ P
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P).min() < -1e-12 * max(1.0, np.abs(P).max()):
            raise NumericalError("covariance lost positive semi-definiteness")
    return P


def predict_covariance(P: np.ndarray, q: float, T_step: float) -> np.ndarray:
    F = cv_transition(T_step)
    out = F @ P @ F.T + cv_process_noise(q, T_step)
    return 0.5 * (out + out.T)


def grid_positions(rows: int, cols: int, spacing: float) -> np.ndarray:
    return np.array(
        [[r * spacing, c * spacing] for r in range(rows) for c in range(cols)], dtype=float
    ).reshape(-1, 2)


def build_grid_scenario(
    rows: int,
    cols: int,
    spacing: float,
    sensor: SensorModel,
    q: float = 0.01,
    T_step: float = 1.0,
    steps: int = 30,
    seed: int = 0,
    trial: int = 0,
) -> tuple[np.ndarray, list[TrackPrior]]:
    """True grid positions and one noisy prior per target."""
    if rows < 1 or cols < 1:
        raise DomainError("grid needs at least one row and one column")
    if spacing < 0:
        raise DomainError("spacing must be non-negative")
    truths = grid_positions(rows, cols, spacing)
    priors = []
    for k, (x, y) in enumerate(truths):
        P = preinit_covariance(q, T_step, sensor.r_meas, sensor.p_d, steps, stream(seed, trial, "preinit", k))
        P = predict_covariance(P, q, T_step)
        noise = np.linalg.cholesky(P) @ stream(seed, trial, "prior-mean", k).standard_normal(4)
        priors.append(TrackPrior(np.array([x, 0.0, y, 0.0]) + noise, P))
    return truths, priors


def gate_threshold(exclusion_prob: float) -> float:
    """Squared Mahalanobis gate that drops a true 2-d measurement with the given probability."""
    if not 0.0 < exclusion_prob < 1.0:
        raise DomainError(f"exclusion probability must lie in (0, 1), got {exclusion_prob}")
    return -2.0 * math.log(exclusion_prob)


def false_alarm_region(
    priors: Sequence[TrackPrior], sensor: SensorModel, gate: float, margin: float = 1.0
) -> Region:
    """Axis-aligned box covering every gate (as a circle of the major-axis radius) plus a margin."""
    lo = np.full(2, np.inf)
    hi = np.full(2, -np.inf)
    for p in priors:
        S = p.innovation_covariance(sensor.R)
        radius = math.sqrt(gate * np.linalg.eigvalsh(S).max())
        c = p.predicted_measurement
        lo = np.minimum(lo, c - radius)
        hi = np.maximum(hi, c + radius)
    return Region(lo[0] - margin, hi[0] + margin, lo[1] - margin, hi[1] + margin)


def simulate_scan(
    truths: np.ndarray, sensor: SensorModel, gate_region: Region, rng: np.random.Generator
) -> Scan:
    truths = np.asarray(truths, dtype=float).reshape(-1, 2)
    n = len(truths)
    detected = rng.random(n) < sensor.p_d
    target_z = truths[detected] + math.sqrt(sensor.r_meas) * rng.standard_normal((int(detected.sum()), 2))
    n_fa = rng.poisson(sensor.lambda_fa * gate_region.area)
    fa = np.column_stack(
        [rng.uniform(gate_region.x0, gate_region.x1, n_fa), rng.uniform(gate_region.y0, gate_region.y1, n_fa)]
    )
    z = np.concatenate([target_z, fa.reshape(-1, 2)], axis=0)
    order = rng.permutation(len(z))
    z = z[order]
    slot = np.empty(len(z), dtype=int)
    slot[order] = np.arange(len(z))
    assignment = [0] * n
    for k, i in enumerate(np.flatnonzero(detected)):
        assignment[i] = int(slot[k]) + 1
    return Scan(z, tuple(assignment))


def compute_weights(
    priors: Sequence[TrackPrior], scan: Scan, sensor: SensorModel, gate: float
) -> WeightMatrix:
    """Gated single-target association weights for one scan."""
    scale = sensor.weight_scale()
    z = scan.measurements
    psi = np.zeros((len(priors), len(z)))
    for i, p in enumerate(priors):
        S = p.innovation_covariance(sensor.R)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularInnovation(f"innovation covariance of track {i + 1} is singular") from None
        if not len(z):
            continue
        v = np.linalg.solve(L, (z - p.predicted_measurement).T)
        d2 = np.sum(v * v, axis=0)
        density = np.exp(-0.5 * d2) / (2.0 * math.pi * np.prod(np.diag(L)))
        psi[i] = np.where(d2 <= gate, scale * density, 0.0)
    return WeightMatrix(psi)


def _gauss2(x: np.ndarray, cov: np.ndarray) -> float:
    sol = np.linalg.solve(cov, x)
    return float(np.exp(-0.5 * x @ sol) / (2.0 * math.pi * math.sqrt(np.linalg.det(cov))))


def expected_w(priors: Sequence[TrackPrior], truths: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """Expected row sum of the weight matrix for each track, ignoring gating.

    The weight of a measurement at ``z`` is the scaled predicted-measurement
    density, so its expectation integrates that density against the
    measurement intensity: uniform clutter plus a Gaussian bump of mass
    ``P_d`` at every true target.
    """
    scale = sensor.weight_scale()
    truths = np.asarray(truths, dtype=float).reshape(-1, 2)
    out = np.empty(len(priors))
    for i, p in enumerate(priors):
        S = p.innovation_covariance(sensor.R)
        yhat = p.predicted_measurement
        overlap = sum(sensor.p_d * _gauss2(yhat - y, S + sensor.R) for y in truths)
        out[i] = scale * (sensor.lambda_fa + overlap)
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    truths: np.ndarray
    priors: list[TrackPrior]
    sensor: SensorModel
    gate: float
    scan: Scan = field(default_factory=lambda: Scan(np.zeros((0, 2))))

    def weights(self) -> WeightMatrix:
        return compute_weights(self.priors, self.scan, self.sensor, self.gate)


_FMT = "%.17g"


def _line(values) -> str:
    return " ".join(_FMT % float(v) for v in values)


def dump_scenario(s: Scenario) -> str:
    n = len(s.priors)
    m = len(s.scan)
    sen = s.sensor
    out = [f"{n} {m} " + _line([sen.p_d, sen.lambda_fa, sen.r_meas, sen.existence, s.gate])]
    out += [_line(t) for t in np.asarray(s.truths).reshape(-1, 2)]
    out += [_line(p.mean) for p in s.priors]
    out += [_line(p.covariance.ravel()) for p in s.priors]
    out += [_line(z) for z in s.scan.measurements]
    return "\n".join(out) + "\n"


def load_scenario(text: str) -> Scenario:
    lines = text.rstrip("\n").split("\n")

    def floats(k, count):
        if k >= len(lines):
            raise ParseError("unexpected end of scenario", line=k + 1)
        parts = lines[k].split()
        if len(parts) != count:
            raise ParseError(f"expected {count} values, found {len(parts)}", line=k + 1)
        try:
            return [float(x) for x in parts]
        except ValueError:
            raise ParseError(f"non-numeric value in {lines[k]!r}", line=k + 1) from None

    head = lines[0].split() if lines else []
    if len(head) != 7:
        raise ParseError("header must hold n m p_d lambda_fa r_meas existence gate", line=1)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("non-integer target/measurement count", line=1) from None
    p_d, lam, r, ex, gate = floats(0, 7)[2:]
    k = 1
    truths = [floats(k + i, 2) for i in range(n)]
    k += n
    means = [floats(k + i, 4) for i in range(n)]
    k += n
    covs = [floats(k + i, 16) for i in range(n)]
    k += n
    z = [floats(k + i, 2) for i in range(m)]
    k += m
    if any(ln.strip() for ln in lines[k:]):
        raise ParseError("trailing content", line=k + 1)
    priors = [TrackPrior(np.array(mu), np.array(c).reshape(4, 4)) for mu, c in zip(means, covs)]
    return Scenario(
        truths=np.array(truths, dtype=float).reshape(-1, 2),
        priors=priors,
        sensor=SensorModel(p_d, lam, r, ex),
        gate=gate,
        scan=Scan(np.array(z, dtype=float).reshape(-1, 2)),
    )


def make_trial_scenario(
    rows: int,
    cols: int,
    spacing: float,
    sensor: SensorModel,
    exclusion_prob: float = 1e-4,
    q: float = 0.01,
    T_step: float = 1.0,
    steps: int = 30,
    seed: int = 0,
    trial: int = 0,
) -> Scenario:
    """Grid scenario plus one simulated scan, all drawn from the trial's streams."""
    truths, priors = build_grid_scenario(rows, cols, spacing, sensor, q, T_step, steps, seed, trial)
    gate = gate_threshold(exclusion_prob)
    region = false_alarm_region(priors, sensor, gate)
    scan = simulate_scan(truths, sensor, region, stream(seed, trial, "scan"))
    return Scenario(truths, priors, sensor, gate, scan)
