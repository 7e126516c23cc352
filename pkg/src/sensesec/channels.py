"""Scenario configuration, Rician communication channels, and sensing
statistics (target-response covariances with their eigenstructure) for the
legitimate radar receiver and the eavesdropper.

Powers are stored in watts and SINR targets as linear ratios; dB/dBm appear
only at the config-file and report boundaries.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .linalg import (
    RngState,
    commutation_matrix,
    hermitian_eig,
    require_hermitian,
    sample_complex_gaussian,
    vec,
)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 30.0 + 10.0 * np.log10(np.asarray(w, dtype=float))


def steering_vector(angle, n):
    """ULA steering vector at half-wavelength spacing.

    Entry m is exp(-j*pi*m*cos(angle)), m = 0..n-1; all entries unit modulus.
    """
    if not 0.0 <= angle <= math.pi:
        raise ValueError(f"angle {angle} outside [0, pi]")
    m = np.arange(n)
    return np.exp(-1j * np.pi * m * np.cos(angle))


@dataclass(frozen=True)
class CommChannel:
    """One user's downlink channel draw."""

    vector: np.ndarray      # (n_tx,) complex gains
    rician_factor: float
    angle: float            # LoS angle of arrival, radians

    def __post_init__(self):
        if self.rician_factor < 0:
            raise ValueError("Rician factor must be nonnegative")


@dataclass(frozen=True)
class SensingStats:
    """Second-order statistics of one receiver's target response.

    ``blocks`` is the column partition of U^H K (one block per receive
    antenna), which turns Kronecker-structured quadratic forms in the
    transmit covariance into small per-antenna products.
    """

    label: str              # "legitimate" | "eve"
    noise_power: float      # watts
    n_rx: int
    n_tx: int
    cov: np.ndarray         # (n_rx*n_tx, n_rx*n_tx) Hermitian PSD
    eigvals: np.ndarray     # descending, nonnegative
    eigvecs: np.ndarray     # unitary
    blocks: tuple           # n_rx arrays of shape (n_rx*n_tx, n_tx)

    @property
    def dim(self):
        return self.n_rx * self.n_tx


def stats_from_covariance(cov, n_rx, n_tx, noise_power, label="legitimate"):
    """SensingStats for a given target-response covariance: eigenstructure
    plus the receive-antenna block partition of U^H K."""
    cov = require_hermitian(cov, name="target covariance")
    if cov.shape[0] != n_rx * n_tx:
        raise ValueError(f"covariance dim {cov.shape[0]} != n_rx*n_tx "
                         f"= {n_rx * n_tx}")
    eigvals, eigvecs = hermitian_eig(cov)
    if eigvals[-1] < -1e-9 * max(eigvals[0], 1.0):
        raise ValueError("target covariance is not PSD")
    eigvals = np.clip(eigvals, 0.0, None)
    # Orientation fixed by A kron I_rx = K (I_rx kron A) K^T for this K.
    k = commutation_matrix(n_tx, n_rx)
    p = eigvecs.conj().T @ k
    blocks = tuple(p[:, i * n_tx:(i + 1) * n_tx].copy() for i in range(n_rx))
    return SensingStats(label=label, noise_power=float(noise_power), n_rx=n_rx,
                        n_tx=n_tx, cov=cov, eigvals=eigvals, eigvecs=eigvecs,
                        blocks=blocks)


def build_sensing_stats(angles, gains, n_rx, n_tx, loading, noise_power,
                        label="legitimate"):
    """Point-target response covariance plus diagonal loading.

    The covariance is sum_m gain_m^2 * v_m v_m^H + loading*I with
    v_m = vec(a_rx(theta_m) a_tx(theta_m)^T); its eigenstructure and the
    receive-antenna block partition are precomputed for MI evaluation.
    """
    angles = tuple(float(a) for a in np.atleast_1d(angles))
    gains = tuple(float(g) for g in np.atleast_1d(gains))
    if len(angles) != len(gains):
        raise ValueError("angles and gains must have equal length")
    if loading < 0:
        raise ValueError("diagonal loading must be nonnegative")
    if not angles and loading == 0:
        raise ValueError("need at least one target or positive loading")
    dim = n_rx * n_tx
    cov = np.zeros((dim, dim), dtype=complex)
    for theta, beta in zip(angles, gains):
        v = vec(np.outer(steering_vector(theta, n_rx), steering_vector(theta, n_tx)))
        cov += (beta ** 2) * np.outer(v, v.conj())
    cov += loading * np.eye(dim)
    return stats_from_covariance(cov, n_rx, n_tx, noise_power, label=label)


def default_loading(angles, gains, n_rx, n_tx, fraction=1e-3):
    """Loading at a fixed fraction of the mean raw eigenvalue (1 if no targets)."""
    angles = np.atleast_1d(angles)
    gains = np.atleast_1d(gains)
    if angles.size == 0:
        return 1.0
    trace = float(np.sum(np.asarray(gains) ** 2)) * n_rx * n_tx
    return fraction * trace / (n_rx * n_tx)


# Config keys that the flat config file expresses in dB/dBm/degrees; all
# other numerics are taken verbatim.
_FILE_KEYS = {
    "n_tx": int, "n_rx": int, "n_eve": int, "n_users": int, "frame_len": int,
    "power_budget_dbm": float, "sinr_db": tuple, "eve_mi_cap_nats": float,
    "noise_comm": float, "noise_radar": float, "noise_eve": float,
    "rician_k": tuple, "user_angles_deg": tuple,
    "radar_target_angles_deg": tuple, "radar_target_gains": tuple,
    "eve_target_angles_deg": tuple, "eve_target_gains": tuple,
    "penalty_init": float, "penalty_growth": float, "max_outer_iters": int,
    "tol_obj_nats": float, "tol_penalty": float, "sinr_margin": float,
    "an_samples": int, "an_frame_len": int, "seed": int,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one scenario.

    Stored units: watts, linear SINR, radians, nats.
    """

    n_tx: int = 6
    n_rx: int = 2
    n_eve: int = 2
    n_users: int = 3
    frame_len: int = 30
    power_budget: float = 1.0                 # watts (30 dBm)
    sinr_targets: tuple = (100.0, 100.0, 100.0)   # linear (20 dB)
    eve_mi_cap: float = 5.0                   # nats
    noise_comm: float = 1e-5                  # watts
    noise_radar: float = 1.0                  # watts
    noise_eve: float = 1.0                    # watts
    rician_factors: tuple = (2.0, 2.0, 2.0)
    user_angles: tuple = ()                   # radians; auto-spread when empty
    radar_target_angles: tuple = (math.radians(60.0),)
    radar_target_gains: tuple = (1.0,)
    eve_target_angles: tuple = (math.radians(30.0),)
    eve_target_gains: tuple = (1.0,)
    penalty_init: float = 1e-3
    penalty_growth: float = 3.0
    max_outer_iters: int = 30
    tol_obj_nats: float = 1e-3
    tol_penalty: float = 1e-6
    sinr_margin: float = 1e-4                 # relative tightening inside subproblems
    an_samples: int = 100
    an_frame_len: int = 30
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sinr_targets",
                           _per_user(self.sinr_targets, self.n_users, "sinr_targets"))
        object.__setattr__(self, "rician_factors",
                           _per_user(self.rician_factors, self.n_users, "rician_factors"))
        angles = self.user_angles or _spread_angles(self.n_users)
        object.__setattr__(self, "user_angles",
                           _per_user(angles, self.n_users, "user_angles"))
        self.validate()

    def validate(self):
        if min(self.n_tx, self.n_rx, self.n_eve, self.n_users) < 1:
            raise ValueError("antenna and user counts must be >= 1")
        if self.frame_len < 1 or self.an_frame_len < 1:
            raise ValueError("frame length must be >= 1")
        for name in ("power_budget", "eve_mi_cap", "noise_comm", "noise_radar",
                     "noise_eve", "penalty_init", "tol_obj_nats", "tol_penalty"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if any(g <= 0 for g in self.sinr_targets):
            raise ValueError("SINR targets must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty growth factor must exceed 1")
        if len(self.radar_target_angles) != len(self.radar_target_gains):
            raise ValueError("radar target angles/gains length mismatch")
        if len(self.eve_target_angles) != len(self.eve_target_gains):
            raise ValueError("eve target angles/gains length mismatch")
        if self.an_samples < 1:
            raise ValueError("an_samples must be >= 1")

    def replace(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    def config_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_file_dict(cls, raw):
        """Build from flat config-file keys (dBm/dB/degrees at the boundary)."""
        raw = dict(raw)
        unknown = set(raw) - set(_FILE_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        n_users = int(raw.get("n_users", cls.n_users))
        for key in ("n_tx", "n_rx", "n_eve", "n_users", "frame_len",
                    "penalty_init", "penalty_growth", "max_outer_iters",
                    "tol_obj_nats", "tol_penalty", "sinr_margin",
                    "an_samples", "an_frame_len", "seed",
                    "noise_comm", "noise_radar", "noise_eve"):
            if key in raw:
                kw[key] = _FILE_KEYS[key](raw[key])
        if "power_budget_dbm" in raw:
            kw["power_budget"] = float(dbm_to_watt(raw["power_budget_dbm"]))
        if "eve_mi_cap_nats" in raw:
            kw["eve_mi_cap"] = float(raw["eve_mi_cap_nats"])
        if "sinr_db" in raw:
            vals = _as_tuple(raw["sinr_db"])
            kw["sinr_targets"] = tuple(float(db_to_linear(v)) for v in vals)
        if "rician_k" in raw:
            kw["rician_factors"] = _as_tuple(raw["rician_k"])
        if "user_angles_deg" in raw:
            kw["user_angles"] = tuple(math.radians(v) for v in _as_tuple(raw["user_angles_deg"]))
        for prefix in ("radar", "eve"):
            akey, gkey = f"{prefix}_target_angles_deg", f"{prefix}_target_gains"
            if akey in raw:
                kw[f"{prefix}_target_angles"] = tuple(
                    math.radians(v) for v in _as_tuple(raw[akey]))
            if gkey in raw:
                kw[f"{prefix}_target_gains"] = _as_tuple(raw[gkey])
        kw.setdefault("n_users", n_users)
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        return cls.from_file_dict(parse_config_file(path))


def _as_tuple(val):
    if isinstance(val, (list, tuple)):
        return tuple(float(v) for v in val)
    return (float(val),)


def _per_user(values, n_users, name):
    vals = _as_tuple(values)
    if len(vals) == 1:
        vals = vals * n_users
    if len(vals) != n_users:
        raise ValueError(f"{name} needs 1 or {n_users} entries, got {len(vals)}")
    return vals


def _spread_angles(n_users):
    # Users evenly placed over (30, 150) degrees, away from array endfire.
    degs = np.linspace(40.0, 140.0, n_users)
    return tuple(math.radians(d) for d in degs)


def parse_config_file(path):
    """Read a flat ``key = value`` config file (lists comma-separated)."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            parts = [p.strip() for p in val.split(",") if p.strip()]
            if len(parts) > 1:
                raw[key] = [float(p) for p in parts]
            else:
                raw[key] = _parse_scalar(parts[0] if parts else "")
    return raw


def _parse_scalar(token):
    if token == "":
        raise ValueError("empty config value")
    try:
        as_float = float(token)
    except ValueError as exc:
        raise ValueError(f"cannot parse config value {token!r}") from exc
    if as_float == int(as_float) and ("." not in token and "e" not in token.lower()):
        return int(as_float)
    return as_float


RICIAN_CAP = 1e12


def sample_rician_channel(cfg, user, rng):
    """Draw user ``user``'s Rician channel: K/(K+1)-weighted LoS plus CN(0,1)
    scattering.  An (effectively) infinite Rician factor returns the pure
    LoS steering vector."""
    k_factor = cfg.rician_factors[user]
    angle = cfg.user_angles[user]
    los = steering_vector(angle, cfg.n_tx)
    if k_factor >= RICIAN_CAP or math.isinf(k_factor):
        return CommChannel(vector=los, rician_factor=min(k_factor, RICIAN_CAP),
                           angle=angle)
    nlos = sample_complex_gaussian(rng, np.zeros(cfg.n_tx), np.eye(cfg.n_tx))
    h = math.sqrt(k_factor / (k_factor + 1.0)) * los \
        + math.sqrt(1.0 / (k_factor + 1.0)) * nlos
    return CommChannel(vector=h, rician_factor=k_factor, angle=angle)


def sample_user_channels(cfg, rng):
    return [sample_rician_channel(cfg, k, rng.child(f"user{k}"))
            for k in range(cfg.n_users)]


def build_scenario(cfg, rng):
    """Realize one scenario: user channels plus both receivers' sensing stats."""
    channels = sample_user_channels(cfg, rng.child("channels"))
    load_r = default_loading(cfg.radar_target_angles, cfg.radar_target_gains,
                             cfg.n_rx, cfg.n_tx)
    load_e = default_loading(cfg.eve_target_angles, cfg.eve_target_gains,
                             cfg.n_eve, cfg.n_tx)
    stats_r = build_sensing_stats(cfg.radar_target_angles, cfg.radar_target_gains,
                                  cfg.n_rx, cfg.n_tx, load_r, cfg.noise_radar,
                                  label="legitimate")
    stats_e = build_sensing_stats(cfg.eve_target_angles, cfg.eve_target_gains,
                                  cfg.n_eve, cfg.n_tx, load_e, cfg.noise_eve,
                                  label="eve")
    return channels, stats_r, stats_e


def sample_target_response(stats, rng, size=None):
    """Draw vec(H) ~ CN(0, cov) and reshape to (n_rx, n_tx) response matrices."""
    draws = sample_complex_gaussian(rng, np.zeros(stats.dim), stats.cov, size=size)
    if size is None:
        return draws.reshape(stats.n_rx, stats.n_tx, order="F")
    return np.stack([d.reshape(stats.n_rx, stats.n_tx, order="F") for d in draws])
