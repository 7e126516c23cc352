import math

import numpy as np
import pytest

from sensesec.channels import (
    CommChannel,
    ScenarioConfig,
    build_scenario,
    build_sensing_stats,
    dbm_to_watt,
    default_loading,
    parse_config_file,
    sample_rician_channel,
    steering_vector,
)
from sensesec.linalg import RngState, commutation_matrix


class TestSteering:
    def test_broadside_all_ones(self):
        v = steering_vector(math.pi / 2, 4)
        assert np.allclose(v, np.ones(4), atol=1e-12)

    def test_endfire(self):
        v = steering_vector(0.0, 2)
        assert np.allclose(v, [1.0, np.exp(-1j * np.pi)])

    def test_unit_modulus_and_phase_increment(self):
        v = steering_vector(math.pi / 3, 6)
        assert np.allclose(np.abs(v), 1.0)
        phases = np.unwrap(np.angle(v))
        incs = np.diff(phases)
        assert np.allclose(incs, -np.pi * math.cos(math.pi / 3), atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            steering_vector(-0.1, 4)
        with pytest.raises(ValueError):
            steering_vector(math.pi + 0.1, 4)


class TestRician:
    def cfg(self, **kw):
        return ScenarioConfig(**kw)

    def test_los_only_limit(self):
        cfg = self.cfg(rician_factors=(float("inf"),) * 3)
        ch = sample_rician_channel(cfg, 0, RngState(0))
        assert np.array_equal(ch.vector, steering_vector(cfg.user_angles[0], cfg.n_tx))

    def test_zero_factor_zero_mean(self):
        cfg = self.cfg(rician_factors=(0.0,) * 3)
        draws = np.stack([
            sample_rician_channel(cfg, 0, RngState(0).child(str(i))).vector
            for i in range(10_000)
        ])
        mean_norm = np.linalg.norm(draws.mean(axis=0))
        assert mean_norm < 0.05 * math.sqrt(cfg.n_tx)

    def test_expected_energy(self):
        cfg = self.cfg(rician_factors=(1.0,) * 3, n_tx=6)
        energies = [
            np.linalg.norm(sample_rician_channel(cfg, 1, RngState(1).child(str(i))).vector) ** 2
            for i in range(10_000)
        ]
        assert abs(np.mean(energies) - 6.0) < 0.3

    def test_negative_factor_rejected(self):
        with pytest.raises(ValueError):
            CommChannel(vector=np.ones(4), rician_factor=-1.0, angle=1.0)


class TestSensingStats:
    def test_single_target_rank_one(self):
        stats = build_sensing_stats([math.radians(60)], [1.0], n_rx=2, n_tx=6,
                                    loading=0.0, noise_power=1.0)
        assert abs(stats.eigvals[0] - 12.0) < 1e-9
        assert np.all(np.abs(stats.eigvals[1:]) < 1e-9)

    def test_no_targets_identity(self):
        stats = build_sensing_stats([], [], n_rx=2, n_tx=3, loading=1.0,
                                    noise_power=1.0)
        assert np.allclose(stats.cov, np.eye(6))
        assert np.allclose(stats.eigvals, 1.0)

    def test_two_targets_rank_two(self):
        stats = build_sensing_stats([math.radians(50), math.radians(110)],
                                    [1.0, 0.7], n_rx=2, n_tx=4, loading=0.0,
                                    noise_power=1.0)
        rank = int(np.sum(stats.eigvals > 1e-9 * stats.eigvals[0]))
        assert rank == 2

    def test_block_partition_identity(self):
        # sum_i P_i R* P_i^H equals U^H K (I kron R*) K^T U for random PSD R.
        rng = np.random.default_rng(5)
        stats = build_sensing_stats([0.9, 1.8], [1.0, 0.5], n_rx=3, n_tx=4,
                                    loading=1e-3, noise_power=1.0)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        r = a @ a.conj().T
        lhs = sum(p @ r.conj() @ p.conj().T for p in stats.blocks)
        k = commutation_matrix(4, 3)
        kron = np.kron(np.eye(3), r.conj())
        rhs = stats.eigvecs.conj().T @ k @ kron @ k.T @ stats.eigvecs
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_blocks_stack_to_unitary(self):
        stats = build_sensing_stats([1.0], [1.0], n_rx=2, n_tx=3, loading=1e-3,
                                    noise_power=1.0)
        p = np.hstack(stats.blocks)
        assert np.max(np.abs(p @ p.conj().T - np.eye(6))) < 1e-10

    def test_legit_eve_same_inputs_differ_only_label_noise(self):
        a = build_sensing_stats([1.0], [2.0], 2, 4, 1e-3, 1.0, label="legitimate")
        b = build_sensing_stats([1.0], [2.0], 2, 4, 1e-3, 2.5, label="eve")
        assert np.array_equal(a.cov, b.cov)
        assert np.array_equal(a.eigvals, b.eigvals)
        assert a.label != b.label and a.noise_power != b.noise_power

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            build_sensing_stats([1.0, 2.0], [1.0], 2, 4, 0.0, 1.0)

    def test_default_loading(self):
        assert default_loading([], [], 2, 6) == 1.0
        assert abs(default_loading([1.0], [1.0], 2, 6) - 1e-3) < 1e-15


class TestScenarioConfig:
    def test_defaults_valid(self):
        cfg = ScenarioConfig()
        assert cfg.n_tx == 6 and cfg.n_users == 3
        assert len(cfg.sinr_targets) == 3
        assert len(cfg.user_angles) == 3

    def test_scalar_broadcast(self):
        cfg = ScenarioConfig(n_users=4, sinr_targets=(50.0,), rician_factors=(3.0,))
        assert cfg.sinr_targets == (50.0,) * 4
        assert cfg.rician_factors == (3.0,) * 4

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(power_budget=-1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(penalty_growth=0.5)
        with pytest.raises(ValueError):
            ScenarioConfig(n_users=2, sinr_targets=(10.0, 20.0, 30.0))

    def test_hash_stable_and_sensitive(self):
        a, b = ScenarioConfig(), ScenarioConfig()
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != a.replace(seed=2).config_hash()

    def test_config_file_roundtrip(self, tmp_path):
        path = tmp_path / "scenario.cfg"
        path.write_text(
            "# sample scenario\n"
            "n_tx = 6\n"
            "n_users = 3\n"
            "power_budget_dbm = 30\n"
            "sinr_db = 20\n"
            "eve_mi_cap_nats = 5.0\n"
            "user_angles_deg = 40, 90, 140\n"
            "noise_comm = 1e-5\n"
            "seed = 7\n"
        )
        cfg = ScenarioConfig.from_file(path)
        assert abs(cfg.power_budget - 1.0) < 1e-12
        assert np.allclose(cfg.sinr_targets, 100.0)
        assert cfg.seed == 7
        assert abs(cfg.user_angles[1] - math.pi / 2) < 1e-12

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("nonsense = 12\n")
        with pytest.raises(ValueError):
            ScenarioConfig.from_file(path)

    def test_parse_errors(self, tmp_path):
        path = tmp_path / "bad2.cfg"
        path.write_text("n_tx 6\n")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_dbm_conversion(self):
        assert abs(dbm_to_watt(30.0) - 1.0) < 1e-15
        assert abs(dbm_to_watt(10.0) - 0.01) < 1e-15


def test_build_scenario_deterministic():
    cfg = ScenarioConfig(seed=3)
    ch1, sr1, se1 = build_scenario(cfg, RngState(cfg.seed))
    ch2, sr2, se2 = build_scenario(cfg, RngState(cfg.seed))
    for a, b in zip(ch1, ch2):
        assert np.array_equal(a.vector, b.vector)
    assert np.array_equal(sr1.cov, sr2.cov)
    assert np.array_equal(se1.eigvals, se2.eigvals)
    assert sr1.n_rx == cfg.n_rx and se1.n_rx == cfg.n_eve
