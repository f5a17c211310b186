import numpy as np
import pytest

from contention_lqg.network import (ABSTRACTED, FULL, NetworkConfig,
                                    resolve_slot, resolve_slot_abstracted)


def test_sole_transmitter_wins():
    out = resolve_slot([1, 0, 0])
    assert out.sigma.tolist() == [True, False, False]
    assert out.rho.tolist() == [True, False, False]


def test_collision_destroys_all_payloads():
    out = resolve_slot([1, 1, 0])
    assert not out.sigma.any()
    assert not out.rho[0] and not out.rho[1]


def test_idle_slot_leaves_channel_free():
    out = resolve_slot([0, 0, 0, 0])
    assert not out.sigma.any()
    assert out.rho.all()


def test_at_most_one_winner_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(500):
        delta = rng.random(6) < rng.random()
        out = resolve_slot(delta)
        assert int(out.sigma.sum()) <= 1
        # availability seen by loop i: nobody else transmits
        for i in range(6):
            others = np.delete(delta, i)
            assert out.rho[i] == (not others.any())


def test_abstracted_degenerate_availability():
    rng = np.random.default_rng(1)
    for _ in range(50):
        rho, sigma = resolve_slot_abstracted(True, 1.0, rng)
        assert rho and sigma
        rho, sigma = resolve_slot_abstracted(True, 0.0, rng)
        assert not sigma


def test_abstracted_success_rate():
    rng = np.random.default_rng(2)
    hits = sum(resolve_slot_abstracted(True, 0.5, rng)[1]
               for _ in range(100_000))
    assert abs(hits / 100_000 - 0.5) < 0.01


def test_abstracted_draw_consumed_every_slot():
    # rho is drawn even when the loop stays silent, keeping streams aligned
    rng_a = np.random.default_rng(3)
    rng_b = np.random.default_rng(3)
    for _ in range(20):
        resolve_slot_abstracted(False, 0.5, rng_a)
        resolve_slot_abstracted(True, 0.5, rng_b)
    assert rng_a.random() == rng_b.random()


def test_network_config_validation():
    with pytest.raises(ValueError, match="mode"):
        NetworkConfig(mode="ring")
    with pytest.raises(ValueError, match="q"):
        NetworkConfig(mode=ABSTRACTED, q=1.5)
    with pytest.raises(ValueError, match="m >= 1"):
        NetworkConfig(mode=FULL, m=0)


def test_full_mode_success_rate_matches_product_form(scalar_params):
    # m constant-rate loops contending: loop i succeeds with rate
    # p_i * prod_{j != i} (1 - p_j).
    from contention_lqg.network import NetworkConfig
    from contention_lqg.simulator import (ExperimentConfig, LoopSpec,
                                          run_episode)
    ps = [0.2, 0.3, 0.4]
    cfg = ExperimentConfig(
        loops=[LoopSpec(params=scalar_params, policy="pst", p=p) for p in ps],
        network=NetworkConfig(mode=FULL, m=3),
        horizon=20_000, runs=1, master_seed=0)
    records = run_episode(cfg, 0)
    for i, p in enumerate(ps):
        eta = p * np.prod([1.0 - pj for j, pj in enumerate(ps) if j != i])
        se = np.sqrt(eta * (1.0 - eta) / cfg.horizon)
        assert abs(records[i].success_freq - eta) < 3.0 * se
        se_p = np.sqrt(p * (1.0 - p) / cfg.horizon)
        assert abs(records[i].trigger_freq - p) < 3.0 * se_p
