"""Layered velocity pipeline: goal pull, safety filter, tracking feedback."""
import numpy as np
import pytest

import layersafe as ls
from conftest import error_starts


def single_disk():
    return ls.min_distance_barrier(
        ls.ObstacleField(centers=[[-0.1, 0.3]], radii=[0.5])
    )


def test_gains_validation():
    with pytest.raises(ls.ConfigurationError, match="gains.k_p"):
        ls.Gains(k_p=0.0, k_d=8.0, alpha=0.5)
    with pytest.raises(ls.ConfigurationError, match="gains.k_d"):
        ls.Gains(k_p=1.8, k_d=-1.0, alpha=0.5)
    with pytest.raises(ls.ConfigurationError, match="gains.alpha"):
        ls.Gains(k_p=1.8, k_d=8.0, alpha=float("nan"))


def test_desired_velocity_formula():
    goal = np.array([2.0, 0.0])
    z = np.array([0.9, 0.3])
    zd = ls.desired_velocity(goal, 1.8, z)
    assert np.allclose(zd, [1.98, -0.54], atol=1e-15)
    zs = np.array([[0.9, 0.3], [2.0, 0.0]])
    zds = ls.desired_velocity(goal, 1.8, zs)
    assert np.allclose(zds, [[1.98, -0.54], [0.0, 0.0]], atol=1e-15)


def test_safe_velocity_known_correction():
    # z with h = 0.5 and outward normal (1, 0): pushing straight at the disk
    # with speed 1 exceeds the budget alpha*h = 0.25, so the filter adds 0.75
    b = single_disk()
    z = np.array([0.9, 0.3])
    z_dot_d = np.array([-1.0, 0.0])
    z_s, active = ls.safe_velocity(b, 0.5, z, z_dot_d)
    assert np.allclose(z_s, [-0.25, 0.0], atol=1e-14)
    assert bool(active)


def test_safe_velocity_inactive_is_identity():
    b = single_disk()
    rng = np.random.default_rng(0)
    z = rng.uniform(-3, 3, size=(2000, 2))
    z = z[b.field.center_distances(z)[:, 0] > 0.05]
    zd = rng.uniform(-4, 4, size=(z.shape[0], 2))
    zs, active = ls.safe_velocity(b, 0.5, z, zd)
    h = b.value(z)
    n = b.gradient(z)
    feasible = np.einsum("ij,ij->i", n, zd) + 0.5 * h >= 0
    assert np.array_equal(np.asarray(active), ~feasible)
    assert np.array_equal(zs[feasible], zd[feasible])


def test_safe_velocity_residual_nonnegative():
    # the defining half-space constraint holds after filtering, everywhere
    b = single_disk()
    rng = np.random.default_rng(1)
    z = rng.uniform(-3, 3, size=(100_000, 2))
    z = z[b.field.center_distances(z)[:, 0] > 0.05]
    zd = rng.uniform(-4, 4, size=(z.shape[0], 2))
    for alpha in (0.5, 1.0, 5.0):
        zs, _active = ls.safe_velocity(b, alpha, z, zd)
        res = np.einsum("ij,ij->i", b.gradient(z), zs) + alpha * b.value(z)
        assert float(np.min(res)) >= -1e-9


def test_safe_velocity_is_minimal_change():
    # the correction is along the constraint normal only: tangential
    # components pass through untouched
    b = single_disk()
    rng = np.random.default_rng(2)
    z = rng.uniform(-3, 3, size=(500, 2))
    z = z[b.field.center_distances(z)[:, 0] > 0.05]
    zd = rng.uniform(-4, 4, size=(z.shape[0], 2))
    zs, active = ls.safe_velocity(b, 0.7, z, zd)
    n = b.gradient(z)
    tang = np.stack([-n[:, 1], n[:, 0]], axis=1)
    assert np.allclose(
        np.einsum("ij,ij->i", tang, zs), np.einsum("ij,ij->i", tang, zd), atol=1e-12
    )
    # active rows land exactly on the constraint boundary
    res = np.einsum("ij,ij->i", n, zs) + 0.7 * b.value(z)
    assert np.allclose(res[np.asarray(active)], 0.0, atol=1e-12)


def test_tracking_control_formula():
    u = ls.tracking_control(8.0, np.array([1.0, 2.0]), np.array([0.5, -1.0]))
    assert np.allclose(u, [-4.0, -24.0], atol=1e-15)


def test_assembled_law_consistency():
    scn = ls.load_scenario(ls.bundled_scenario_path("two_disks.scn"))
    b = ls.build_barrier(scn)
    law = ls.build_law(scn, b)
    rng = np.random.default_rng(3)
    x = rng.uniform(-2, 2, size=(300, 4))
    keep = np.min(b.field.center_distances(x[:, :2]), axis=-1) > 0.05
    x = x[keep]
    inter = law.intermediate(x)
    zd_direct = ls.desired_velocity(law.goal, law.gains.k_p, x[:, :2])
    assert np.array_equal(np.asarray(inter.z_dot_d), zd_direct)
    zs_direct, act_direct = ls.safe_velocity(b, law.gains.alpha, x[:, :2], zd_direct)
    assert np.array_equal(np.asarray(inter.z_dot_s), zs_direct)
    assert np.array_equal(np.asarray(inter.active), np.asarray(act_direct))
    u = law.u_of_x(x)
    u_direct = ls.tracking_control(law.gains.k_d, x[:, 2:4], zs_direct)
    assert np.array_equal(np.asarray(u), u_direct)


def test_certified_envelope_constants():
    env = ls.linear_tracking_constants(1.8, 8.0)
    assert env.beta == pytest.approx(2.735088935932648, rel=1e-13)
    assert env.m_overshoot == pytest.approx(1.00001, rel=1e-9)
    # position feedback off: the error loop decays at exactly k_d
    env0 = ls.linear_tracking_constants(0.0, 8.0)
    assert env0.beta == pytest.approx(8.0, rel=1e-12)
    assert env0.m_overshoot == pytest.approx(1.00001, rel=1e-9)


def test_envelope_requires_decay():
    with pytest.raises(ls.NoCertificateError):
        ls.linear_tracking_constants(1.8, -1.0)


def test_certified_envelope_holds_on_rollout(linear):
    scn, pair, law = linear["scn"], linear["pair"], linear["law"]
    rng = np.random.default_rng(4)
    angles = rng.uniform(0, 2 * np.pi, size=16)
    mags = rng.uniform(0.1, 2.0, size=16)
    e0 = np.stack([mags * np.cos(angles), mags * np.sin(angles)], axis=1)
    batch = ls.integrate_batch(pair, law, error_starts(law, e0), scn.integrator)
    env = ls.linear_tracking_constants(1.8, 8.0)
    for k in range(batch.n_runs):
        traj = batch.trajectory(k)
        assert ls.check_exponential_envelope(traj, env.beta, env.m_overshoot).holds
        # the broader pair used by the bundled scenario is also an envelope
        assert ls.check_exponential_envelope(traj, 2.45, 3.24).holds
