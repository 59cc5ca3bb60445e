"""Scenario parsing, canonical echoes and digests, and initial-state modes."""
import numpy as np
import pytest

import layersafe as ls

MINIMAL = """\
start = -1.0, 0.25
goal = 2.0, 0.0
obstacle.1.center = 0.5, 0.1
obstacle.1.radius = 0.4
gains.kp = 1.8
gains.kd = 8.0
gains.alpha = 0.5
"""

# regression stamps for the shipped scenario files; any edit to them is loud
TWO_DISKS_DIGEST = "59edab5dc3ecba04021f6e1c2e0e6adc4ae5563fc30c26ca1f189db074f1c73e"
OPEN_FIELD_DIGEST = "5128ab6a8b9aca9a2129bb932223a56342ce55434dd802da25eb7cbf71d5baf6"


def test_minimal_scenario_defaults():
    scn = ls.parse_scenario(MINIMAL, name="mini")
    assert scn.name == "mini"
    assert np.array_equal(scn.start, [-1.0, 0.25])
    assert np.array_equal(scn.goal, [2.0, 0.0])
    assert scn.field.count == 1
    rc = scn.rtf_constants
    assert (rc.a1, rc.a2, rc.beta, rc.tau, rc.m_overshoot) == (1.0, 1.0, 2.45, 1.0, 3.24)
    assert scn.integrator.dt == 1e-3
    assert scn.integrator.horizon == 10.0
    assert scn.velocity_mode == "safe"
    assert scn.disturbance.kind == "none"
    assert scn.expectations == ()
    # default certify box hulls start, goal, and padded obstacles
    assert np.allclose(scn.certify_lower, [-1.0, -0.8], atol=1e-12)
    assert np.allclose(scn.certify_upper, [2.0, 1.0], atol=1e-12)
    assert scn.rcbf_hypothesis_ok
    with pytest.raises(AttributeError):
        scn.velocity_mode = "zero"
    with pytest.raises(ValueError):
        scn.start[0] = 9.9


def test_digest_ignores_formatting_but_not_values():
    scn = ls.parse_scenario(MINIMAL)
    noisy = "# a comment\n\n" + MINIMAL.replace(" = ", "   =  ") + "\n# trailing\n"
    assert ls.parse_scenario(noisy).digest() == scn.digest()
    changed = ls.parse_scenario(MINIMAL.replace("0.4", "0.41"))
    assert changed.digest() != scn.digest()
    # expectations are part of the stamped configuration
    with_exp = ls.parse_scenario(MINIMAL + "expect.min_h >= 0.0\n")
    assert with_exp.digest() != scn.digest()


def test_resolved_lines_round_trip():
    text = MINIMAL + "disturbance.kind = sine\ndisturbance.amplitude = 0.05\n"
    scn = ls.parse_scenario(text)
    echoed = "\n".join(scn.resolved_lines()) + "\n"
    again = ls.parse_scenario(echoed)
    assert again.digest() == scn.digest()
    assert again.resolved_lines() == scn.resolved_lines()


def test_bundled_scenarios_are_pinned(two_disks, open_field):
    assert two_disks.digest() == TWO_DISKS_DIGEST
    assert open_field.digest() == OPEN_FIELD_DIGEST
    assert two_disks.field.count == 2
    assert open_field.disturbance.kind == "sine"
    # both ship with at least one declared expectation
    assert two_disks.expectations and open_field.expectations


def test_round_trip_preserves_bundled_digests(two_disks, open_field):
    for scn in (two_disks, open_field):
        echoed = "\n".join(scn.resolved_lines()) + "\n"
        assert ls.parse_scenario(echoed).digest() == scn.digest()


def test_parse_error_line_numbers():
    with pytest.raises(ls.ScenarioError, match="line 3.*unknown key") as ei:
        ls.parse_scenario("start = 0, 0\ngoal = 1, 0\nbogus.key = 3\n")
    assert ei.value.line == 3
    with pytest.raises(ls.ScenarioError, match="duplicate key") as ei:
        ls.parse_scenario("start = 0, 0\nstart = 1, 1\n")
    assert ei.value.line == 2
    with pytest.raises(ls.ScenarioError, match="expected a number") as ei:
        ls.parse_scenario("gains.kp = brisk\n")
    assert ei.value.line == 1
    with pytest.raises(ls.ScenarioError, match="expected two comma-separated"):
        ls.parse_scenario("start = 1.0\n")
    with pytest.raises(ls.ScenarioError, match="must be finite"):
        ls.parse_scenario("gains.kp = inf\n")
    with pytest.raises(ls.ScenarioError, match="empty value") as ei:
        ls.parse_scenario("goal =\n")
    assert ei.value.line == 1
    with pytest.raises(ls.ScenarioError, match="expected 'key = value'"):
        ls.parse_scenario("just some words\n")


def test_expectation_parse_errors():
    with pytest.raises(ls.ScenarioError, match="unknown expectation metric") as ei:
        ls.parse_scenario(MINIMAL + "expect.bogus >= 1\n")
    assert ei.value.line == 8
    with pytest.raises(ls.ScenarioError, match="unknown comparison"):
        ls.parse_scenario(MINIMAL + "expect.min_h ~ 1\n")
    with pytest.raises(ls.ScenarioError, match="expect.<metric> <op> <value>"):
        ls.parse_scenario(MINIMAL + "expect.min_h >=\n")
    scn = ls.parse_scenario(MINIMAL + "expect.min_h >= 0.25\nexpect.max_edot < 2\n")
    assert [e.metric for e in scn.expectations] == ["min_h", "max_edot"]
    e = scn.expectations[0]
    assert e.check(0.25) and e.check(1.0)
    assert not e.check(0.2)
    assert not e.check(float("nan"))


def test_missing_pieces():
    with pytest.raises(ls.ScenarioError, match="missing required key 'goal'") as ei:
        ls.parse_scenario("start = 0, 0\n")
    assert ei.value.line is None
    with pytest.raises(ls.ScenarioError, match="at least one obstacle"):
        ls.parse_scenario(
            "start = 0, 0\ngoal = 1, 0\ngains.kp = 1\ngains.kd = 4\ngains.alpha = 1\n"
        )
    with pytest.raises(ls.ScenarioError, match="obstacle.2.radius is missing"):
        ls.parse_scenario(MINIMAL + "obstacle.2.center = 3, 3\n")
    with pytest.raises(ls.ScenarioError, match="sim.initial_velocity must be one of"):
        ls.parse_scenario(MINIMAL + "sim.initial_velocity = sideways\n")
    with pytest.raises(ls.ScenarioError, match="disturbance.kind must be"):
        ls.parse_scenario(MINIMAL + "disturbance.kind = gusts\n")


def test_obstacle_indices_sort_numerically():
    text = MINIMAL + (
        "obstacle.10.center = 5, 5\nobstacle.10.radius = 0.3\n"
        "obstacle.2.center = -2, -2\nobstacle.2.radius = 0.2\n"
    )
    scn = ls.parse_scenario(text)
    assert np.array_equal(scn.field.centers, [[0.5, 0.1], [-2, -2], [5, 5]])
    assert np.array_equal(scn.field.radii, [0.4, 0.2, 0.3])
    with pytest.raises(ls.ScenarioError, match="duplicate key 'obstacle.1.radius'"):
        ls.parse_scenario(MINIMAL + "obstacle.1.radius = 0.5\n")


def test_with_variants_do_not_mutate(two_disks):
    base_digest = two_disks.digest()
    hot = two_disks.with_alpha(5.0)
    assert hot.gains.alpha == 5.0
    assert hot.gains.k_p == two_disks.gains.k_p
    assert not hot.rcbf_hypothesis_ok
    assert two_disks.gains.alpha == 0.5 and two_disks.rcbf_hypothesis_ok
    short = two_disks.with_horizon(2.0)
    assert short.integrator.horizon == 2.0
    assert short.integrator.dt == two_disks.integrator.dt
    quiet = two_disks.with_disturbance(ls.DisturbanceSpec())
    assert quiet.disturbance.kind == "none"
    rest = two_disks.with_velocity_mode("zero")
    assert rest.velocity_mode == "zero"
    assert two_disks.digest() == base_digest
    with pytest.raises(ls.ConfigurationError):
        two_disks.with_alpha(-1.0)
    with pytest.raises(ls.ConfigurationError):
        two_disks.with_velocity_mode("sideways")


def test_initial_state_modes(two_disks, td):
    law = td["law"]
    scn = two_disks
    x0 = ls.initial_state(scn, law)
    assert x0.shape == (4,)
    assert np.array_equal(x0[:2], scn.start)
    # the scenario declares a safe start: zero initial tracking error
    im = law.intermediate(x0[None, :])
    assert np.array_equal(im.z_dot_s[0], x0[2:])

    rest = ls.initial_state(scn, law, mode="zero")
    assert np.array_equal(rest[2:], [0.0, 0.0])

    pull = ls.initial_state(scn, law, mode="desired")
    want = scn.gains.k_p * (scn.goal - scn.start)
    assert np.allclose(pull[2:], want, atol=1e-12)

    # near an obstacle the filter bends the start velocity away from it
    z_near = scn.field.centers[0] + [0.0, scn.field.radii[0] + 0.05]
    safe = ls.initial_state(scn, law, z0=z_near, mode="safe")
    des = ls.initial_state(scn, law, z0=z_near, mode="desired")
    assert not np.allclose(safe[2:], des[2:], atol=1e-6)

    batch = ls.initial_states(scn, law, np.array([[0.0, 0.0], [1.0, 1.0]]))
    assert batch.shape == (2, 4)
    with pytest.raises(ls.ConfigurationError):
        ls.initial_states(scn, law, np.zeros((3, 3)))
    with pytest.raises(ls.ConfigurationError):
        ls.initial_state(scn, law, mode="sideways")


def test_bundled_path_and_load_errors(tmp_path):
    assert ls.bundled_scenario_path("two_disks.scn").is_file()
    with pytest.raises(ls.ScenarioError, match="no bundled scenario"):
        ls.bundled_scenario_path("nosuch.scn")
    with pytest.raises(ls.ScenarioError, match="no such scenario file"):
        ls.load_scenario(tmp_path / "missing.scn")
    p = tmp_path / "ok.scn"
    p.write_text(MINIMAL)
    assert ls.load_scenario(p).name == "ok.scn"
