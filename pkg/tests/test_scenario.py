import numpy as np
import pytest

from multivirus_defense.errors import ConfigError
from multivirus_defense.scenario import (
    ScenarioRegistry,
    load_scenario,
    parse_scenario,
    prepare,
    run_scenario,
    serialize_scenario,
)

BUILTINS = [
    "fig3-coexist",
    "fig3-compete",
    "fig4a-adaptive-patch",
    "fig5a-adaptive-filter",
    "fig5b-nonmono",
    "oracle-path3",
    "static-design",
]

TINY_STATIC = """
name = "tiny-static"

[network]
kind = "path"
n = 4

[model]
lambdas = [1.0]

[seeding]
prob = 0.5

[defense]
beta = 2.0

[run]
horizon = 1.0
grid_points = 11
trials = 50
random_states = 200
"""


def test_minimal_scenario_defaults():
    s = parse_scenario('name = "tiny"\n')
    assert s.run.h == 1e-3
    assert s.run.trials == 100
    assert s.run.kind == "static"
    assert s.network.kind == "erdos_renyi"
    assert s.seeding.prob == 0.4
    assert s.model.lambdas == [1.0, 2.0]
    assert len(s.grid) == 101


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as excinfo:
        parse_scenario('name = "x"\n\n[defense]\nbetas = 3.0\n')
    assert excinfo.value.field == "defense.betas"
    assert excinfo.value.line == 4
    assert "betas" in str(excinfo.value)


def test_unknown_section_is_named():
    with pytest.raises(ConfigError) as excinfo:
        parse_scenario('name = "x"\n[defence]\nbeta = 3.0\n')
    assert excinfo.value.field == "defence"


@pytest.mark.parametrize(
    "text, field",
    [
        ('name = "x"\n[run]\nhorizon = "long"\n', "run.horizon"),
        ('name = "x"\n[run]\nhorizon = -1.0\n', "run.horizon"),
        ('name = "x"\n[seeding]\nprob = 1.5\n', "seeding.prob"),
        ('name = "x"\n[run]\nkind = "adaptive"\n', "defense.controller"),
        ('name = "x"\n[defense]\nbeta_law = "uniform"\n', "defense.beta_max"),
        ('name = "x"\n[run]\nkind = "design"\n', "defense.eps"),
        ('name = "x"\n[run]\ntrials = 2.5\n', "run.trials"),
    ],
)
def test_invalid_values(text, field):
    with pytest.raises(ConfigError) as excinfo:
        parse_scenario(text)
    assert excinfo.value.field == field


def test_missing_name():
    with pytest.raises(ConfigError):
        parse_scenario("[run]\nhorizon = 1.0\n")


def test_invalid_toml():
    with pytest.raises(ConfigError):
        parse_scenario("name = ")


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_round_trip(name):
    scenario = ScenarioRegistry.get(name)
    assert parse_scenario(serialize_scenario(scenario)) == scenario


def test_load_scenario(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_STATIC)
    scenario = load_scenario(path)
    assert scenario.name == "tiny-static"
    assert scenario.source_dir == tmp_path
    assert load_scenario("fig3-coexist").name == "fig3-coexist"
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.toml")


def test_missing_network_file(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text('name = "x"\n[network]\nkind = "file"\nfile = "nowhere.txt"\n')
    with pytest.raises(ConfigError) as excinfo:
        prepare(load_scenario(path))
    assert excinfo.value.field == "network.file"


class TestScenarioRegistry:
    def setup_method(self):
        self._original = ScenarioRegistry._scenarios.copy()

    def teardown_method(self):
        ScenarioRegistry._scenarios = self._original

    def test_builtins_are_registered(self):
        assert ScenarioRegistry.names() == sorted(BUILTINS)

    def test_get_returns_fresh_copy(self):
        first = ScenarioRegistry.get("fig3-coexist")
        first.run.trials = 1
        assert ScenarioRegistry.get("fig3-coexist").run.trials == 100

    def test_register_replaces_with_warning(self):
        ScenarioRegistry.register("tiny", TINY_STATIC)
        with pytest.warns(UserWarning):
            ScenarioRegistry.register("tiny", TINY_STATIC)
        assert "tiny" in ScenarioRegistry.names()

    def test_register_rejects_invalid(self):
        with pytest.raises(ConfigError):
            ScenarioRegistry.register("bad", 'name = "bad"\ncolour = 1\n')
        assert "bad" not in ScenarioRegistry.names()

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            ScenarioRegistry.get("fig9")


def test_uniform_draws_are_reproducible():
    scenario = ScenarioRegistry.get("fig5b-nonmono")
    a, b = prepare(scenario), prepare(scenario)
    assert np.array_equal(a.seeding, b.seeding)
    assert np.array_equal(a.beta0, b.beta0)
    assert np.all((a.beta0 >= 1e-3) & (a.beta0 <= 0.2))
    assert np.all(a.seeding <= 1.0)


def test_static_run_is_deterministic(tmp_path):
    scenario = parse_scenario(TINY_STATIC)
    first = run_scenario(scenario, tmp_path / "a")
    run_scenario(scenario, tmp_path / "b")

    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == [
        "tiny-static-aggregate.csv",
        "tiny-static-markov.csv",
        "tiny-static-meanfield.csv",
        "tiny-static.json",
    ]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    checks = first.report.checks
    assert checks["aggregate_dominates_subset"]
    assert checks["storage_decrement_trajectory"]
    assert checks["storage_decrement_random_states"]


def test_clean_start_stays_clean():
    scenario = parse_scenario(TINY_STATIC.replace("prob = 0.5", "prob = 0.0"))
    outcome = run_scenario(scenario)
    assert outcome.frames["meanfield"]["mean_frac_any"].eq(0.0).all()
    assert outcome.frames["markov"]["mean_frac_any"].eq(0.0).all()


def test_design_run():
    scenario = parse_scenario(
        """
name = "tiny-design"

[network]
kind = "path"
n = 3

[model]
lambdas = [1.0]

[defense]
eps = [0.5, 1.0]
form = "conservative"
negative_clique = 6

[run]
kind = "design"
horizon = 3.0
grid_points = 31
monte_carlo = false
"""
    )
    outcome = run_scenario(scenario)
    checks = outcome.report.checks
    assert checks["feasible[eps=0.5]"] and checks["feasible[eps=1]"]
    assert checks["decay_envelope[eps=1]"]
    assert checks["cost_nondecreasing_in_eps"]
    assert checks["negative_control_detected"]
    assert list(outcome.frames["design"].columns) == ["host", "beta_eps=0.5", "beta_eps=1"]


def test_adaptive_run():
    scenario = parse_scenario(
        """
name = "tiny-adaptive"

[network]
kind = "cycle"
n = 4

[model]
lambdas = [1.0]

[seeding]
prob = 0.5

[defense]
beta = 0.5
controller = "monotone"
alpha = 5.0
sweep = [2.0, 5.0]

[run]
kind = "adaptive"
horizon = 20.0
grid_points = 41
h = 0.01
monte_carlo = false
"""
    )
    outcome = run_scenario(scenario)
    checks = outcome.report.checks
    assert checks["removed[alpha=5]"]
    assert checks["beta_nondecreasing[alpha=2]"] and checks["beta_nondecreasing[alpha=5]"]
    assert checks["storage_nonincreasing[alpha=5]"]
    assert set(outcome.frames) == {"meanfield-alpha=2", "meanfield-alpha=5"}
    names = [b.name for b in outcome.report.bounds]
    assert "final_patch_sum_bound_from_initial" in names


def test_oracle_run():
    scenario = parse_scenario(
        """
name = "tiny-oracle"

[network]
kind = "path"
n = 2

[model]
lambdas = [1.0, 2.0]
competing = true

[seeding]
prob = 0.6

[defense]
beta = 1.0

[run]
kind = "oracle"
horizon = 1.0
grid_points = 5
trials = 200
"""
    )
    outcome = run_scenario(scenario)
    assert outcome.report.checks["master_equation_mass"]
    assert set(outcome.frames) == {"master", "markov"}


def test_filter_run_asserts_virus_count_bound():
    scenario = parse_scenario(
        """
name = "tiny-filter"

[network]
kind = "cycle"
n = 4

[model]
lambdas = [1.0, 2.0]
mu = [4.0, 4.0]

[seeding]
prob = 0.4

[defense]
beta = 10.0
q = 0.01
controller = "filter"
gamma = 0.001

[run]
kind = "adaptive"
horizon = 5.0
grid_points = 51
monte_carlo = false
"""
    )
    bounds = {b.name: b for b in run_scenario(scenario).report.bounds}
    hard = bounds["q_final_bound"]
    assert hard.hard
    assert hard.bound == pytest.approx(0.5 + 2 * 0.001 * 4 * 2 / 10.0)
    assert hard.satisfied
    assert not bounds["q_final_bound_mu_weighted"].hard
