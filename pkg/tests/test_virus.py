import numpy as np
import pytest

from multivirus_defense.errors import AlreadyInfected, ConfigError, TooManyViruses
from multivirus_defense.virus import (
    VirusModel,
    coexisting,
    competing,
    dump_model,
    from_rates,
    parse_model,
    submasks,
    with_competition,
)


def test_realizable_sets():
    assert coexisting([1.0, 2.0]).realizable_sets() == [1, 2, 3]
    assert competing([1.0, 2.0]).realizable_sets() == [1, 2]
    assert competing([1.0, 1.0, 1.0]).realizable_sets() == [1, 2, 4]


def test_infect_target_competing_replaces():
    model = competing([1.0, 2.0])
    assert model.infect_target(0b01, 1) == 0b10
    assert model.infect_target(0, 0) == 0b01


def test_infect_target_coexisting_adds():
    model = coexisting([1.0, 2.0])
    assert model.infect_target(0b01, 1) == 0b11
    with pytest.raises(AlreadyInfected):
        model.infect_target(0b01, 0)


def test_predecessors():
    model = competing([1.0, 2.0])
    assert sorted(model.predecessors(0b10)) == [(0b00, 1), (0b01, 1)]
    assert sorted(coexisting([1.0, 2.0]).predecessors(0b11)) == [(0b01, 1), (0b10, 0)]


def test_submasks():
    assert sorted(submasks(0b101)) == [0, 1, 4, 5]


def test_rate_table_zero_on_members():
    model = coexisting([1.0, 2.0])
    assert model.lam[0].tolist() == [1.0, 2.0]
    assert model.lam[0b01, 0] == 0.0
    assert model.lam[0b01, 1] == 2.0


def test_summary_statistics():
    model = from_rates([1.0, 2.0], mu=[4.0, 4.0])
    assert model.lam_hat == pytest.approx(3.0)
    assert model.lam_max == pytest.approx(2.0)
    assert model.lam_min == pytest.approx(1.0)
    assert model.p_max == pytest.approx(0.5)
    assert model.p_min == pytest.approx(0.25)
    assert model.mu_min == pytest.approx(4.0)
    assert model.p_max_v(0) == pytest.approx(0.25)


def test_per_virus_statistics_follow_overrides():
    model = VirusModel(
        names=("a", "b"), mu=np.array([2.0, 2.0]), compete=(0, 0),
        p_default=np.array([0.5, 0.25]), overrides={(0b10, 0): 0.9},
    )
    assert model.lam_max_v(0) == pytest.approx(1.8)
    assert model.p_max_v(0) == pytest.approx(0.9)
    assert model.p_min_v(0) == pytest.approx(0.5)
    assert model.p_min_v(1) == pytest.approx(0.25)
    assert model.p_max == pytest.approx(0.9)
    assert model.lam_min == pytest.approx(0.5)


def test_membership_matrix():
    H = coexisting([1.0, 1.0]).membership()
    assert H.tolist() == [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]


def test_with_competition_partial():
    model = with_competition([1.0, 1.0, 1.0], [(0, 1)])
    assert model.realizable_sets() == [1, 2, 4, 5, 6]


def test_overrides_change_one_entry():
    base = coexisting([1.0, 2.0])
    model = VirusModel(
        names=base.names, mu=base.mu, compete=base.compete, p_default=base.p_default,
        overrides={(0b01, 1): 0.5},
    )
    assert model.p(0b01, 1) == pytest.approx(0.5)
    assert model.lam[0, 1] == pytest.approx(2.0)


def test_too_many_viruses():
    with pytest.raises(TooManyViruses):
        from_rates(np.ones(17))


def test_scaled_model():
    model = from_rates([1.0, 2.0]).scaled(2.0)
    assert model.lam[0].tolist() == [2.0, 4.0]


MODEL_TEXT = """
competition = [["worm", "bot"]]

[[virus]]
name = "worm"
mu = 2.0
p = 0.5

[[virus]]
name = "bot"
mu = 4.0
p = 0.25
"""


def test_parse_model():
    model = parse_model(MODEL_TEXT)
    assert model.names == ("worm", "bot")
    assert model.realizable_sets() == [1, 2]
    assert model.lam[0].tolist() == [1.0, 1.0]


def test_model_dump_parses_back():
    model = parse_model(MODEL_TEXT)
    again = parse_model(dump_model(model))
    assert again == model
    assert np.array_equal(again.lam, model.lam)


def test_parse_model_unknown_key():
    with pytest.raises(ConfigError) as excinfo:
        parse_model("colour = 1\n" + MODEL_TEXT)
    assert excinfo.value.field == "colour"


def test_parse_model_unknown_virus():
    with pytest.raises(ConfigError):
        parse_model(MODEL_TEXT.replace('["worm", "bot"]', '["worm", "trojan"]'))
