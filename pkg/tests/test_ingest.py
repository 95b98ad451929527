import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tennis_dqr.ingest import (
    FILTER_STEPS, DegenerateMatchError, FilterConfig, IngestError, Observation, RawMatch,
    explode_to_observations, filter_matches, fingerprint_observations, ingest,
    is_incomplete, loss_paradox_rate, parse_match_csv, parse_match_dir, read_observations,
    relative_points, tour_loss_paradox_rate, tournament_type, write_observations,
)

from atp_fixture import HEADER, random_rows, row, write_corpus, write_csv


def match(**kw) -> RawMatch:
    base = dict(
        tourney_id="2010-1", tourney_level="A", surface="Hard", tourney_date=dt.date(2010, 1, 5),
        winner_name="Roger Federer", loser_name="Player A", winner_rank=1, loser_rank=50,
        score="6-4 6-4", minutes=90, w_svpt=80, w_1stWon=40, w_2ndWon=20,
        l_svpt=80, l_1stWon=30, l_2ndWon=10, tourney_name="Somewhere Open", source="f:2",
    )
    base.update(kw)
    return RawMatch(**base)


# --- parsing -----------------------------------------------------------------

def test_header_only_file_gives_no_rows(tmp_path):
    p = write_csv(tmp_path / "atp_matches_2010.csv", [])
    res = parse_match_csv(p)
    assert res.matches == [] and res.errors == []


def test_empty_minutes_stays_missing(tmp_path):
    p = write_csv(tmp_path / "m.csv", [row(minutes="")])
    (m,) = parse_match_csv(p).matches
    assert m.minutes is None
    assert m.w_svpt == 80


def test_row_count_matches_line_count(tmp_path):
    rows = random_rows(np.random.default_rng(1), 250)
    p = write_csv(tmp_path / "atp_matches_2010.csv", rows)
    data_lines = len(p.read_text().splitlines()) - 1
    res = parse_match_csv(p)
    assert len(res.matches) + len(res.errors) == data_lines
    assert len(res.matches) == data_lines


def test_malformed_rows_are_collected_and_skipped(tmp_path):
    rows = [row(), row(minutes="abc"), row(tourney_date="20101340"),
            row(w_1stWon=70, w_2ndWon=20), row(winner_rank=0), row()]
    p = write_csv(tmp_path / "m.csv", rows)
    res = parse_match_csv(p)
    assert len(res.matches) == 2
    assert [e.source for e in res.errors] == ["m.csv:3", "m.csv:4", "m.csv:5", "m.csv:6"]
    assert "w_svpt" in res.errors[2].message


def test_short_row_is_reported(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(",".join(HEADER) + "\n" + "a,b,c\n")
    res = parse_match_csv(p)
    assert res.matches == [] and len(res.errors) == 1


def test_missing_column_is_fatal(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("tourney_id,surface\n1,Hard\n")
    with pytest.raises(IngestError, match="missing columns"):
        parse_match_csv(p)


def test_unreadable_file_is_fatal(tmp_path):
    with pytest.raises(IngestError):
        parse_match_csv(tmp_path / "nope.csv")


def test_latin1_file_is_decoded(tmp_path):
    p = tmp_path / "m.csv"
    text = ",".join(HEADER) + "\n" + ",".join(row(loser_name="Jos\xe9 Ac\xe1suso")[c] for c in HEADER) + "\n"
    p.write_bytes(text.encode("latin-1"))
    (m,) = parse_match_csv(p).matches
    assert m.loser_name == "Jos\xe9 Ac\xe1suso"


def test_empty_dir_has_no_input_files(tmp_path):
    with pytest.raises(IngestError, match="no input files"):
        parse_match_dir(tmp_path)


# --- filtering ---------------------------------------------------------------

@pytest.mark.parametrize("score", ["6-4 3-1 RET", "W/O", "6-3 DEF", "3-3 ABN", ""])
def test_incomplete_scores(score):
    assert is_incomplete(score)
    kept, counts = filter_matches([match(score=score)])
    assert kept == [] and counts["incomplete"] == 1


def test_completed_score_with_tiebreak_is_kept():
    assert not is_incomplete("7-6(5) 6-7(2) 7-5")


@pytest.mark.parametrize("kw, step", [
    ({"surface": "Carpet"}, "surface"),
    ({"surface": None}, "surface"),
    ({"tourney_level": "D"}, "team_event"),
    ({"tourney_level": "O"}, "team_event"),
    ({"tourney_level": "A", "tourney_name": "Olympics"}, "team_event"),
    ({"tourney_date": dt.date(1997, 12, 31)}, "date"),
    ({"tourney_date": dt.date(2020, 9, 14)}, "date"),
    ({"winner_name": "Player B"}, "player"),
    ({"minutes": None}, "stats"),
    ({"minutes": 0}, "stats"),
    ({"l_svpt": None}, "stats"),
    ({"w_svpt": 0, "w_1stWon": 0, "w_2ndWon": 0}, "stats"),
])
def test_exclusion_rules(kw, step):
    kept, counts = filter_matches([match(**kw)])
    assert kept == []
    assert counts[step] == 1 and sum(counts.values()) == 1


def test_date_bounds_are_inclusive():
    rows = [match(tourney_date=dt.date(1998, 1, 1)), match(tourney_date=dt.date(2020, 9, 13))]
    kept, _ = filter_matches(rows)
    assert len(kept) == 2


def test_cutoff_is_configurable():
    rows = [match(tourney_date=dt.date(2020, 11, 15))]
    assert filter_matches(rows)[0] == []
    assert len(filter_matches(rows, FilterConfig(cutoff=dt.date(2020, 12, 31)))[0]) == 1


def test_tour_wide_config_keeps_other_players():
    kept, _ = filter_matches([match(winner_name="Player B")], FilterConfig(players=None))
    assert len(kept) == 1


def _fixture_matches(seed, n=300):
    rows = random_rows(np.random.default_rng(seed), n)
    out = []
    for k, r in enumerate(rows):
        if k % 7 == 0:
            r["surface"] = "Carpet"
        if k % 11 == 0:
            r["tourney_level"] = "D"
        if k % 13 == 0:
            r["minutes"] = ""
        if k % 17 == 0:
            r["tourney_date"] = "19970610"
        out.append(r)
    return out


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_filter_accounting_and_idempotence(tmp_path_factory, seed):
    p = write_csv(tmp_path_factory.mktemp("f") / "m.csv", _fixture_matches(seed, 120))
    rows = parse_match_csv(p).matches
    kept, counts = filter_matches(rows)
    assert set(counts) == set(FILTER_STEPS)
    assert sum(counts.values()) + len(kept) == len(rows)
    again, counts2 = filter_matches(kept)
    assert again == kept and sum(counts2.values()) == 0


# --- responses and covariates --------------------------------------------------

def test_relative_points_worked_example():
    m = match()
    assert relative_points(m, "winner") == pytest.approx(100 / 60)
    assert relative_points(m, "loser") == pytest.approx(60 / 100)


def test_even_match_is_one():
    m = match(w_svpt=80, w_1stWon=30, w_2ndWon=20, l_svpt=80, l_1stWon=30, l_2ndWon=20)
    assert relative_points(m, "winner") == 1.0


def test_degenerate_match_raises():
    m = match(w_svpt=50, w_1stWon=30, w_2ndWon=20, l_svpt=40, l_1stWon=0, l_2ndWon=0)
    with pytest.raises(DegenerateMatchError):
        relative_points(m, "winner")
    with pytest.raises(ValueError):
        relative_points(match(), "umpire")


def test_tournament_mapping():
    assert [tournament_type(c) for c in "GMFA"] == ["GrandSlam", "Masters", "Finals", "Others"]


def test_head_to_head_gives_reciprocal_pair():
    m = match(winner_name="Novak Djokovic", loser_name="Rafael Nadal", winner_rank=2, loser_rank=1)
    obs, dropped = explode_to_observations([m])
    assert dropped == []
    a, b = obs
    assert {a.player, b.player} == {"Djokovic", "Nadal"}
    assert a.win and not b.win
    assert abs(a.rel_points * b.rel_points - 1) < 1e-9
    assert a.top20_opponent and b.top20_opponent
    assert a.match_key == b.match_key == m.source


@pytest.mark.parametrize("rank, expected", [(25, False), (21, False), (20, True), (1, True), (None, False)])
def test_top20_threshold(rank, expected):
    (o,) = explode_to_observations([match(loser_rank=rank)])[0]
    assert o.top20_opponent is expected


def test_loser_perspective_and_covariates():
    m = match(winner_name="Player C", loser_name="Rafael Nadal", surface="Clay", tourney_level="M", winner_rank=8)
    (o,) = explode_to_observations([m])[0]
    assert o.player == "Nadal" and not o.win
    assert o.surface == "Clay" and o.tournament == "Masters" and o.top20_opponent
    assert o.rel_points == pytest.approx(0.6)
    assert o.minutes == 90.0


def test_paradox_rates():
    obs = [Observation("k", "Nadal", r, 90.0, w, "Hard", "Others", False)
           for r, w in [(1.1, False), (0.9, False), (0.8, False), (0.7, False), (1.5, True)]]
    assert loss_paradox_rate(obs) == 0.25
    with pytest.raises(ValueError):
        loss_paradox_rate(obs[-1:])
    rows = [match(), match(w_1stWon=30, w_2ndWon=10, l_1stWon=40, l_2ndWon=20)]
    assert tour_loss_paradox_rate(rows) == 0.5


# --- pipeline and I/O ----------------------------------------------------------

def test_ingest_report_accounts_for_every_row(tmp_path):
    d = write_corpus(tmp_path / "csv", seed=3)
    res = ingest(d)
    rep = res.report
    assert rep["rows_parsed"] + rep["rows_malformed"] == 3 * 400
    assert sum(rep["excluded"].values()) + rep["rows_retained"] == rep["rows_parsed"]
    assert sum(rep["by_player"].values()) == rep["observations"] == len(res.observations)
    retained_keys = {o.match_key for o in res.observations}
    assert len(retained_keys) <= rep["rows_retained"]
    assert 0 <= rep["loss_paradox_rate"] <= 1 and 0 <= rep["tour_loss_paradox_rate"] <= 1
    assert rep["tour_matches"] >= rep["rows_retained"]


def test_match_keys_resolve_to_one_retained_row(tmp_path):
    d = write_corpus(tmp_path / "csv", seed=4, years=(2012,))
    kept, _ = filter_matches(parse_match_dir(d).matches)
    sources = [m.source for m in kept]
    assert len(set(sources)) == len(sources)
    obs, _ = explode_to_observations(kept)
    assert {o.match_key for o in obs} <= set(sources)


@pytest.mark.parametrize("suffix", [".csv", ".json"])
def test_observation_round_trip(tmp_path, suffix):
    obs = ingest(write_corpus(tmp_path / "csv", seed=5, years=(2010,))).observations
    path = tmp_path / f"obs{suffix}"
    write_observations(obs, path)
    back = read_observations(path)
    assert back == obs
    if suffix == ".json":
        assert json.loads(path.read_text())[0].keys() >= {"player", "rel_points", "minutes"}


def test_fingerprint_tracks_content(tmp_path):
    obs = ingest(write_corpus(tmp_path / "csv", seed=6, years=(2010,))).observations
    fp = fingerprint_observations(obs)
    assert fp == fingerprint_observations(list(obs))
    changed = list(obs)
    o = changed[0]
    changed[0] = Observation(o.match_key, o.player, o.rel_points * 1.0001, o.minutes, o.win,
                             o.surface, o.tournament, o.top20_opponent)
    assert fingerprint_observations(changed) != fp
    assert fingerprint_observations(obs[1:]) != fp


def test_real_corpus_djokovic_2012_final(atp_data_dir):
    res = parse_match_dir(atp_data_dir)
    final = [m for m in res.matches if m.tourney_date.year == 2012 and m.tourney_level == "G"
             and m.winner_name == "Novak Djokovic" and m.loser_name == "Rafael Nadal"
             and "Australian" in m.tourney_name]
    assert len(final) == 1
    assert abs(relative_points(final[0], "winner") - 1.09) < 0.01
