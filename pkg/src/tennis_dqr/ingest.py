"""Reading ATP match CSVs and turning them into per-player observations.

The input files follow the public ATP match schema (one file per season,
``atp_matches_YYYY.csv``). Numeric fields that are blank in the source stay
``None`` all the way through; nothing is imputed.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = (
    "tourney_id", "tourney_level", "surface", "tourney_date",
    "winner_name", "loser_name", "winner_rank", "loser_rank",
    "score", "minutes",
    "w_svpt", "w_1stWon", "w_2ndWon", "l_svpt", "l_1stWon", "l_2ndWon",
)
_INT_COLUMNS = (
    "winner_rank", "loser_rank", "minutes",
    "w_svpt", "w_1stWon", "w_2ndWon", "l_svpt", "l_1stWon", "l_2ndWon",
)

BIG_THREE = {
    "Roger Federer": "Federer",
    "Novak Djokovic": "Djokovic",
    "Rafael Nadal": "Nadal",
}
PLAYERS = ("Federer", "Djokovic", "Nadal")
SURFACES = ("Hard", "Clay", "Grass")
TOURNAMENTS = ("Others", "GrandSlam", "Finals", "Masters")

INCOMPLETE_TOKENS = ("RET", "W/O", "DEF", "ABN", "ABD", "UNFINISHED")
DEFAULT_START = dt.date(1998, 1, 1)
# final day of the 2020 US Open
DEFAULT_CUTOFF = dt.date(2020, 9, 13)

FILTER_STEPS = ("player", "date", "incomplete", "team_event", "surface", "stats")
OBSERVATION_COLUMNS = (
    "match_key", "player", "rel_points", "minutes", "win",
    "surface", "tournament", "top20_opponent",
)


class IngestError(Exception):
    """Fatal problem with the input files."""


class DegenerateMatchError(ValueError):
    """Point totals that make the relative-points ratio undefined."""


@dataclass(frozen=True)
class RawMatch:
    tourney_id: str
    tourney_level: str
    surface: str | None
    tourney_date: dt.date
    winner_name: str
    loser_name: str
    winner_rank: int | None
    loser_rank: int | None
    score: str
    minutes: int | None
    w_svpt: int | None
    w_1stWon: int | None
    w_2ndWon: int | None
    l_svpt: int | None
    l_1stWon: int | None
    l_2ndWon: int | None
    tourney_name: str = ""
    source: str = ""


@dataclass(frozen=True)
class Observation:
    match_key: str
    player: str
    rel_points: float
    minutes: float
    win: bool
    surface: str
    tournament: str
    top20_opponent: bool


@dataclass
class RowError:
    source: str
    message: str


@dataclass
class ParseResult:
    matches: list[RawMatch]
    errors: list[RowError] = field(default_factory=list)


@dataclass(frozen=True)
class FilterConfig:
    """Filter settings; ``players=None`` keeps every match (tour-wide)."""

    start: dt.date = DEFAULT_START
    cutoff: dt.date = DEFAULT_CUTOFF
    players: tuple[str, ...] | None = tuple(BIG_THREE)


def _parse_int(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if value != int(value):
        raise ValueError(f"non-integer value {text!r}")
    return int(value)


def _parse_date(text: str) -> dt.date:
    text = text.strip()
    if len(text) != 8 or not text.isdigit():
        raise ValueError(f"bad tourney_date {text!r}")
    return dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))


def _row_to_match(row: dict[str, str], source: str) -> RawMatch:
    ints = {}
    for col in _INT_COLUMNS:
        try:
            ints[col] = _parse_int(row[col] or "")
        except ValueError as exc:
            raise ValueError(f"{col}: {exc}") from None
        if ints[col] is not None and ints[col] < 0:
            raise ValueError(f"{col}: negative value")
    for side in ("w", "l"):
        svpt, first, second = (ints[f"{side}_svpt"], ints[f"{side}_1stWon"],
                               ints[f"{side}_2ndWon"])
        if None not in (svpt, first, second) and first + second > svpt:
            raise ValueError(f"{side}_1stWon + {side}_2ndWon exceeds {side}_svpt")
    for col in ("winner_rank", "loser_rank"):
        if ints[col] is not None and ints[col] < 1:
            raise ValueError(f"{col}: rank must be positive")
    surface = (row["surface"] or "").strip() or None
    return RawMatch(
        tourney_id=row["tourney_id"].strip(),
        tourney_level=(row["tourney_level"] or "").strip(),
        surface=surface,
        tourney_date=_parse_date(row["tourney_date"] or ""),
        winner_name=row["winner_name"].strip(),
        loser_name=row["loser_name"].strip(),
        score=(row["score"] or "").strip(),
        tourney_name=(row.get("tourney_name") or "").strip(),
        source=source,
        **ints,
    )


def _open_text(path: Path):
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        log.warning("%s is not valid UTF-8, decoding as latin-1", path)
        return raw.decode("latin-1")


def parse_match_csv(path: str | Path) -> ParseResult:
    """Parse one match file; malformed rows are skipped and reported."""
    path = Path(path)
    try:
        text = _open_text(path)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestError(f"{path}: missing columns {', '.join(missing)}")
    result = ParseResult(matches=[])
    for lineno, row in enumerate(reader, start=2):
        source = f"{path.name}:{lineno}"
        if None in row or any(row[c] is None for c in REQUIRED_COLUMNS):
            result.errors.append(RowError(source, "wrong number of fields"))
            continue
        try:
            result.matches.append(_row_to_match(row, source))
        except ValueError as exc:
            result.errors.append(RowError(source, str(exc)))
    return result


def find_match_files(csv_dir: str | Path, pattern: str = "atp_matches_[0-9][0-9][0-9][0-9].csv") -> list[Path]:
    return sorted(Path(csv_dir).glob(pattern))


def parse_match_dir(csv_dir: str | Path, pattern: str = "atp_matches_[0-9][0-9][0-9][0-9].csv") -> ParseResult:
    files = find_match_files(csv_dir, pattern)
    if not files:
        raise IngestError("no input files")
    merged = ParseResult(matches=[])
    for f in files:
        part = parse_match_csv(f)
        merged.matches.extend(part.matches)
        merged.errors.extend(part.errors)
    return merged


def is_incomplete(score: str) -> bool:
    if not score.strip():
        return True
    upper = score.upper()
    return any(tok in upper for tok in INCOMPLETE_TOKENS)


def is_team_event(m: RawMatch) -> bool:
    """Davis Cup and Olympic matches."""
    if m.tourney_level in ("D", "O"):
        return True
    name = m.tourney_name.lower()
    return "davis cup" in name or "olympic" in name


def _has_point_stats(m: RawMatch) -> bool:
    needed = (m.minutes, m.w_svpt, m.w_1stWon, m.w_2ndWon,
              m.l_svpt, m.l_1stWon, m.l_2ndWon)
    if any(v is None for v in needed):
        return False
    if m.minutes <= 0 or m.w_svpt <= 0 or m.l_svpt <= 0:
        return False
    won = winner_points_won(m)
    return 0 < won < m.w_svpt + m.l_svpt


def _exclusion_reason(m: RawMatch, config: FilterConfig) -> str | None:
    if config.players is not None and not (
        m.winner_name in config.players or m.loser_name in config.players
    ):
        return "player"
    if not config.start <= m.tourney_date <= config.cutoff:
        return "date"
    if is_incomplete(m.score):
        return "incomplete"
    if is_team_event(m):
        return "team_event"
    if m.surface not in SURFACES:
        return "surface"
    if not _has_point_stats(m):
        return "stats"
    return None


def filter_matches(rows: Iterable[RawMatch], config: FilterConfig = FilterConfig()) -> tuple[list[RawMatch], dict[str, int]]:
    """Apply the selection rules in order.

    Returns the kept rows and a count per exclusion step; each dropped row is
    charged to the first rule it fails, so counts plus kept add up to the input.
    """
    kept = []
    counts = dict.fromkeys(FILTER_STEPS, 0)
    for m in rows:
        reason = _exclusion_reason(m, config)
        if reason is None:
            kept.append(m)
        else:
            counts[reason] += 1
    return kept, counts


def winner_points_won(m: RawMatch) -> int:
    # serve points won by the winner plus return points won off the loser's serve
    return (m.w_1stWon + m.w_2ndWon) + (m.l_svpt - m.l_1stWon - m.l_2ndWon)


def relative_points(m: RawMatch, perspective: str) -> float:
    """Points won divided by points lost, seen from ``"winner"`` or ``"loser"``."""
    if perspective not in ("winner", "loser"):
        raise ValueError(f"perspective must be 'winner' or 'loser', got {perspective!r}")
    total = m.w_svpt + m.l_svpt
    won = winner_points_won(m)
    lost = total - won
    if won <= 0 or lost <= 0:
        raise DegenerateMatchError(f"{m.source}: points won {won}, lost {lost}")
    return won / lost if perspective == "winner" else lost / won


def tournament_type(level: str) -> str:
    return {"G": "GrandSlam", "M": "Masters", "F": "Finals"}.get(level, "Others")


def explode_to_observations(
    rows: Iterable[RawMatch], players: dict[str, str] = BIG_THREE,
) -> tuple[list[Observation], list[RowError]]:
    """One observation per tracked player per match (two for head-to-heads)."""
    obs: list[Observation] = []
    dropped: list[RowError] = []
    for m in rows:
        sides = [("winner", m.winner_name, m.loser_rank),
                 ("loser", m.loser_name, m.winner_rank)]
        for perspective, name, opp_rank in sides:
            if name not in players:
                continue
            try:
                rel = relative_points(m, perspective)
            except DegenerateMatchError as exc:
                dropped.append(RowError(m.source, str(exc)))
                continue
            obs.append(Observation(
                match_key=m.source,
                player=players[name],
                rel_points=rel,
                minutes=float(m.minutes),
                win=perspective == "winner",
                surface=m.surface,
                tournament=tournament_type(m.tourney_level),
                top20_opponent=opp_rank is not None and opp_rank <= 20,
            ))
    return obs, dropped


def loss_paradox_rate(obs: Iterable[Observation]) -> float:
    """Share of losses in which the player still won more points than he lost."""
    losses = [o.rel_points for o in obs if not o.win]
    if not losses:
        raise ValueError("no loss observations")
    return sum(r > 1.0 for r in losses) / len(losses)


def tour_loss_paradox_rate(rows: Iterable[RawMatch]) -> float:
    """Same share over whole matches: losers who outscored the winner on points."""
    n = paradox = 0
    for m in rows:
        try:
            rel = relative_points(m, "loser")
        except DegenerateMatchError:
            continue
        n += 1
        paradox += rel > 1.0
    if n == 0:
        raise ValueError("no matches")
    return paradox / n


@dataclass
class IngestResult:
    observations: list[Observation]
    report: dict


def ingest(csv_dir: str | Path, config: FilterConfig = FilterConfig(), pattern: str = "atp_matches_[0-9][0-9][0-9][0-9].csv") -> IngestResult:
    """Full pipeline: parse a directory, filter, explode, and build the report."""
    parsed = parse_match_dir(csv_dir, pattern)
    kept, counts = filter_matches(parsed.matches, config)
    obs, dropped = explode_to_observations(kept)
    report = {
        "input_files": [str(p.name) for p in find_match_files(csv_dir, pattern)],
        "rows_parsed": len(parsed.matches),
        "rows_malformed": len(parsed.errors),
        "malformed": [asdict(e) for e in parsed.errors],
        "excluded": counts,
        "rows_retained": len(kept),
        "observations": len(obs),
        "degenerate": [asdict(e) for e in dropped],
        "start_date": config.start.isoformat(),
        "cutoff_date": config.cutoff.isoformat(),
        "players": list(config.players) if config.players is not None else None,
        "by_player": dict(sorted(Counter(o.player for o in obs).items())),
    }
    if any(not o.win for o in obs):
        report["loss_paradox_rate"] = loss_paradox_rate(obs)
    tour_cfg = FilterConfig(start=config.start, cutoff=config.cutoff, players=None)
    tour_rows, _ = filter_matches(parsed.matches, tour_cfg)
    if tour_rows:
        report["tour_loss_paradox_rate"] = tour_loss_paradox_rate(tour_rows)
        report["tour_matches"] = len(tour_rows)
    return IngestResult(obs, report)


def write_observations(obs: list[Observation], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        payload = [asdict(o) for o in obs]
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVATION_COLUMNS)
        for o in obs:
            writer.writerow([o.match_key, o.player, repr(o.rel_points), repr(o.minutes),
                             int(o.win), o.surface, o.tournament, int(o.top20_opponent)])


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes"):
        return True
    if text in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def read_observations(path: str | Path) -> list[Observation]:
    path = Path(path)
    if path.suffix == ".json":
        records = json.loads(path.read_text(encoding="utf-8"))
    else:
        with path.open(newline="", encoding="utf-8") as fh:
            records = list(csv.DictReader(fh))
    obs = []
    for r in records:
        o = Observation(
            match_key=str(r["match_key"]),
            player=r["player"],
            rel_points=float(r["rel_points"]),
            minutes=float(r["minutes"]),
            win=_as_bool(r["win"]),
            surface=r["surface"],
            tournament=r["tournament"],
            top20_opponent=_as_bool(r["top20_opponent"]),
        )
        if o.player not in PLAYERS or o.surface not in SURFACES or o.tournament not in TOURNAMENTS:
            raise ValueError(f"unknown category in observation {o.match_key}")
        obs.append(o)
    return obs


def fingerprint_observations(obs: Iterable[Observation]) -> str:
    h = hashlib.sha256()
    for o in obs:
        h.update(json.dumps(asdict(o), sort_keys=True).encode())
        h.update(b"\n")
    return h.hexdigest()
