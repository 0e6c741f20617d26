"""
Readers for the five pipeline input files.

Every reader validates row by row: a bad row is dropped with a reason and
counted, never fatal. Only a missing file or a malformed header stops a
read. Retained plus rejected rows always equals the input row count.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
import structlog
from shapely.errors import ShapelyError
from shapely.geometry import shape

from ..core.errors import DataError, MissingFileError, SchemaError
from ..core.models import (
    ExpenditureCategory,
    Rejections,
    Ward,
    fiscal_start_year,
)

logger = structlog.get_logger(__name__)

VENUE_COLUMNS = ["id", "lat", "lon", "category", "parent_category", "is_cultural",
                 "created_at", "user_count"]
TRANSITION_COLUMNS = ["origin_venue", "dest_venue", "t_origin", "t_dest"]
EXPENDITURE_COLUMNS = ["borough_code", "fiscal_year", "category", "amount"]
IMD_COLUMNS = ["ward_code", "edition", "score", "rank"]
WARD_PROPERTIES = ["ward_code", "borough_code", "sub_region", "area_km2", "population"]

_TRUE = ["true", "1", "yes", "t", "y"]
_FALSE = ["false", "0", "no", "f", "n"]


@dataclass(frozen=True)
class VenueTable:
    """Valid venues indexed by id, plus rejection counts."""
    frame: pd.DataFrame
    rejections: Rejections
    input_rows: int

    def __len__(self) -> int:
        return len(self.frame)

    def __contains__(self, venue_id: str) -> bool:
        return venue_id in self.frame.index

    @property
    def ids(self) -> pd.Index:
        return self.frame.index


@dataclass(frozen=True)
class TransitionLog:
    """Valid transitions with the calendar year of their origin timestamp."""
    frame: pd.DataFrame
    rejections: Rejections
    input_rows: int

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def years(self) -> List[int]:
        return sorted(int(y) for y in self.frame["year"].unique())

    def for_year(self, year: int) -> pd.DataFrame:
        return self.frame[self.frame["year"] == year]


@dataclass(frozen=True)
class WardTable:
    """Valid wards in ward_code order."""
    wards: tuple
    rejections: Rejections
    input_rows: int

    def __len__(self) -> int:
        return len(self.wards)

    def __iter__(self):
        return iter(self.wards)

    def by_code(self) -> Dict[str, Ward]:
        return {ward.ward_code: ward for ward in self.wards}

    def boroughs(self) -> Dict[str, List[str]]:
        """Borough code -> ward codes in that borough."""
        result: Dict[str, List[str]] = {}
        for ward in self.wards:
            result.setdefault(ward.borough_code, []).append(ward.ward_code)
        return result


@dataclass(frozen=True)
class ExpenditureTable:
    """Valid borough expenditure rows."""
    frame: pd.DataFrame
    rejections: Rejections
    input_rows: int

    @property
    def fiscal_years(self) -> List[str]:
        return sorted(self.frame["fiscal_year"].unique(), key=fiscal_start_year)


@dataclass(frozen=True)
class DeprivationTable:
    """Valid IMD rows for the 2010 and 2015 editions."""
    frame: pd.DataFrame
    rejections: Rejections
    input_rows: int

    def edition(self, edition: int) -> pd.DataFrame:
        """Rows of one edition indexed by ward_code."""
        return self.frame[self.frame["edition"] == edition].set_index("ward_code")


def _read_csv(path, label: str, columns: Sequence[str], allow_empty: bool = False) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(label, path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        if allow_empty:
            return pd.DataFrame({name: pd.Series(dtype=str) for name in columns})
        raise SchemaError(f"{label} file is empty: {path}")
    header = [name.strip() for name in frame.columns]
    if header != list(columns):
        raise SchemaError(
            f"{label} header mismatch in {path}: expected {','.join(columns)}, got {','.join(header)}"
        )
    frame.columns = header
    return frame


def _first_reason(checks: Sequence[tuple], size: int) -> np.ndarray:
    """Reason of the first failing check per row; "" where every check passes."""
    reasons = np.full(size, "", dtype=object)
    for mask, reason in checks:
        mask = np.asarray(mask, dtype=bool)
        reasons[(reasons == "") & mask] = reason
    return reasons


def _log_rejections(label: str, reasons: np.ndarray, rejections: Rejections) -> None:
    for reason, count in rejections.to_dict().items():
        rows = (np.flatnonzero(reasons == reason)[:5] + 2).tolist()
        logger.debug("rows_rejected", file=label, reason=reason, count=count, example_lines=rows)


def _parse_timestamps(values: pd.Series) -> pd.Series:
    return pd.to_datetime(values.str.strip(), utc=True, errors="coerce", format="ISO8601")


def parse_venues(path) -> VenueTable:
    """
    Parse venues.csv.

    Args:
        path: Path to the venues file

    Returns:
        VenueTable of valid venues; duplicate ids keep the first valid row

    Raises:
        MissingFileError: If the file does not exist
        SchemaError: If the header does not match
    """
    raw = _read_csv(path, "venues", VENUE_COLUMNS)
    ids = raw["id"].str.strip()
    lat = pd.to_numeric(raw["lat"], errors="coerce")
    lon = pd.to_numeric(raw["lon"], errors="coerce")
    flag_text = raw["is_cultural"].str.strip().str.lower()
    created = _parse_timestamps(raw["created_at"])
    users = pd.to_numeric(raw["user_count"], errors="coerce")

    reasons = _first_reason([
        (ids == "", "missing id"),
        (lat.isna(), "bad lat"),
        (~lat.between(-90, 90), "lat out of range"),
        (lon.isna(), "bad lon"),
        (~lon.between(-180, 180), "lon out of range"),
        (~flag_text.isin(_TRUE + _FALSE), "bad is_cultural"),
        (created.isna(), "bad created_at"),
        (users.isna() | (users != users.round()), "bad user_count"),
        (users < 0, "negative user_count"),
    ], len(raw))
    valid = reasons == ""
    duplicate = valid & ids.duplicated(keep=False).to_numpy()
    if duplicate.any():
        first_seen = ids[valid].duplicated(keep="first")
        reasons[first_seen[first_seen].index.to_numpy()] = "duplicate id"
        valid = reasons == ""

    frame = pd.DataFrame({
        "id": ids[valid],
        "lat": lat[valid].astype(float),
        "lon": lon[valid].astype(float),
        "category": raw["category"][valid].str.strip(),
        "parent_category": raw["parent_category"][valid].str.strip(),
        "is_cultural": flag_text[valid].isin(_TRUE),
        "created_at": created[valid],
        "user_count": users[valid].astype(np.int64),
    }).set_index("id")

    rejections = Rejections.from_reasons(reasons)
    _log_rejections("venues", reasons, rejections)
    logger.info("venues_parsed", path=str(path), retained=len(frame), rejected=rejections.total)
    return VenueTable(frame, rejections, len(raw))


def parse_transitions(path, venue_table: VenueTable) -> TransitionLog:
    """
    Parse transitions.csv against a loaded venue table.

    Transitions whose venues are unknown, whose timestamps do not parse,
    or whose destination precedes the origin are dropped and counted.
    An empty file yields an empty log.
    """
    raw = _read_csv(path, "transitions", TRANSITION_COLUMNS, allow_empty=True)
    origin = raw["origin_venue"].str.strip()
    dest = raw["dest_venue"].str.strip()
    t_origin = _parse_timestamps(raw["t_origin"])
    t_dest = _parse_timestamps(raw["t_dest"])
    known = venue_table.ids

    reasons = _first_reason([
        ((origin == "") | (dest == ""), "missing venue id"),
        (t_origin.isna(), "bad t_origin"),
        (t_dest.isna(), "bad t_dest"),
        (t_dest < t_origin, "t_dest before t_origin"),
        (~origin.isin(known), "unknown origin venue"),
        (~dest.isin(known), "unknown dest venue"),
    ], len(raw))
    valid = reasons == ""

    frame = pd.DataFrame({
        "origin_venue": origin[valid],
        "dest_venue": dest[valid],
        "t_origin": t_origin[valid],
        "t_dest": t_dest[valid],
    }).reset_index(drop=True)
    frame["year"] = frame["t_origin"].dt.year.astype(np.int64)

    rejections = Rejections.from_reasons(reasons)
    _log_rejections("transitions", reasons, rejections)
    logger.info("transitions_parsed", path=str(path), retained=len(frame), rejected=rejections.total)
    return TransitionLog(frame, rejections, len(raw))


def _polygon_rings(geometry: Dict) -> tuple:
    """(lat, lon) rings of a GeoJSON Polygon, outer ring first."""
    for ring in geometry.get("coordinates") or []:
        if len(ring) < 4 or list(ring[0]) != list(ring[-1]):
            raise ValueError("open ring")
    polygon = shape(geometry)
    return tuple(tuple((float(lat), float(lon)) for lon, lat, *_ in ring.coords)
                 for ring in (polygon.exterior, *polygon.interiors))


def parse_wards(path) -> WardTable:
    """
    Parse wards.geojson (a FeatureCollection of Polygon features).

    Features with missing properties, open rings, non-positive areas,
    unsupported geometry types or duplicate codes are dropped and counted.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError("wards", path)
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"wards file is not valid JSON: {path}: {e}")
    if document.get("type") != "FeatureCollection" or not isinstance(document.get("features"), list):
        raise SchemaError(f"wards file is not a FeatureCollection: {path}")

    rejections = Rejections()
    wards: Dict[str, Ward] = {}
    for number, feature in enumerate(document["features"]):
        properties = feature.get("properties") or {}
        geometry = feature.get("geometry") or {}
        code = str(properties.get("ward_code") or "").strip()
        if not code:
            rejections.add("missing ward_code")
            continue
        if code in wards:
            rejections.add("duplicate ward_code")
            continue
        if geometry.get("type") != "Polygon":
            rejections.add("unsupported geometry")
            continue
        population = properties.get("population")
        try:
            ward = Ward(
                ward_code=code,
                borough_code=str(properties.get("borough_code") or "").strip(),
                sub_region=str(properties.get("sub_region") or "").strip(),
                polygon=_polygon_rings(geometry),
                area_km2=float(properties.get("area_km2")),
                population=int(population) if population not in (None, "") else None,
            )
        except (TypeError, ValueError, ShapelyError) as e:
            logger.debug("ward_rejected", feature=number, ward_code=code, reason=str(e))
            rejections.add("invalid ward")
            continue
        if not ward.borough_code:
            rejections.add("missing borough_code")
            continue
        wards[code] = ward

    ordered = tuple(wards[code] for code in sorted(wards))
    logger.info("wards_parsed", path=str(path), retained=len(ordered), rejected=rejections.total)
    return WardTable(ordered, rejections, len(document["features"]))


def parse_expenditure(path) -> ExpenditureTable:
    """Parse expenditure.csv; duplicate (borough, year, category) rows keep the first."""
    raw = _read_csv(path, "expenditure", EXPENDITURE_COLUMNS)
    borough = raw["borough_code"].str.strip()
    fiscal = raw["fiscal_year"].str.strip()
    category = raw["category"].str.strip()
    amount = pd.to_numeric(raw["amount"], errors="coerce")

    def _fiscal_ok(label: str) -> bool:
        try:
            fiscal_start_year(label)
            return True
        except ValueError:
            return False

    reasons = _first_reason([
        (borough == "", "missing borough_code"),
        (~fiscal.map(_fiscal_ok), "bad fiscal_year"),
        (~category.isin([c.value for c in ExpenditureCategory]), "unknown category"),
        (amount.isna(), "bad amount"),
        (amount < 0, "negative amount"),
    ], len(raw))
    key = borough + "|" + fiscal + "|" + category
    valid = reasons == ""
    first_seen = key[valid].duplicated(keep="first")
    reasons[first_seen[first_seen].index.to_numpy()] = "duplicate record"
    valid = reasons == ""

    frame = pd.DataFrame({
        "borough_code": borough[valid],
        "fiscal_year": fiscal[valid],
        "category": category[valid],
        "amount": amount[valid].astype(float),
    }).reset_index(drop=True)
    rejections = Rejections.from_reasons(reasons)
    _log_rejections("expenditure", reasons, rejections)
    logger.info("expenditure_parsed", path=str(path), retained=len(frame), rejected=rejections.total)
    return ExpenditureTable(frame, rejections, len(raw))


def parse_imd(path) -> DeprivationTable:
    """
    Parse imd.csv (editions 2010 and 2015).

    Raises:
        DataError: If the retained ranks of an edition are not a permutation of 1..N
    """
    raw = _read_csv(path, "imd", IMD_COLUMNS)
    ward = raw["ward_code"].str.strip()
    edition = pd.to_numeric(raw["edition"], errors="coerce")
    score = pd.to_numeric(raw["score"], errors="coerce")
    rank = pd.to_numeric(raw["rank"], errors="coerce")

    reasons = _first_reason([
        (ward == "", "missing ward_code"),
        (~edition.isin([2010, 2015]), "unsupported edition"),
        (score.isna(), "bad score"),
        (rank.isna() | (rank != rank.round()), "bad rank"),
        (rank < 1, "non-positive rank"),
    ], len(raw))
    key = ward + "|" + raw["edition"].str.strip()
    valid = reasons == ""
    first_seen = key[valid].duplicated(keep="first")
    reasons[first_seen[first_seen].index.to_numpy()] = "duplicate ward edition"
    valid = reasons == ""

    frame = pd.DataFrame({
        "ward_code": ward[valid],
        "edition": edition[valid].astype(np.int64),
        "score": score[valid].astype(float),
        "rank": rank[valid].astype(np.int64),
    }).reset_index(drop=True)

    for value, ranks in frame.groupby("edition")["rank"]:
        expected = np.arange(1, len(ranks) + 1)
        if not np.array_equal(np.sort(ranks.to_numpy()), expected):
            raise DataError(f"IMD {value} ranks are not a permutation of 1..{len(ranks)}")

    rejections = Rejections.from_reasons(reasons)
    _log_rejections("imd", reasons, rejections)
    logger.info("imd_parsed", path=str(path), retained=len(frame), rejected=rejections.total)
    return DeprivationTable(frame, rejections, len(raw))


@dataclass(frozen=True)
class InputBundle:
    """All five parsed inputs."""
    venues: VenueTable
    transitions: TransitionLog
    wards: WardTable
    expenditure: ExpenditureTable
    imd: DeprivationTable

    def rejection_summary(self) -> Dict[str, Dict]:
        summary = {}
        for name in ("venues", "transitions", "wards", "expenditure", "imd"):
            table = getattr(self, name)
            summary[name] = {
                'input_rows': table.input_rows,
                'retained': len(table.wards) if name == "wards" else len(table.frame),
                'rejected': table.rejections.to_dict(),
            }
        return summary


def load_inputs(venues_path, transitions_path, wards_path, expenditure_path, imd_path) -> InputBundle:
    """Parse all five inputs; venues first since transitions resolve against them."""
    for label, path in (("venues", venues_path), ("transitions", transitions_path),
                        ("wards", wards_path), ("expenditure", expenditure_path), ("imd", imd_path)):
        if not Path(path).exists():
            raise MissingFileError(label, path)
    venues = parse_venues(venues_path)
    return InputBundle(
        venues=venues,
        transitions=parse_transitions(transitions_path, venues),
        wards=parse_wards(wards_path),
        expenditure=parse_expenditure(expenditure_path),
        imd=parse_imd(imd_path),
    )
