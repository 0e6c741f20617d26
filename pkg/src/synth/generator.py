"""
Synthetic city generator.

Builds the five pipeline inputs for a square-grid city whose "treated"
wards receive a planted regeneration effect, plus a ground-truth ledger:

- wards: square cells grouped into square borough blocks
- venues: gamma-Poisson counts per ward, lognormal popularity, new venues
  every year (treated wards grow by (1+delta) per year)
- transitions: exact yearly counts; origin by popularity, destination ward
  by a gravity rule mass * attraction / (1 + d^gravity), destination venue
  by popularity within the ward
- expenditure: borough spending with a fixed per-borough culture share
- IMD: 2015 score = 2010 score - signal_beta * delta * treated + N(0, sigma)
"""

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import structlog

from ..core.config import config
from ..core.models import ExpenditureCategory

logger = structlog.get_logger(__name__)

KM_PER_DEGREE_LAT = 111.195
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
TREATMENT_RULES = ("investment", "random")
RANDOM_TREATMENT_SHARE = 0.25
# venues keep this fraction of a cell side away from ward edges
EDGE_MARGIN = 0.02

CULTURAL_CATEGORIES = [
    ("Art Gallery", "Arts & Entertainment"),
    ("Museum", "Arts & Entertainment"),
    ("Theater", "Arts & Entertainment"),
    ("Library", "College & University"),
    ("Park", "Outdoors & Recreation"),
    ("Stadium", "Arts & Entertainment"),
]
OTHER_CATEGORIES = [
    ("Café", "Food"),
    ("Restaurant", "Food"),
    ("Pub", "Nightlife Spot"),
    ("Office", "Professional & Other Places"),
    ("Clothing Store", "Shop & Service"),
    ("Bus Stop", "Travel & Transport"),
]


@dataclass(frozen=True)
class SynthConfig:
    """
    Parameters of a synthetic city.

    Attributes:
        grid_rows, grid_cols: Ward grid size
        borough_side: Wards per borough block edge
        ward_side_km: Ward cell edge length
        origin_lat, origin_lon: South-west corner of the grid
        venues_mean, venues_dispersion: Gamma-Poisson venues per ward
        cultural_fraction: Probability a venue is cultural
        new_venue_rate: Yearly new venues as a fraction of the initial stock
        transitions_per_year: Exact transitions emitted per year
        gravity: Distance exponent of destination choice
        delta: Yearly growth multiplier (1 + delta) of treated wards
        sigma: Noise of the IMD update
        signal_beta: Score change per unit delta for treated wards
        treatment_rule: "investment" (more deprived and CEA > 1) or "random"
        boost_inflow, boost_venue_creation: Which growth channels treatment drives
        years: Calendar years of transitions
        seed: RNG seed
    """
    grid_rows: int = 24
    grid_cols: int = 25
    borough_side: int = 5
    ward_side_km: float = 1.0
    origin_lat: float = 51.38
    origin_lon: float = -0.35
    venues_mean: float = 33.0
    venues_dispersion: float = 4.0
    cultural_fraction: float = 0.3
    new_venue_rate: float = 0.15
    transitions_per_year: int = 1_000_000
    gravity: float = 2.0
    delta: float = 0.5
    sigma: float = 1.0
    signal_beta: float = 20.0
    treatment_rule: str = "investment"
    boost_inflow: bool = True
    boost_venue_creation: bool = True
    years: Tuple[int, ...] = (2011, 2012, 2013)
    seed: int = 0

    def __post_init__(self):
        for name in ("grid_rows", "grid_cols", "borough_side", "transitions_per_year"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("ward_side_km", "venues_mean", "venues_dispersion"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.cultural_fraction <= 1.0:
            raise ValueError("infeasible config: cultural venues cannot outnumber venues")
        for name in ("new_venue_rate", "gravity", "delta", "sigma", "signal_beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.treatment_rule not in TREATMENT_RULES:
            raise ValueError(f"treatment_rule must be one of {TREATMENT_RULES}")
        years = list(self.years)
        if not years or years != list(range(years[0], years[0] + len(years))):
            raise ValueError("years must be consecutive")
        if years[0] <= 2006:
            raise ValueError("first year must leave room for the initial venue stock")

    @property
    def wards(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def fiscal_years(self) -> List[str]:
        return [f"{y - config.FISCAL_OFFSET}/{(y - config.FISCAL_OFFSET + 1) % 100:02d}"
                for y in self.years]


@dataclass(frozen=True)
class SynthBundle:
    """Generated inputs plus the ground-truth ledger."""
    config: SynthConfig
    venues: pd.DataFrame
    transitions: pd.DataFrame
    wards: Dict
    expenditure: pd.DataFrame
    imd: pd.DataFrame
    ledger: Dict

    @property
    def centre(self) -> Tuple[float, float]:
        return tuple(self.ledger["centre"])


@dataclass(frozen=True)
class _Grid:
    codes: np.ndarray
    boroughs: np.ndarray
    sub_regions: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    lat_edges: np.ndarray
    lon_edges: np.ndarray
    populations: np.ndarray
    centre: Tuple[float, float]


def _sub_region(row: int, col: int, rows: int, cols: int) -> str:
    fr = (row + 0.5) / rows - 0.5
    fc = (col + 0.5) / cols - 0.5
    if abs(fr) < 1 / 6 and abs(fc) < 1 / 6:
        return "Central"
    if abs(fc) >= abs(fr):
        return "East" if fc > 0 else "West"
    return "North" if fr > 0 else "South"


def _build_grid(cfg: SynthConfig, rng: np.random.Generator) -> _Grid:
    rows, cols = np.divmod(np.arange(cfg.wards), cfg.grid_cols)
    dlat = cfg.ward_side_km / KM_PER_DEGREE_LAT
    mid_lat = cfg.origin_lat + dlat * cfg.grid_rows / 2
    dlon = cfg.ward_side_km / (KM_PER_DEGREE_LAT * math.cos(math.radians(mid_lat)))
    lat_edges = cfg.origin_lat + dlat * np.arange(cfg.grid_rows + 1)
    lon_edges = cfg.origin_lon + dlon * np.arange(cfg.grid_cols + 1)
    borough_cols = -(-cfg.grid_cols // cfg.borough_side)
    borough_index = (rows // cfg.borough_side) * borough_cols + cols // cfg.borough_side
    return _Grid(
        codes=np.array([f"E05{i + 1:06d}" for i in range(cfg.wards)], dtype=object),
        boroughs=np.array([f"E09{b + 1:06d}" for b in borough_index], dtype=object),
        sub_regions=np.array([_sub_region(r, c, cfg.grid_rows, cfg.grid_cols)
                              for r, c in zip(rows, cols)], dtype=object),
        rows=rows,
        cols=cols,
        lat_edges=lat_edges,
        lon_edges=lon_edges,
        populations=rng.poisson(11_000, cfg.wards) + 1,
        centre=(float((lat_edges[0] + lat_edges[-1]) / 2), float((lon_edges[0] + lon_edges[-1]) / 2)),
    )


def _wards_geojson(cfg: SynthConfig, grid: _Grid) -> Dict:
    features = []
    for i in range(cfg.wards):
        r, c = grid.rows[i], grid.cols[i]
        south, north = float(grid.lat_edges[r]), float(grid.lat_edges[r + 1])
        west, east = float(grid.lon_edges[c]), float(grid.lon_edges[c + 1])
        ring = [[west, south], [east, south], [east, north], [west, north], [west, south]]
        features.append({
            'type': 'Feature',
            'properties': {
                'ward_code': grid.codes[i],
                'borough_code': grid.boroughs[i],
                'sub_region': grid.sub_regions[i],
                'area_km2': cfg.ward_side_km ** 2,
                'population': int(grid.populations[i]),
            },
            'geometry': {'type': 'Polygon', 'coordinates': [ring]},
        })
    return {'type': 'FeatureCollection', 'features': features}


def _year_seconds(year: int) -> Tuple[int, int]:
    start = int(datetime(year, 1, 1, tzinfo=timezone.utc).timestamp())
    end = int(datetime(year + 1, 1, 1, tzinfo=timezone.utc).timestamp())
    return start, end


def _expenditure(cfg: SynthConfig, grid: _Grid, rng: np.random.Generator) -> pd.DataFrame:
    boroughs, ward_counts = np.unique(grid.boroughs, return_counts=True)
    shares = rng.uniform(0.02, 0.08, len(boroughs))
    splits = rng.dirichlet(np.full(5, 4.0), len(boroughs))
    spend_per_ward = rng.uniform(9e6, 11e6, len(boroughs))
    cultural = ExpenditureCategory.cultural()
    rows = []
    for fiscal in cfg.fiscal_years:
        for b, code in enumerate(boroughs):
            total = round(float(ward_counts[b] * spend_per_ward[b] * rng.normal(1.0, 0.02)), 2)
            for category, weight in zip(cultural, splits[b]):
                amount = total * shares[b] * weight * max(0.5, rng.normal(1.0, 0.03))
                rows.append((code, fiscal, category.value, round(amount, 2)))
            rows.append((code, fiscal, ExpenditureCategory.TOTAL_SERVICES.value, total))
    return pd.DataFrame(rows, columns=["borough_code", "fiscal_year", "category", "amount"])


def _mean_cea(expenditure: pd.DataFrame, grid: _Grid) -> np.ndarray:
    """Mean over fiscal years of each ward's CEA (equal within a borough)."""
    wide = expenditure.pivot_table(index=["fiscal_year", "borough_code"], columns="category",
                                   values="amount", aggfunc="first")
    ce = wide[[c.value for c in ExpenditureCategory.cultural()]].sum(axis=1)
    te = wide[ExpenditureCategory.TOTAL_SERVICES.value]
    per_borough = []
    for fiscal in wide.index.get_level_values("fiscal_year").unique():
        ce_y, te_y = ce.xs(fiscal), te.xs(fiscal)
        # summing apportioned ward amounts gives back the borough totals
        per_borough.append((ce_y / te_y) / (ce_y.sum() / te_y.sum()))
    mean = pd.concat(per_borough, axis=1).mean(axis=1)
    return mean.reindex(grid.boroughs).to_numpy(dtype=float)


def _rank_descending(scores: np.ndarray) -> np.ndarray:
    """Rank 1 = highest score; ties go to the lower ward index."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def _venues(cfg: SynthConfig, grid: _Grid, treated: np.ndarray,
            rng: np.random.Generator) -> Tuple[pd.DataFrame, np.ndarray, Dict[str, int]]:
    initial = np.maximum(
        rng.poisson(rng.gamma(cfg.venues_dispersion, cfg.venues_mean / cfg.venues_dispersion, cfg.wards)), 1
    )
    ward_of: List[np.ndarray] = [np.repeat(np.arange(cfg.wards), initial)]
    stock_start, _ = _year_seconds(2005)
    first_start, _ = _year_seconds(cfg.years[0])
    created: List[np.ndarray] = [rng.integers(stock_start, first_start, int(initial.sum()))]
    created_counts: Dict[str, int] = {}
    for i, year in enumerate(cfg.years):
        multiplier = np.where(treated & cfg.boost_venue_creation, (1.0 + cfg.delta) ** i, 1.0)
        new = rng.poisson(cfg.new_venue_rate * initial * multiplier)
        start, end = _year_seconds(year)
        ward_of.append(np.repeat(np.arange(cfg.wards), new))
        created.append(rng.integers(start, end, int(new.sum())))
        created_counts[str(year)] = int(new.sum())

    wards = np.concatenate(ward_of)
    n = len(wards)
    lat_lo, lat_hi = grid.lat_edges[grid.rows[wards]], grid.lat_edges[grid.rows[wards] + 1]
    lon_lo, lon_hi = grid.lon_edges[grid.cols[wards]], grid.lon_edges[grid.cols[wards] + 1]
    u = rng.uniform(EDGE_MARGIN, 1 - EDGE_MARGIN, (2, n))
    cultural = rng.random(n) < cfg.cultural_fraction
    pick = rng.integers(0, len(CULTURAL_CATEGORIES), n)
    categories = [CULTURAL_CATEGORIES[p] if c else OTHER_CATEGORIES[p] for p, c in zip(pick, cultural)]
    frame = pd.DataFrame({
        "id": [f"v{i + 1:07d}" for i in range(n)],
        "lat": lat_lo + u[0] * (lat_hi - lat_lo),
        "lon": lon_lo + u[1] * (lon_hi - lon_lo),
        "category": [c for c, _ in categories],
        "parent_category": [p for _, p in categories],
        "is_cultural": cultural,
        "created_at": pd.to_datetime(np.concatenate(created), unit="s", utc=True),
        "user_count": np.floor(rng.lognormal(3.0, 1.0, n)).astype(np.int64) + 1,
    })
    return frame, wards, created_counts


def _transitions(cfg: SynthConfig, grid: _Grid, venues: pd.DataFrame, venue_wards: np.ndarray,
                 treated: np.ndarray, rng: np.random.Generator) -> pd.DataFrame:
    dr = grid.rows[:, None] - grid.rows[None, :]
    dc = grid.cols[:, None] - grid.cols[None, :]
    distance = cfg.ward_side_km * np.sqrt(dr ** 2 + dc ** 2)
    deterrence = 1.0 / (1.0 + distance ** cfg.gravity)
    created_year = venues["created_at"].dt.year.to_numpy()
    popularity = venues["user_count"].to_numpy(dtype=float)
    ids = venues["id"].to_numpy(dtype=object)
    m = cfg.transitions_per_year
    frames = []
    for i, year in enumerate(cfg.years):
        available = np.flatnonzero(created_year <= year)
        available = available[np.lexsort((available, venue_wards[available]))]
        wards = venue_wards[available]
        pop = popularity[available]
        mass = np.bincount(wards, weights=pop, minlength=cfg.wards)
        attraction = np.where(treated & cfg.boost_inflow, (1.0 + cfg.delta) ** i, 1.0)

        origin = rng.choice(len(available), size=m, p=pop / pop.sum())
        origin_ward = wards[origin]

        weights = deterrence * (mass * attraction)[None, :]
        cumulative = np.cumsum(weights / weights.sum(axis=1, keepdims=True), axis=1)
        cumulative[:, -1] = 1.0
        flat = (cumulative + np.arange(cfg.wards)[:, None]).ravel()
        draw = origin_ward + rng.random(m)
        dest_ward = np.searchsorted(flat, draw, side="right") - origin_ward * cfg.wards
        dest_ward = np.clip(dest_ward, 0, cfg.wards - 1)

        cum_pop = np.cumsum(pop)
        block_end = np.cumsum(np.bincount(wards, minlength=cfg.wards))
        block_start = block_end - np.bincount(wards, minlength=cfg.wards)
        before = np.concatenate([[0.0], cum_pop])[block_start]
        target = before[dest_ward] + rng.random(m) * mass[dest_ward]
        dest = np.searchsorted(cum_pop, target, side="right")
        dest = np.clip(dest, block_start[dest_ward], block_end[dest_ward] - 1)

        start, end = _year_seconds(year)
        t_origin = rng.integers(start, end, m)
        t_dest = t_origin + rng.integers(300, 3 * 3600, m)
        order = np.argsort(t_origin, kind="stable")
        frames.append(pd.DataFrame({
            "origin_venue": ids[available[origin[order]]],
            "dest_venue": ids[available[dest[order]]],
            "t_origin": pd.to_datetime(t_origin[order], unit="s", utc=True),
            "t_dest": pd.to_datetime(t_dest[order], unit="s", utc=True),
        }))
    return pd.concat(frames, ignore_index=True)


def generate_city(cfg: SynthConfig) -> SynthBundle:
    """
    Generate a synthetic city.

    The same config (seed included) always yields the same bundle.
    """
    rng = np.random.default_rng(cfg.seed)
    grid = _build_grid(cfg, rng)
    expenditure = _expenditure(cfg, grid, rng)

    score_2010 = np.round(rng.normal(30.0, 12.0, cfg.wards), 6)
    rank_2010 = _rank_descending(score_2010)
    cea = _mean_cea(expenditure, grid)
    if cfg.treatment_rule == "investment":
        more_deprived = rank_2010 <= (cfg.wards + 1) / 2
        treated = more_deprived & (cea > 1.0)
    else:
        treated = rng.random(cfg.wards) < RANDOM_TREATMENT_SHARE

    venues, venue_wards, created_counts = _venues(cfg, grid, treated, rng)
    transitions = _transitions(cfg, grid, venues, venue_wards, treated, rng)

    noise = rng.normal(0.0, cfg.sigma, cfg.wards) if cfg.sigma > 0 else np.zeros(cfg.wards)
    score_2015 = np.round(score_2010 - cfg.signal_beta * cfg.delta * treated + noise, 6)
    rank_2015 = _rank_descending(score_2015)
    imd = pd.concat([
        pd.DataFrame({"ward_code": grid.codes, "edition": 2010, "score": score_2010, "rank": rank_2010}),
        pd.DataFrame({"ward_code": grid.codes, "edition": 2015, "score": score_2015, "rank": rank_2015}),
    ], ignore_index=True)

    steps = len(cfg.years)
    ledger = {
        'spec_version': config.SPEC_VERSION,
        'seed': cfg.seed,
        'config': {**asdict(cfg), 'years': list(cfg.years)},
        'centre': list(grid.centre),
        'treated': sorted(grid.codes[treated].tolist()),
        'growth_factors': {
            code: {
                'inflow': [(1.0 + cfg.delta) ** i if (t and cfg.boost_inflow) else 1.0 for i in range(steps)],
                'venue_creation': [(1.0 + cfg.delta) ** i if (t and cfg.boost_venue_creation) else 1.0
                                   for i in range(steps)],
            }
            for code, t in zip(grid.codes, treated)
        },
        'imd': {
            code: {'rank_2010': int(r0), 'rank_2015': int(r1), 'delta': int(r1 - r0)}
            for code, r0, r1 in zip(grid.codes, rank_2010, rank_2015)
        },
        'counts': {
            'wards': cfg.wards,
            'boroughs': int(len(np.unique(grid.boroughs))),
            'venues': int(len(venues)),
            'venues_created': created_counts,
            'transitions': {str(y): cfg.transitions_per_year for y in cfg.years},
        },
    }
    logger.info("synthetic_city_generated", seed=cfg.seed, wards=cfg.wards, venues=len(venues),
                transitions=len(transitions), treated=int(treated.sum()))
    return SynthBundle(cfg, venues, transitions, _wards_geojson(cfg, grid), expenditure, imd, ledger)


def write_bundle(bundle: SynthBundle, directory) -> Dict[str, Path]:
    """
    Write the five input files, ledger.json and a run.cfg to a directory.

    Returns:
        File label -> path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / filename for name, filename in config.INPUT_FILES.items()}

    venues = bundle.venues.copy()
    venues["is_cultural"] = np.where(venues["is_cultural"], "true", "false")
    venues.to_csv(paths["venues_path"], index=False, date_format=TIMESTAMP_FORMAT, lineterminator="\n")
    bundle.transitions.to_csv(paths["transitions_path"], index=False, date_format=TIMESTAMP_FORMAT,
                              lineterminator="\n")
    with open(paths["wards_path"], "w", encoding="utf-8") as f:
        json.dump(bundle.wards, f, sort_keys=True)
    bundle.expenditure.to_csv(paths["expenditure_path"], index=False, lineterminator="\n")
    bundle.imd.to_csv(paths["imd_path"], index=False, lineterminator="\n")

    paths["ledger"] = directory / "ledger.json"
    with open(paths["ledger"], "w", encoding="utf-8") as f:
        json.dump(bundle.ledger, f, sort_keys=True, indent=2)

    paths["run_config"] = directory / "run.cfg"
    lat, lon = bundle.centre
    paths["run_config"].write_text(
        "# synthetic city\n"
        "input_dir=.\n"
        f"centre_lat={lat!r}\n"
        f"centre_lon={lon!r}\n"
        f"seed={bundle.config.seed}\n",
        encoding="utf-8",
    )
    logger.info("bundle_written", directory=str(directory))
    return paths


def load_ledger(directory) -> Dict:
    with open(Path(directory) / "ledger.json", encoding="utf-8") as f:
        return json.load(f)
