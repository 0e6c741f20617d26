"""
Tests for the input readers.

Covers row-level rejection with reasons, header validation, missing files,
and the IMD rank permutation check.
"""

import json
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from src.core.errors import DataError, MissingFileError, SchemaError
from src.ingest.readers import (
    load_inputs,
    parse_expenditure,
    parse_imd,
    parse_transitions,
    parse_venues,
    parse_wards,
)

VENUES = """id,lat,lon,category,parent_category,is_cultural,created_at,user_count
a,51.50,-0.10,Museum,Arts,true,2010-05-01T10:00:00Z,10
b,51.51,-0.11,Cafe,Food,false,2011-02-01T09:00:00Z,3
c,95.00,-0.11,Cafe,Food,false,2011-02-01T09:00:00Z,3
d,51.52,-0.12,Cafe,Food,maybe,2011-02-01T09:00:00Z,3
a,51.53,-0.13,Bar,Nightlife,false,2011-02-01T09:00:00Z,1
e,51.54,-0.14,Gallery,Arts,1,not-a-date,4
f,51.55,-0.15,Gallery,Arts,yes,2012-07-01T00:00:00Z,-2
"""

TRANSITIONS = """origin_venue,dest_venue,t_origin,t_dest
a,b,2011-03-01T10:00:00Z,2011-03-01T11:00:00Z
b,a,2012-03-01T10:00:00Z,2012-03-01T10:30:00Z
a,zz,2011-03-01T10:00:00Z,2011-03-01T11:00:00Z
a,b,2011-03-01T12:00:00Z,2011-03-01T11:00:00Z
a,a,2011-04-01T10:00:00Z,2011-04-01T10:05:00Z
"""


def _square(lon0, lat0, size=0.01):
    return [[lon0, lat0], [lon0 + size, lat0], [lon0 + size, lat0 + size], [lon0, lat0 + size],
            [lon0, lat0]]


def _feature(code, borough, ring, area=1.0, population=1000, geometry="Polygon"):
    return {
        'type': 'Feature',
        'properties': {'ward_code': code, 'borough_code': borough, 'sub_region': 'Central',
                       'area_km2': area, 'population': population},
        'geometry': {'type': geometry, 'coordinates': [ring]},
    }


class TestReaders(unittest.TestCase):
    """Test suite for the five file readers."""

    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_venue_rejections_are_counted_by_reason(self):
        """Test that every venue row is either retained or rejected with a reason."""
        table = parse_venues(self._write("venues.csv", VENUES))
        self.assertEqual(sorted(table.ids), ["a", "b"])
        self.assertEqual(table.rejections.to_dict(), {
            "bad created_at": 1,
            "bad is_cultural": 1,
            "duplicate id": 1,
            "lat out of range": 1,
            "negative user_count": 1,
        })
        self.assertEqual(len(table) + table.rejections.total, table.input_rows)

    def test_duplicate_venue_keeps_first_row(self):
        """Test that a duplicate venue id keeps its first valid row."""
        table = parse_venues(self._write("venues.csv", VENUES))
        venue = table.frame.loc["a"]
        self.assertEqual(venue["category"], "Museum")
        self.assertTrue(venue["is_cultural"])

    def test_transitions_resolve_against_venues(self):
        """Test that transitions are checked against known venues and their timestamps."""
        venues = parse_venues(self._write("venues.csv", VENUES))
        log = parse_transitions(self._write("transitions.csv", TRANSITIONS), venues)
        self.assertEqual(len(log), 3)
        self.assertEqual(log.rejections.to_dict(),
                         {"t_dest before t_origin": 1, "unknown dest venue": 1})
        self.assertEqual(log.years, [2011, 2012])
        self.assertEqual(len(log.for_year(2011)), 2)

    def test_empty_transitions_file(self):
        """Test that an empty transitions file gives an empty log."""
        venues = parse_venues(self._write("venues.csv", VENUES))
        log = parse_transitions(self._write("transitions.csv", ""), venues)
        self.assertEqual(len(log), 0)

    def test_header_mismatch(self):
        """Test that a wrong header is a schema error."""
        path = self._write("venues.csv", "id,lat,lon\na,1,2\n")
        with self.assertRaises(SchemaError):
            parse_venues(path)

    def test_missing_file_names_the_file(self):
        """Test that a missing file error names the file and exits with 2."""
        with self.assertRaises(MissingFileError) as ctx:
            parse_venues(self.dir / "nope.csv")
        self.assertIn("venues file not found", str(ctx.exception))
        self.assertEqual(ctx.exception.exit_code, 2)

    def test_wards(self):
        """Test ward parsing, rejection reasons and the lon/lat swap."""
        document = {'type': 'FeatureCollection', 'features': [
            _feature("W2", "B1", _square(-0.1, 51.5)),
            _feature("W1", "B1", _square(-0.11, 51.5)),
            _feature("W1", "B1", _square(-0.12, 51.5)),
            _feature("W3", "B1", _square(-0.13, 51.5)[:-1]),
            _feature("W4", "B1", _square(-0.14, 51.5), geometry="MultiPolygon"),
            _feature("W5", "B2", _square(-0.15, 51.5), area=0),
        ]}
        table = parse_wards(self._write("wards.geojson", json.dumps(document)))
        self.assertEqual([w.ward_code for w in table], ["W1", "W2"])
        self.assertEqual(table.rejections.to_dict(), {
            "duplicate ward_code": 1, "invalid ward": 2, "unsupported geometry": 1,
        })
        # GeoJSON is lon/lat; wards store lat/lon
        self.assertEqual(table.by_code()["W1"].outer_ring[0], (51.5, -0.11))
        self.assertEqual(table.boroughs(), {"B1": ["W1", "W2"]})

    def test_ward_with_hole(self):
        """Test that interior rings survive parsing as lat/lon holes after the outer ring."""
        feature = _feature("W1", "B1", _square(-0.1, 51.5, size=0.04))
        feature['geometry']['coordinates'].append(_square(-0.09, 51.51, size=0.01))
        table = parse_wards(self._write("wards.geojson", json.dumps(
            {'type': 'FeatureCollection', 'features': [feature]})))
        ward = table.by_code()["W1"]
        self.assertEqual(len(ward.polygon), 2)
        self.assertEqual(ward.polygon[1][0], (51.51, -0.09))
        self.assertEqual(ward.polygon[1][0], ward.polygon[1][-1])

    def test_wards_not_a_feature_collection(self):
        """Test that a document other than a FeatureCollection is a schema error."""
        with self.assertRaises(SchemaError):
            parse_wards(self._write("wards.geojson", json.dumps({'type': 'Feature'})))

    def test_expenditure(self):
        """Test expenditure rejections and fiscal year ordering."""
        text = ("borough_code,fiscal_year,category,amount\n"
                "B1,2010/11,tourism,100\n"
                "B1,2010/11,tourism,200\n"
                "B1,2010/12,tourism,100\n"
                "B1,2010/11,parking,5\n"
                "B1,2011/12,tourism,-1\n"
                "B1,2011/12,total_services,1000\n")
        table = parse_expenditure(self._write("expenditure.csv", text))
        self.assertEqual(len(table.frame), 2)
        self.assertEqual(table.frame.iloc[0]["amount"], 100.0)
        self.assertEqual(table.rejections.to_dict(), {
            "bad fiscal_year": 1, "duplicate record": 1, "negative amount": 1, "unknown category": 1,
        })
        self.assertEqual(table.fiscal_years, ["2010/11", "2011/12"])

    def test_imd_ranks_must_be_a_permutation(self):
        """Test that 2010 ranks with a gap are a data error."""
        text = ("ward_code,edition,score,rank\n"
                "W1,2010,30.0,1\n"
                "W2,2010,20.0,3\n")
        with self.assertRaises(DataError):
            parse_imd(self._write("imd.csv", text))

    def test_imd_editions(self):
        """Test that unsupported IMD editions are rejected and counted."""
        text = ("ward_code,edition,score,rank\n"
                "W1,2010,30.0,1\n"
                "W2,2010,20.0,2\n"
                "W1,2015,10.0,2\n"
                "W2,2015,25.0,1\n"
                "W3,2019,5.0,1\n")
        table = parse_imd(self._write("imd.csv", text))
        self.assertEqual(table.rejections.to_dict(), {"unsupported edition": 1})
        self.assertEqual(table.edition(2015).at["W1", "rank"], 2)

    def test_load_inputs_reports_missing_imd(self):
        """Test that load_inputs reports which input file is missing."""
        paths = {
            'venues_path': self._write("venues.csv", VENUES),
            'transitions_path': self._write("transitions.csv", TRANSITIONS),
            'wards_path': self._write("wards.geojson", json.dumps(
                {'type': 'FeatureCollection', 'features': []})),
            'expenditure_path': self._write("expenditure.csv",
                                            "borough_code,fiscal_year,category,amount\n"),
            'imd_path': self.dir / "imd.csv",
        }
        with self.assertRaises(MissingFileError) as ctx:
            load_inputs(**paths)
        self.assertEqual(ctx.exception.label, "imd")


if __name__ == '__main__':
    unittest.main()
