"""
Tests for expenditure apportionment and fiscal-year alignment.
"""

import math

import pandas as pd
import pytest

from src.core.errors import DataError
from src.core.models import ExpenditureCategory, Ward
from src.ingest.expenditure import align_periods, apportion_expenditure

RING = (((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 0.0)),)


def _wards(rows):
    return [Ward(code, borough, "Central", RING, 1.0, population) for code, borough, population in rows]


def _records(rows):
    return pd.DataFrame(rows, columns=["borough_code", "fiscal_year", "category", "amount"])


class TestApportion:
    """Test equal division of borough spending."""

    def test_four_wards_share_equally(self):
        """Test that four wards each get a quarter of the borough amount."""
        wards = _wards([(f"W{i}", "B1", 100) for i in range(4)])
        result = apportion_expenditure(_records([("B1", "2010/11", "tourism", 100.0)]), wards)
        amounts = result.amount(ExpenditureCategory.TOURISM)
        assert amounts.tolist() == [25.0] * 4

    def test_conserves_borough_totals(self):
        """Test that ward amounts sum back to the borough total."""
        wards = _wards([("A1", "A", 10), ("A2", "A", 20), ("A3", "A", 30), ("B1", "B", 5)])
        records = _records([
            ("A", "2010/11", "culture_heritage", 220.5e6),
            ("B", "2010/11", "culture_heritage", 1.0),
        ])
        amounts = apportion_expenditure(records, wards).amount(ExpenditureCategory.CULTURE_HERITAGE)
        borough_a = amounts[amounts.index.get_level_values("ward_code").str.startswith("A")].sum()
        assert borough_a == pytest.approx(220.5e6, rel=1e-9)

    def test_per_capita_uses_borough_population(self):
        """Test that per-capita spending divides by the borough population share."""
        wards = _wards([("A1", "A", 100), ("A2", "A", 300)])
        result = apportion_expenditure(_records([("A", "2010/11", "library_service", 800.0)]), wards)
        per_capita = result.per_capita(ExpenditureCategory.LIBRARY_SERVICE)
        # ward amount 400 over borough population 400 spread across 2 wards
        assert per_capita.tolist() == [2.0, 2.0]

    def test_missing_population_marks_per_capita_missing(self):
        """Test that a missing ward population makes per-capita values missing."""
        wards = _wards([("A1", "A", 100), ("A2", "A", None)])
        result = apportion_expenditure(_records([("A", "2010/11", "tourism", 10.0)]), wards)
        assert all(math.isnan(v) for v in result.per_capita(ExpenditureCategory.TOURISM))
        assert result.amount(ExpenditureCategory.TOURISM).tolist() == [5.0, 5.0]

    def test_borough_without_wards(self):
        """Test that spending for a borough with no wards is a data error."""
        wards = _wards([("A1", "A", 100)])
        records = _records([("A", "2010/11", "tourism", 1.0), ("Z", "2010/11", "tourism", 1.0)])
        with pytest.raises(DataError, match="zero wards"):
            apportion_expenditure(records, wards)

    def test_ward_borough_without_records(self):
        """Test that a ward whose borough has no spending is a data error."""
        wards = _wards([("A1", "A", 100), ("B1", "B", 100)])
        with pytest.raises(DataError, match="without expenditure"):
            apportion_expenditure(_records([("A", "2010/11", "tourism", 1.0)]), wards)


class TestAlignPeriods:
    """Test fiscal to calendar year mapping."""

    def test_default_alignment(self):
        """Test the default fiscal to calendar year mapping."""
        period_map = align_periods()
        assert period_map.calendar_year("2010/11") == 2011
        assert period_map.calendar_year("2012/13") == 2013
        assert period_map.calendar_years == [2011, 2012, 2013]

    def test_offset_override(self):
        """Test a non-default year offset."""
        assert align_periods(["2010/11"], offset=2).calendar_year("2010/11") == 2012

    def test_unsorted_input_is_ordered(self):
        """Test that fiscal years come back in order."""
        assert align_periods(["2011/12", "2010/11"]).fiscal_years == ["2010/11", "2011/12"]

    def test_gap_is_an_error(self):
        """Test that a missing fiscal year in the middle is a data error."""
        with pytest.raises(DataError):
            align_periods(["2010/11", "2012/13"])

    def test_malformed_label(self):
        """Test that a malformed fiscal year label is a data error."""
        with pytest.raises(DataError):
            align_periods(["2010-11"])
