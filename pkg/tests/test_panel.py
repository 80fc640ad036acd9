import numpy as np
import pytest

from didbcf.panel import (
    NEVER,
    PanelFormatError,
    PanelSchema,
    PanelValidationError,
    build_panel,
    event_time,
    load_panel,
    treatment_indicator,
    validate_panel,
    write_panel,
)


def write_csv(path, text):
    path.write_text(text)
    return path


SCHEMA = PanelSchema(unit="unit", time="time", outcome="y", adoption="adoption",
                     covariates=("x1",))


class TestEventTime:
    def test_post_period(self):
        et = event_time(5, 7)
        assert et.defined and et.k == 2

    def test_pre_period(self):
        et = event_time(4, 3)
        assert et.defined and et.k == -1

    def test_never_treated(self):
        et = event_time(NEVER, 6)
        assert not et.defined

    def test_consistency_with_indicator(self):
        # exhaustive over a small grid: D(G, t) == defined and k >= 0
        for g in [NEVER, 1, 2, 3, 4]:
            for t in range(8):
                et = event_time(g, t)
                assert treatment_indicator(g, t) == (et.defined and et.k >= 0)


class TestTreatmentIndicator:
    def test_adoption_period_is_treated(self):
        assert treatment_indicator(4, 4)

    def test_pre_period_is_not(self):
        assert not treatment_indicator(4, 3)

    def test_never_treated_is_not(self):
        for t in range(10):
            assert not treatment_indicator(NEVER, t)


class TestLoadPanel:
    def test_small_csv(self, tmp_path):
        path = write_csv(tmp_path / "p.csv",
                         "unit,time,y,adoption,x1\n"
                         "1,1,0.5,0,0.1\n1,2,0.7,0,0.2\n"
                         "2,1,1.5,5,0.3\n2,2,1.9,5,0.4\n")
        panel = load_panel(path, SCHEMA)
        assert panel.n_units == 2
        assert panel.n_rows == 4
        assert panel.group_sizes() == {NEVER: 1, 5: 1}

    def test_duplicate_pair_rejected(self, tmp_path):
        path = write_csv(tmp_path / "p.csv",
                         "unit,time,y,adoption,x1\n"
                         "1,2,0.5,0,0.1\n1,2,0.7,0,0.2\n")
        with pytest.raises(PanelValidationError, match=r"\(1, 2\)"):
            load_panel(path, SCHEMA)

    def test_non_numeric_outcome(self, tmp_path):
        path = write_csv(tmp_path / "p.csv",
                         "unit,time,y,adoption,x1\n1,1,abc,0,0.1\n")
        with pytest.raises(PanelFormatError, match="line 2"):
            load_panel(path, SCHEMA)

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "p.csv", "unit,time,y\n1,1,0.5\n")
        with pytest.raises(PanelFormatError, match="adoption"):
            load_panel(path, SCHEMA)

    def test_mpdta_shaped_csv(self, tmp_path):
        # same shape as the county teen-employment panel: 500 units x 4 years
        rng = np.random.default_rng(0)
        lines = ["lemp,year,countyreal,first.treat,lpop"]
        first_treat = {u: [0, 2004, 2006, 2007][u % 4] for u in range(500)}
        for u in range(500):
            for year in (2004, 2005, 2006, 2007):
                lines.append(f"{rng.normal():.6f},{year},{1000 + u},"
                             f"{first_treat[u]},{rng.normal():.6f}")
        path = write_csv(tmp_path / "mpdta.csv", "\n".join(lines) + "\n")
        schema = PanelSchema(unit="countyreal", time="year", outcome="lemp",
                             adoption="first.treat", covariates=("lpop",))
        panel = load_panel(path, schema)
        assert panel.n_rows == 2000
        assert panel.n_units == 500
        assert panel.is_balanced
        assert set(panel.group_sizes()) == {NEVER, 2004, 2006, 2007}

    def test_round_trip_preserves_numbers(self, tmp_path):
        path = write_csv(tmp_path / "p.csv",
                         "unit,time,y,adoption,x1\n"
                         "1,1,0.123456789012345,0,1.1\n1,2,-2.5e-08,0,2.2\n"
                         "2,1,3.0,5,0.25\n2,2,4.5,5,0.125\n")
        panel = load_panel(path, SCHEMA)
        out = tmp_path / "out.csv"
        write_panel(panel, out, SCHEMA)
        again = load_panel(out, SCHEMA)
        np.testing.assert_array_equal(panel.y, again.y)
        np.testing.assert_array_equal(panel.x, again.x)
        np.testing.assert_array_equal(panel.adoption, again.adoption)


class TestValidatePanel:
    def _panel(self, drop_row=None):
        units, times, y, x, g = [], [], [], [], []
        for u in range(4):
            for t in range(3):
                if drop_row == (u, t):
                    continue
                units.append(u)
                times.append(t)
                y.append(float(u + t))
                x.append([0.0])
                g.append(2 if u < 2 else NEVER)
        return build_panel(units, times, y, np.array(x), g)

    def test_balanced(self):
        report = validate_panel(self._panel())
        assert report.balanced
        assert report.duplicate_count == 0
        assert report.group_sizes == {2: 2, NEVER: 2}

    def test_missing_cell_detected(self):
        report = validate_panel(self._panel(drop_row=(1, 2)))
        assert not report.balanced
        assert len(report.missing_cells) == 1

    def test_inconsistent_adoption_rejected(self):
        with pytest.raises(PanelValidationError, match="inconsistent"):
            build_panel([1, 1], [0, 1], [0.0, 1.0], np.zeros((2, 1)), [2, 3])
