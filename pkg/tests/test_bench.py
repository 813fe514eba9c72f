import json

import pytest

from dynauth.algebra import make_suite
from dynauth.bench import EXPECTED, run_bench


@pytest.fixture(scope="module")
def report():
    return run_bench(make_suite("transparent"))


class TestCounts:
    def test_enforced_counts_match(self, report):
        assert report.ok

    @pytest.mark.parametrize("phase", ["C1", "C2", "C2_precomputed", "C3"])
    def test_group_ops_exact(self, report, phase):
        p = report.phase(phase)
        for op in ("pairing", "g1_mul", "g1_add", "map_to_point"):
            assert p.traced[op] == EXPECTED[phase][op], op

    def test_c1_fully_exact(self, report):
        assert report.phase("C1").delta == {}

    def test_hash_deltas_reported(self, report):
        assert report.phase("C2").delta == {"hash": 1}
        assert report.phase("C2").flagged == ["hash"]
        assert report.phase("C3").delta == {"hash": 1}

    def test_precompute_saves_one_mul(self, report):
        assert report.phase("C2").traced["g1_mul"] - report.phase("C2_precomputed").traced["g1_mul"] == 1

    def test_render_and_json(self, report):
        text = report.render()
        assert "C3" in text and "delta reported" in text
        d = json.loads(report.to_json())
        assert [p["phase"] for p in d["phases"]] == ["C1", "C2", "C2_precomputed", "C3"]


@pytest.mark.production
def test_backend_invariance(report, production):
    prod = run_bench(production)
    assert [p.traced for p in prod.phases] == [p.traced for p in report.phases]
