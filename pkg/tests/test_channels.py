import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdb92.channels import (
    ObservedStats,
    ProtocolConfig,
    amplitude_damping_kraus,
    depolarizing_kraus,
    depolarizing_map,
    depolarizing_stats,
    dump_stats,
    load_kraus,
    load_stats,
    stats_from_channel,
    stats_to_dict,
)
from hdb92.errors import FormatError, InvalidArgument, InvalidStats
from hdb92.qcore import KrausSet, apply_channel, ket, projector, superposition_phi

from .conftest import random_density


def assert_stats_close(a: ObservedStats, b: ObservedStats, tol=1e-9):
    for row in ("p_i", "p_j", "p_phi"):
        assert np.allclose(getattr(a, row), getattr(b, row), atol=tol, rtol=0), row
    for name in ("p_i_phi", "p_j_phi", "p_phi_phi"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=tol), name


class TestDepolarizingStats:
    def test_noiseless_qubit(self, qubit):
        s = depolarizing_stats(qubit, 0)
        assert s.p_ii == 1 and s.p_ij == 0 and s.p_i_phi == 0.5 and s.p_phi_phi == 1

    def test_qubit(self, qubit):
        s = depolarizing_stats(qubit, 0.1)
        assert s.p_ii == pytest.approx(0.9)
        assert s.p_ij == pytest.approx(0.1)
        assert s.p_i_phi == pytest.approx(0.5, abs=1e-15)

    def test_d4(self):
        s = depolarizing_stats(ProtocolConfig(4, 0, 1), 0.15)
        assert np.allclose(s.p_i[1:], 0.05)
        assert s.p_i_phi == pytest.approx(0.5 * (1 - 0.2) + 0.05)
        assert s.p_i_phi == pytest.approx(0.45)
        assert s.p_phi[2] == pytest.approx(0.05)
        for row in (s.p_i, s.p_j, s.p_phi):
            assert row.sum() == pytest.approx(1, abs=1e-12)

    def test_range(self, qubit):
        with pytest.raises(InvalidArgument):
            depolarizing_stats(qubit, 0.51)
        with pytest.raises(InvalidArgument):
            depolarizing_stats(qubit, -0.01)

    @settings(max_examples=50)
    @given(st.integers(2, 40), st.floats(0, 1), st.data())
    def test_symmetry(self, D, frac, data):
        i = data.draw(st.integers(0, D - 1))
        j = data.draw(st.integers(0, D - 1).filter(lambda v: v != i))
        Q = frac * (D - 1) / D
        s = depolarizing_stats(ProtocolConfig(D, i, j), Q)
        perm = np.arange(D)
        perm[[i, j]] = perm[[j, i]]
        assert np.allclose(s.p_i, s.p_j[perm], atol=1e-15)
        assert s.p_i_phi == s.p_j_phi

    def test_monotone(self):
        cfg = ProtocolConfig(5, 0, 1)
        vals = [depolarizing_stats(cfg, q).p_ii for q in np.linspace(0, 0.8, 41)]
        assert np.all(np.diff(vals) < 0)


class TestDepolarizingKraus:
    def test_noiseless(self):
        k = depolarizing_kraus(2, 0)
        assert np.allclose(k.operators[0], np.eye(2))
        assert np.allclose(k.operators[1:], 0)

    def test_basis_state(self):
        out = apply_channel(depolarizing_kraus(2, 0.1), projector(ket(2, 0)))
        assert np.allclose(out, np.diag([0.9, 0.1]), atol=1e-12)

    def test_phi_fidelity_matches_closed_form(self):
        cfg = ProtocolConfig(4, 0, 1)
        phi = superposition_phi(cfg)
        out = apply_channel(depolarizing_kraus(4, 0.15), projector(phi))
        assert np.real(phi.conj() @ out @ phi) == pytest.approx(depolarizing_stats(cfg, 0.15).p_phi_phi, abs=1e-12)

    @pytest.mark.parametrize("dim,Q", [(2, 0.3), (3, 0.5), (5, 0.2), (6, 5 / 6)])
    def test_matches_closed_form_map(self, dim, Q, rng):
        k = depolarizing_kraus(dim, Q)
        for _ in range(3):
            rho = random_density(dim, rng)
            assert np.allclose(apply_channel(k, rho), depolarizing_map(rho, Q), atol=1e-12)

    def test_range(self):
        with pytest.raises(InvalidArgument):
            depolarizing_kraus(3, 0.7)


class TestAmplitudeDamping:
    def test_no_damping(self):
        k = amplitude_damping_kraus(4, 0)
        assert np.allclose(k.operators[0], np.eye(4))
        assert np.allclose(k.operators[1:], 0)

    def test_full_damping(self, rng):
        k = amplitude_damping_kraus(2, 1)
        for _ in range(3):
            assert np.allclose(apply_channel(k, random_density(2, rng)), np.diag([1, 0]), atol=1e-12)

    def test_matrices(self):
        k = amplitude_damping_kraus(4, 0.08)
        assert np.allclose(k.operators[0], np.diag([1] + [math.sqrt(0.92)] * 3))
        for m in range(1, 4):
            want = np.zeros((4, 4))
            want[0, m] = math.sqrt(0.08)
            assert np.allclose(k.operators[m], want)
        comp = sum(e.conj().T @ e for e in k.operators)
        assert np.allclose(comp, np.eye(4), atol=1e-12)

    def test_range(self):
        with pytest.raises(InvalidArgument):
            amplitude_damping_kraus(3, 1.2)


class TestStatsFromChannel:
    @pytest.mark.parametrize("D,i,j", [(2, 0, 1), (3, 2, 0), (5, 1, 4)])
    def test_identity(self, D, i, j):
        s = stats_from_channel(KrausSet(np.eye(D)), ProtocolConfig(D, i, j))
        assert s.p_ii == 1 and s.p_jj == 1
        assert s.p_phi_phi == pytest.approx(1, abs=1e-15)
        assert s.p_i_phi == pytest.approx(0.5) and s.p_j_phi == pytest.approx(0.5)
        assert s.p_phi_i == pytest.approx(0.5) and s.p_phi_j == pytest.approx(0.5)

    def test_full_damping(self, qubit):
        s = stats_from_channel(amplitude_damping_kraus(2, 1), qubit)
        assert s.p_phi[0] == pytest.approx(1)
        assert s.p_phi_phi == pytest.approx(0.5)
        assert s.p_j[0] == pytest.approx(1)

    @pytest.mark.parametrize("D,Q", [(4, 0.15), (3, 0.4), (2, 0.05)])
    def test_depolarizing_agrees(self, D, Q):
        cfg = ProtocolConfig(D, 0, 1)
        assert_stats_close(stats_from_channel(depolarizing_kraus(D, Q), cfg), depolarizing_stats(cfg, Q))

    def test_zero_damping_is_identity(self):
        cfg = ProtocolConfig(4, 1, 3)
        a = stats_from_channel(amplitude_damping_kraus(4, 0), cfg)
        b = stats_from_channel(KrausSet(np.eye(4)), cfg)
        assert a == b

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            stats_from_channel(amplitude_damping_kraus(3, 0.1), ProtocolConfig(4))


class TestObservedStatsValidation:
    def test_clamps_tiny_negative(self, qubit):
        s = ObservedStats(qubit, [1 + 5e-10, -5e-10], [0, 1], [0.5, 0.5], 0.5, 0.5, 1)
        assert s.p_ij == 0 and s.p_ii == 1

    def test_row_sum(self, qubit):
        with pytest.raises(InvalidStats, match="p_i"):
            ObservedStats(qubit, [0.5, 0.3], [0, 1], [0.5, 0.5], 0.5, 0.5, 1)

    def test_bad_length(self, qubit):
        with pytest.raises(InvalidStats, match="length"):
            ObservedStats(qubit, [1, 0, 0], [0, 1], [0.5, 0.5], 0.5, 0.5, 1)

    def test_scalar_range(self, qubit):
        with pytest.raises(InvalidStats, match="p_phi_phi"):
            ObservedStats(qubit, [1, 0], [0, 1], [0.5, 0.5], 0.5, 0.5, 1.2)

    def test_rows_immutable(self, qubit):
        s = depolarizing_stats(qubit, 0.1)
        with pytest.raises(ValueError):
            s.p_i[0] = 0.3


def _doc(**overrides):
    d = {
        "dimension": 2, "i": 0, "j": 1,
        "p_i": [1.0, 0.0], "p_j": [0.0, 1.0], "p_phi": [0.5, 0.5],
        "p_i_phi": 0.5, "p_j_phi": 0.5, "p_phi_phi": 1.0,
    }
    d.update(overrides)
    return d


class TestStatsFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(_doc()))
        s = load_stats(path)
        assert s.p_ii == 1
        orig = stats_from_channel(amplitude_damping_kraus(4, 0.08), ProtocolConfig(4, 1, 3))
        dump_stats(orig, tmp_path / "t.json")
        again = load_stats(tmp_path / "t.json")
        assert stats_to_dict(again) == stats_to_dict(orig)

    def test_bad_sum(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(_doc(p_i=[0.8, 0.0])))
        with pytest.raises(InvalidStats, match="p_i"):
            load_stats(path)

    def test_relaxed_tolerance(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(_doc(p_i=[0.98, 0.0], tolerance=0.05)))
        assert load_stats(path).tolerance == 0.05

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(_doc(extra=1)))
        with pytest.raises(FormatError, match="extra"):
            load_stats(path)

    def test_missing_key(self, tmp_path):
        d = _doc()
        del d["p_j_phi"]
        path = tmp_path / "s.json"
        path.write_text(json.dumps(d))
        with pytest.raises(FormatError, match="p_j_phi"):
            load_stats(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            load_stats(path)
        with pytest.raises(FormatError):
            load_stats(tmp_path / "missing.json")


def test_load_kraus(tmp_path):
    k = amplitude_damping_kraus(3, 0.2)
    ops = [[[[z.real, z.imag] for z in row] for row in op] for op in k.operators]
    path = tmp_path / "k.json"
    path.write_text(json.dumps({"dimension": 3, "operators": ops}))
    assert np.allclose(load_kraus(path).operators, k.operators)
    path.write_text(json.dumps({"dimension": 2, "operators": ops}))
    with pytest.raises(FormatError):
        load_kraus(path)
