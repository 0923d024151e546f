"""Smoke tests for the Python bindings."""

import json
import math
import os
import pathlib

import numpy as np
import pytest

import ballistic_lab as bl

CONFIGS = pathlib.Path(
    os.environ.get("BALLISTIC_CONFIG_DIR", pathlib.Path(__file__).resolve().parents[2] / "configs")
)
GOLDEN = "0.6180339887498948482045868343656381177203"


def test_validate_scenario_writes_a_manifest(tmp_path):
    result = bl.run_config(CONFIGS / "validate.yaml", tmp_path, seed=4)
    assert result["passed"]
    assert result["seed"] == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 4
    names = {a["name"] for a in manifest["artifacts"]}
    assert names == {"validate.json"}
    body = (tmp_path / "validate.json").read_bytes()
    assert manifest["artifacts"][0]["sha256"] == bl.sha256_hex(body)


def test_config_errors_raise_value_error(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: validate\npotential: free\nbogus: 1\n")
    with pytest.raises(ValueError, match="unknown key 'bogus'"):
        bl.run_config(bad, tmp_path / "out")


def test_branch_solver():
    free = CONFIGS / "potentials" / "one_layer_g005.yaml"
    point = bl.solve_branch(free, 5.0, 1.0)
    assert point is not None
    # Second-order shift at g = 0.05 is far below 1e-2.
    assert abs(point["lambda"] - 26.0) < 1e-2
    gx, gy = point["grad"]
    assert math.hypot(gx, gy) >= math.hypot(5.0, 1.0)
    # On the Bragg line kx = -pi the plane wave mixes with its image: resonant.
    assert bl.solve_branch(free, -math.pi, 5.0) is None


def test_arithmetic_conditions():
    a1 = bl.check_a1(GOLDEN, (1, -1))
    assert a1["holds"]
    assert len(a1["algebraic_zeros"]) == 38
    assert bl.check_a1("3/8")["degenerate_input"]
    assert bl.check_a2(CONFIGS / "potentials" / "quasi_golden_nonseparable.yaml")
    assert not bl.check_a2(CONFIGS / "potentials" / "quasi_separable.yaml")


def test_free_transport_matches_the_closed_form():
    sigma, k0 = 0.5, 2.0
    T = [0.2, 0.4, 0.8]
    r = bl.free_transport(128, 64.0, (k0, 0.0), sigma, T, 0.005)
    expected = 1.0 / (2 * sigma**2) + 2 * np.asarray(T) ** 2 * (k0**2 + 2 * sigma**2)
    assert r["trusted"]
    np.testing.assert_allclose(r["abel"], expected, rtol=2e-3)


def test_packet_file_round_trip(tmp_path):
    bl.run_config(CONFIGS / "transform.yaml", tmp_path)
    values, box, time = bl.read_packet(tmp_path / "packet.bin")
    assert values.shape == (128, 128)
    assert box == (32.0, 32.0)
    assert time == 0.0
    cell = (32.0 / 128) ** 2
    assert abs(np.sum(np.abs(values) ** 2) * cell - 1.0) < 1e-12
