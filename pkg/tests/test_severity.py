import json

import pytest

from roodbench.transforms.severity import (
    DEFAULT_TABLE,
    NOOP_PARAMS,
    PARAM_FIELDS,
    ConfigError,
    SeverityTable,
    TransformKind,
    validate_params,
)


def test_eleven_stable_kinds():
    assert [k.value for k in TransformKind] == [
        "noise", "gamma_compression", "gamma_expansion", "smoothing", "bias_field", "affine",
        "elastic_deformation", "downsample_iso", "downsample_aniso", "ghosting", "random_motion"]


def test_noise_schedule_is_the_published_one():
    table = SeverityTable()
    assert [table.params("noise", s)["sigma_ratio"] for s in range(1, 6)] == \
        [0.16, 0.32, 0.48, 0.64, 0.80]


def test_defaults_are_monotone_and_complete():
    table = SeverityTable()
    for kind in TransformKind:
        assert set(DEFAULT_TABLE[kind.value]) == set(PARAM_FIELDS[kind])
        for name in PARAM_FIELDS[kind]:
            vals = [table.params(kind, s)[name] for s in range(1, 6)]
            mags = [abs(v - 1) if name == "gamma" else v for v in vals]
            assert mags == sorted(mags)
    assert all(table.params("gamma_compression", s)["gamma"] < 1 for s in range(1, 6))
    assert all(table.params("gamma_expansion", s)["gamma"] > 1 for s in range(1, 6))


def test_integer_fields_are_ints():
    table = SeverityTable()
    assert isinstance(table.params("ghosting", 3)["num_ghosts"], int)
    assert isinstance(table.params("random_motion", 3)["num_segments"], int)


@pytest.mark.parametrize("entries, message", [
    ({"blur": {"sigma_mm": [1, 2, 3, 4, 5]}}, "unknown transform"),
    ({"noise": {"sigma": [1, 2, 3, 4, 5]}}, "unknown key"),
    ({"noise": {"sigma_ratio": [1, 2, 3]}}, "5 values"),
    ({"noise": {"sigma_ratio": [0.5, 0.4, 0.6, 0.7, 0.8]}}, "monotone"),
    ({"gamma_compression": {"gamma": [0.9, 0.8, 0.7, 0.6, 1.5]}}, "gamma"),
    ({"ghosting": {"num_ghosts": [1, 2, 3, 4, 5]}}, "num_ghosts"),
    ({"ghosting": {"num_ghosts": [2, 2.5, 3, 4, 5]}}, "integer"),
    ({"smoothing": {"sigma_mm": [-1, 0, 1, 2, 3]}}, "non-negative"),
])
def test_invalid_tables(entries, message):
    with pytest.raises(ConfigError, match=message):
        SeverityTable(entries)


def test_severity_range():
    with pytest.raises(ConfigError):
        SeverityTable().params("noise", 0)
    with pytest.raises(ConfigError):
        SeverityTable().params("noise", 6)


def test_override_and_checksum(tmp_path):
    base = SeverityTable()
    custom = SeverityTable({"noise": {"sigma_ratio": [0.1, 0.2, 0.3, 0.4, 0.5]}})
    assert custom.params("noise", 2) == {"sigma_ratio": 0.2}
    assert custom.params("affine", 1) == base.params("affine", 1)
    assert custom.checksum() != base.checksum()
    assert SeverityTable(base.to_dict()) == base
    assert SeverityTable(base.to_dict()).checksum() == base.checksum()


def test_from_toml_and_json(tmp_path):
    toml = tmp_path / "t.toml"
    toml.write_text('[smoothing]\nsigma_mm = [1.0, 2.0, 3.0, 4.0, 5.0]\n')
    assert SeverityTable.from_file(toml).params("smoothing", 5) == {"sigma_mm": 5.0}
    js = tmp_path / "t.json"
    js.write_text(json.dumps({"ghosting": {"num_ghosts": [2, 3, 4, 5, 6]}}))
    assert SeverityTable.from_file(js).params("ghosting", 5) == {"num_ghosts": 6}
    bad = tmp_path / "bad.toml"
    bad.write_text("[smoothing\n")
    with pytest.raises(ConfigError):
        SeverityTable.from_file(bad)
    with pytest.raises(ConfigError):
        SeverityTable.from_file(tmp_path / "missing.toml")


def test_noop_params_validate():
    for kind in TransformKind:
        validate_params(kind, NOOP_PARAMS[kind])
    with pytest.raises(ConfigError):
        validate_params(TransformKind.AFFINE, {"theta_deg": 1.0})
