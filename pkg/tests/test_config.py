import json

import pytest

from idmark.config import RunConfig, default_document, load_config, sub_seed
from idmark.errors import ConfigError, PreconditionError

from conftest import P, Q, R, X0


def test_defaults():
    cfg = load_config(environ={})
    assert cfg.watermark_length == 128 and cfg.cutoff == 0.5
    assert cfg.threshold == 0.75 and cfg.swap_beta == 0.05 and cfg.preset == "regular"
    p = cfg.chaotic_params()
    assert (p.x0, p.r, p.p, p.q, p.length) == (X0, R, P, Q, 128)


def test_precedence_file_env_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"master_seed": 5, "chaos": {"x0": 0.2, "r": 3.8}, "codec": {"quant_step": 90}}))
    cfg = load_config(path, environ={})
    assert cfg.master_seed == 5 and cfg.codec.quant_step == 90 and cfg.codec.block_size == 8
    assert cfg.chaos["x0"] == 0.2 and cfg.chaos["q"] == 11
    cfg = load_config(path, environ={"IDMARK_X0": "0.3"})
    assert cfg.chaotic_params().x0 == 0.3 and cfg.chaotic_params().r == 3.8
    cfg = load_config(path, {"chaos": {"x0": 0.4}, "master_seed": 9}, environ={"IDMARK_X0": "0.3"})
    assert cfg.chaotic_params().x0 == 0.4 and cfg.master_seed == 9


def test_public_dict_omits_cipher_constants():
    cfg = load_config(environ={"IDMARK_X0": "0.123456789", "IDMARK_R": "3.87654321"})
    text = json.dumps(cfg.public_dict()) + repr(cfg)
    assert "0.123456789" not in text and "3.87654321" not in text
    assert "chaos" not in cfg.public_dict()


@pytest.mark.parametrize("doc", [
    {"preset": "brutal"},
    {"codec": {"quant_step": -1}},
    {"codec": {"bogus": 1}},
    {"watermark_length": "many"},
    {"presets": {"easy": {"sharpen": [1]}}},
    {"presets": {"regular": {"jpeg": [500]}}},
])
def test_invalid_documents(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_config(path, environ={})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_bad_chaos_values_fail_on_use():
    cfg = load_config(environ={"IDMARK_P": "4"})
    with pytest.raises(PreconditionError):
        cfg.chaotic_params()


def test_missing_path():
    with pytest.raises(ConfigError, match="--registry"):
        RunConfig().path("registry")
    assert RunConfig().path("corpus", required=False) is None


def test_sub_seed_independent_and_stable():
    assert sub_seed(0, 1, 2) == sub_seed(0, 1, 2)
    seeds = {sub_seed(0, i, j) for i in range(30) for j in range(30)}
    assert len(seeds) == 900
    assert sub_seed(1, 1, 2) != sub_seed(0, 1, 2)


def test_swap_betas_replaced_not_merged(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"swap_betas": {"only": 0.1}}))
    assert load_config(path, environ={}).swap_betas == {"only": 0.1}
    assert len(default_document()["swap_betas"]) == 4
