from pathlib import Path

import pytest

from plaplace.config import ConfigError, ExperimentConfig, load_config, override, parse_config
from plaplace.solver import Scheme

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))


def test_defaults():
    cfg = parse_config({})
    assert cfg.problem.p == 3.0 and cfg.refinement.pairs == [(64, 64), (128, 128), (256, 256)]
    assert cfg.solver.solve_config().scheme is Scheme.EXPLICIT


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert isinstance(cfg, ExperimentConfig)
    cfg.problem.spec()
    cfg.verify.params()


@pytest.mark.parametrize("data, msg", [
    ({"problem": {"pp": 3}}, "pp"),
    ({"surprise": 1}, "surprise"),
    ({"refinement": {"levels": [64, 32]}}, "strictly increasing"),
    ({"refinement": {"levels": [32, 32]}}, "strictly increasing"),
    ({"refinement": {"levels": [2, 8]}}, "at least 4"),
    ({"refinement": {"levels": [8, 16], "time_levels": [8]}}, "match"),
    ({"verify": {"checks": ["estimate10"]}}, "unknown checks"),
    ({"verify": {"checks": ["transition", "transition"]}}, "duplicate"),
    ({"verify": {"dq_offsets": [1, 2]}}, "decreasing"),
    ({"sweep": {"axis": "q"}}, "unknown axis"),
    ({"problem": {"initial": "gauss"}}, "initial"),
    ({"problem": {"boundary": "periodic"}}, "boundary"),
    ({"problem": {"time": [2.0, 1.0]}}, "increasing"),
    ({"solver": {"scheme": "crank"}}, "scheme"),
    ({"jobs": 0}, "jobs"),
])
def test_invalid(data, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem\np = 3")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(bad)


def test_override():
    cfg = parse_config({})
    new = override(cfg, **{"problem.p": 4.0, "refinement.levels": [16, 32]})
    assert new.problem.p == 4.0 and new.refinement.levels == [16, 32]
    assert cfg.problem.p == 3.0
    with pytest.raises(ConfigError, match="unknown config key"):
        override(cfg, **{"problem.q": 1})
    with pytest.raises(ConfigError):
        override(cfg, **{"refinement.levels": [32, 16]})


def test_readme_schema_block_is_the_default_config():
    import re
    import sys

    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    text = (Path(__file__).parent.parent / "README.md").read_text()
    block = re.search(r"```toml\n(.*?)```", text, re.S).group(1)
    assert parse_config(tomllib.loads(block)) == parse_config({})
