import json
import math

import pytest

from camprecond.config import PerturbSpec, RunConfig, from_dict, load
from camprecond.errors import ConfigError


def test_defaults_validate():
    conf = load(None)
    assert conf == RunConfig()
    assert conf.precond.lam == 0.1 and conf.precond.mu == 1e-8
    assert (conf.opt.steps, conf.opt.warmup_steps) == (2000, 100)
    assert (conf.proxy.near, conf.proxy.far, conf.proxy.m) == (3.0, 5.0, 1000)


def test_overrides_parse_json_values(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"opt": {"steps": 10}, "precond": {"lambda": 0.5}}))
    conf = load(path, {"opt.steps": "500", "experiment.seeds": "[3, 4]", "camera.kind": "se3+log"})
    assert conf.opt.steps == 500 and conf.precond.lam == 0.5
    assert conf.experiment.seeds == (3, 4) and conf.camera.kind == "se3+log"


def test_perturb_preset():
    conf = from_dict({"perturb": {"preset": "p360", "seed": 3}})
    assert conf.perturb.sigma_focal_log == pytest.approx(math.log(1.02))
    assert conf.perturb.seed == 3
    assert PerturbSpec.preset("desk") == PerturbSpec.preset("psynth_scaled")
    with pytest.raises(ConfigError):
        PerturbSpec.preset("nope")


@pytest.mark.parametrize("raw", [
    {"opt": {"stepz": 1}},
    {"optimizer": {}},
    {"opt": {"steps": "many"}},
    {"opt": {"steps": 0}},
    {"precond": {"lambda": -1}},
    {"proxy": {"near": 5.0, "far": 1.0}},
    {"experiment": {"kinds": ["se4"]}},
    {"experiment": {"modes": ["cholesky"]}},
    {"opt": {"shared_weights": {"fov": 1.0}}},
    {"camera": {"fx": -1.0}},
    {"trails_kinds": ["se3+wide"]},
])
def test_rejects_bad_config(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_unreadable_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load(bad)
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.json")


def test_json_round_trip():
    conf = load(None, {"opt.shared": "true", "precond.lambda": "0.2"})
    again = from_dict(json.loads(json.dumps(conf.to_json())))
    assert again == conf


def test_schedule_for_scales_preconditioned_arms():
    opt = RunConfig().opt
    assert opt.schedule_for("none").lr_start == opt.lr_start
    assert opt.schedule_for("full").lr_start == opt.lr_start * opt.precond_lr_scale
