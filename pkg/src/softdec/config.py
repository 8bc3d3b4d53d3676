"""JSON run configuration with strict validation and defaults.

Sections: ``code``, ``channel``, ``model``, ``train``, ``tpc``, ``sim`` plus a
top-level ``seed``. Unknown keys are rejected and range problems are reported
with their key path, e.g. ``train.esn0_range_db``.
"""

from __future__ import annotations

import copy
import json

DEFAULTS = {
    "seed": 0,
    "code": {"spec": "hamming(3)"},
    "channel": {"esn0_db": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]},
    "model": {"L": 4, "T": 5, "h": None, "checkpoint": None, "dtype": "float32"},
    "train": {
        "batch_size": 2**13,
        "esn0_range_db": [0.0, 6.0],
        "lr_init": 1e-3,
        "lr_floor": 1e-6,
        "epochs_bce": 10,
        "epochs_reg": 0,
        "steps_per_epoch": 100,
        "reg_kind": "moments",
        "alpha_reg": None,
        "rho": 0.95,
        "val_esn0_db": [0.0, 2.0, 4.0, 6.0],
        "val_frames": 2048,
        "plateau_factor": 0.1,
        "plateau_patience": 10,
        "max_seconds": None,
    },
    "tpc": {
        "col_code": None,
        "row_code": None,
        "N": 2,
        "component": "nn",
        "alpha_init": 0.7,
        "alpha_c": None,
        "alpha_r": None,
        "lr": 1e-6,
        "epochs": 4000,
        "batch": 256,
        "esn0_range_db": [2.0, 2.0],
        "normalize": True,
        "chase_p": 4,
    },
    "sim": {
        "decoders": ["map", "table"],
        "max_frames": 100_000,
        "target_frame_errors": 100,
        "block_frames": 1000,
        "workers": 1,
        "bp_iters": 50,
        "chase_p": 4,
        "table_t": None,
        "soft_esn0_db": 1.0,
        "soft_frames": 10_000,
        "hist_bins": 100,
        "hist_range": None,
        "svg": False,
    },
}


class ConfigError(ValueError):
    pass


def _check(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        kp = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{kp}: unknown key")
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], val, kp)
        else:
            out[key] = val
    return out


def _range(cfg, path):
    v = _get(cfg, path)
    _check(isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v), path, "expected [low, high]")
    _check(v[0] <= v[1], path, "low must not exceed high")


def _get(cfg, path):
    node = cfg
    for part in path.split("."):
        node = node[part]
    return node


def _positive_int(cfg, path, allow_none=False, minimum=1):
    v = _get(cfg, path)
    if allow_none and v is None:
        return
    _check(isinstance(v, int) and not isinstance(v, bool) and v >= minimum, path, f"expected an integer >= {minimum}")


def validate(cfg: dict) -> dict:
    """Check types and ranges; returns ``cfg`` unchanged on success."""
    _positive_int(cfg, "seed", minimum=0)
    _check(isinstance(cfg["code"]["spec"], str), "code.spec", "expected a code spec string")
    grid = cfg["channel"]["esn0_db"]
    _check(isinstance(grid, list) and grid and all(_is_num(x) for x in grid), "channel.esn0_db",
           "expected a non-empty list of numbers")
    for p in ("model.L", "model.T"):
        _positive_int(cfg, p)
    _positive_int(cfg, "model.h", allow_none=True)
    _check(cfg["model"]["dtype"] in ("float32", "float64"), "model.dtype", "expected float32 or float64")
    for p in ("train.batch_size", "train.steps_per_epoch", "train.val_frames", "train.epochs_bce"):
        _positive_int(cfg, p)
    _positive_int(cfg, "train.epochs_reg", minimum=0)
    _positive_int(cfg, "train.plateau_patience")
    _range(cfg, "train.esn0_range_db")
    t = cfg["train"]
    _check(_is_num(t["lr_init"]) and t["lr_init"] >= 0, "train.lr_init", "expected a non-negative number")
    _check(_is_num(t["lr_floor"]) and t["lr_floor"] >= 0, "train.lr_floor", "expected a non-negative number")
    _check(t["lr_init"] == 0 or t["lr_floor"] <= t["lr_init"], "train.lr_floor", "must not exceed lr_init")
    _check(t["reg_kind"] in ("none", "mse", "kl", "moments"), "train.reg_kind", "expected none|mse|kl|moments")
    _check(t["alpha_reg"] is None or (_is_num(t["alpha_reg"]) and t["alpha_reg"] >= 0), "train.alpha_reg",
           "expected a non-negative number or null")
    _check(_is_num(t["rho"]) and 0 <= t["rho"] <= 1, "train.rho", "expected a number in [0, 1]")
    _check(_is_num(t["plateau_factor"]) and 0 < t["plateau_factor"] < 1, "train.plateau_factor",
           "expected a number in (0, 1)")
    _check(t["max_seconds"] is None or (_is_num(t["max_seconds"]) and t["max_seconds"] > 0), "train.max_seconds",
           "expected a positive number or null")
    _check(isinstance(t["val_esn0_db"], list) and t["val_esn0_db"] and all(_is_num(x) for x in t["val_esn0_db"]),
           "train.val_esn0_db", "expected a non-empty list of numbers")
    p = cfg["tpc"]
    for key in ("N", "epochs", "batch", "chase_p"):
        _positive_int(cfg, f"tpc.{key}")
    _range(cfg, "tpc.esn0_range_db")
    _check(p["component"] in ("nn", "map", "chase"), "tpc.component", "expected nn|map|chase")
    _check(_is_num(p["alpha_init"]) and p["alpha_init"] >= 0, "tpc.alpha_init", "expected a non-negative number")
    _check(_is_num(p["lr"]) and p["lr"] >= 0, "tpc.lr", "expected a non-negative number")
    for key in ("alpha_c", "alpha_r"):
        v = p[key]
        _check(v is None or (isinstance(v, list) and len(v) == p["N"] and all(_is_num(x) for x in v)),
               f"tpc.{key}", "expected null or one number per iteration")
    for key in ("col_code", "row_code"):
        _check(p[key] is None or isinstance(p[key], str), f"tpc.{key}", "expected a code spec string or null")
    _check(isinstance(p["normalize"], bool), "tpc.normalize", "expected true or false")
    s = cfg["sim"]
    known = {"map", "map-enum", "map-trellis", "bp", "table", "chase", "nn", "hard"}
    _check(isinstance(s["decoders"], list) and s["decoders"] and all(d in known for d in s["decoders"]),
           "sim.decoders", f"expected a non-empty list drawn from {sorted(known)}")
    for key in ("max_frames", "block_frames", "workers", "bp_iters", "chase_p", "soft_frames", "hist_bins"):
        _positive_int(cfg, f"sim.{key}")
    _positive_int(cfg, "sim.target_frame_errors", allow_none=True)
    _positive_int(cfg, "sim.table_t", allow_none=True, minimum=0)
    _check(_is_num(s["soft_esn0_db"]), "sim.soft_esn0_db", "expected a number")
    if s["hist_range"] is not None:
        _range(cfg, "sim.hist_range")
    _check(isinstance(s["svg"], bool), "sim.svg", "expected true or false")
    return cfg


def parse_config(text: str) -> dict:
    """Parse and validate a JSON config; missing keys take their defaults."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    return validate(_merge(DEFAULTS, raw, ""))


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def train_config(cfg: dict):
    from .training import TrainConfig
    t = dict(cfg["train"])
    t["esn0_range_db"] = tuple(t["esn0_range_db"])
    t["val_esn0_db"] = tuple(t["val_esn0_db"])
    return TrainConfig(seed=cfg["seed"], **t)


def tpc_finetune_config(cfg: dict):
    from .tpc import TpcFinetuneConfig
    p = cfg["tpc"]
    return TpcFinetuneConfig(N=p["N"], lr=p["lr"], epochs=p["epochs"], batch=p["batch"],
                             alpha_init=p["alpha_init"], esn0_range_db=tuple(p["esn0_range_db"]),
                             seed=cfg["seed"], normalize=p["normalize"])
