"""
Load and validate experiment configuration.

Experiment configs are JSON files. Every key a user may set has a default in
config/defaults.json; a user file is checked against that tree (unknown keys
are rejected at every level), merged over it, validated, and frozen into a
RunConfig.

Precedence, highest first:
    command-line flags (--out, --seed, --jobs)
    the experiment config file
    environment variables (.env is read at import)
    config/defaults.json

Example usage:
    from nsaspec.config_loader import load_config

    config = load_config("config/examples/model_spectrum_v2i.json")
    print(config.experiment, config.seed)
"""
import copy
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from nsaspec.errors import ConfigError, InputError
from nsaspec.model import QuadraticModel
from nsaspec.potential import PotentialSpec, parse_complex

load_dotenv()

# =============================================================================
# PATH AND ENVIRONMENT CONFIGURATION
# =============================================================================

PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"
DEFAULTS_PATH = CONFIG_DIR / "defaults.json"

# Where results go when neither the config nor --out says otherwise
OUTPUT_DIR = os.getenv("NSA_SPEC_OUTPUT_DIR", "output")

# Worker threads for independent h-values and probes
DEFAULT_JOBS = int(os.getenv("NSA_SPEC_JOBS", "1"))

EXPERIMENTS = (
    "model-spectrum",
    "check-potential",
    "eigs",
    "resolvent-map",
    "semigroup-decay",
    "verify-all",
)

# Experiments that discretize the potential and therefore need grid.N
GRID_EXPERIMENTS = ("eigs", "resolvent-map", "semigroup-decay", "verify-all")

POTENTIAL_KEYS = {"dim", "magnetic", "terms", "minima"}
MAGNETIC_KEYS = {"offset", "jacobian"}
TERM_KEYS = {"coeff", "alpha", "damping"}
MODEL_KEYS = {"A", "V"}


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved, validated experiment configuration."""
    experiment: str
    model: Optional[QuadraticModel]
    potential: Optional[PotentialSpec]
    control: Optional[PotentialSpec]
    grid: Dict[str, Any]
    h: List[float]
    window: Dict[str, Any]
    contour: Dict[str, Any]
    resolvent: Dict[str, Any]
    semigroup: Dict[str, Any]
    hermite: Dict[str, Any]
    assumptions: Dict[str, Any]
    output_dir: str
    seed: int
    jobs: int
    source: Optional[str] = None
    resolved: Dict[str, Any] = field(default_factory=dict, compare=False)

    def with_overrides(self, out: Optional[str] = None, seed: Optional[int] = None,
                       jobs: Optional[int] = None) -> "RunConfig":
        """Apply command-line flags on top of the file."""
        resolved = copy.deepcopy(self.resolved)
        changes = {}
        if out is not None:
            changes["output_dir"] = resolved["output_dir"] = str(out)
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed: must be a non-negative integer")
            changes["seed"] = resolved["seed"] = int(seed)
        if jobs is not None:
            if jobs < 1:
                raise ConfigError("jobs: must be at least 1")
            changes["jobs"] = resolved["jobs"] = int(jobs)
        return replace(self, resolved=resolved, **changes)


# =============================================================================
# LOADING
# =============================================================================

def load_defaults() -> Dict[str, Any]:
    """Read config/defaults.json."""
    with open(DEFAULTS_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: the top level must be an object")
    return data


def _check_keys(data: Dict[str, Any], allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _merge(defaults: Dict[str, Any], user: Dict[str, Any], where: str = "") -> Dict[str, Any]:
    """Deep-merge user over defaults, rejecting keys the defaults do not know."""
    _check_keys(user, defaults, where or "config")
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        path = f"{where}.{key}" if where else key
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected an object, got {value!r}")
            merged[key] = _merge(defaults[key], value, path)
        else:
            merged[key] = value
    return merged


def load_config(path) -> RunConfig:
    """
    Load an experiment config, fill in defaults and validate.

    Raises:
        ConfigError: unreadable file, unknown key, wrong type or range; the
            message names the offending key path
    """
    path = Path(path)
    user = _read_json(path)
    merged = _merge(load_defaults(), user)
    if merged.get("output_dir") is None:
        merged["output_dir"] = OUTPUT_DIR
    if merged.get("jobs") is None:
        merged["jobs"] = DEFAULT_JOBS
    if not isinstance(merged.get("h"), list):
        merged["h"] = [merged.get("h")]
    config = _validate(merged)
    return replace(config, source=str(path))


def retarget(config: RunConfig, experiment: str) -> RunConfig:
    """
    The same configuration run as another experiment kind.

    Re-validates, so a config without grid.N cannot be retargeted to a grid
    experiment.
    """
    raw = copy.deepcopy(config.resolved)
    raw["experiment"] = experiment
    return replace(_validate(raw), source=config.source)


# =============================================================================
# VALIDATION
# =============================================================================

def _number(value, where: str, low: float = None, high: float = None,
            strict_low: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if low is not None and (value <= low if strict_low else value < low):
        raise ConfigError(f"{where}: must be {'>' if strict_low else '>='} {low}, got {value}")
    if high is not None and value > high:
        raise ConfigError(f"{where}: must be <= {high}, got {value}")
    return value


def _integer(value, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _number_list(values, where: str, low: float = 0.0, high: float = None) -> List[float]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}: expected a non-empty list of numbers")
    return [_number(v, f"{where}[{k}]", low, high) for k, v in enumerate(values)]


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    if not isinstance(raw.get(name), dict):
        raise ConfigError(f"{name}: expected an object, got {raw.get(name)!r}")
    return dict(raw[name])


def _potential(data, where: str) -> Optional[PotentialSpec]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    _check_keys(data, POTENTIAL_KEYS, where)
    if "dim" not in data:
        raise ConfigError(f"{where}.dim: missing")
    if isinstance(data.get("magnetic"), dict):
        _check_keys(data["magnetic"], MAGNETIC_KEYS, f"{where}.magnetic")
    for k, term in enumerate(data.get("terms", [])):
        if not isinstance(term, dict):
            raise ConfigError(f"{where}.terms[{k}]: expected an object")
        _check_keys(term, TERM_KEYS, f"{where}.terms[{k}]")
        if "coeff" not in term or "alpha" not in term:
            raise ConfigError(f"{where}.terms[{k}]: coeff and alpha are required")
    try:
        return PotentialSpec.from_dict(data)
    except (InputError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _model(data) -> Optional[QuadraticModel]:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError("model: expected an object with A and V")
    _check_keys(data, MODEL_KEYS, "model")
    if "V" not in data:
        raise ConfigError("model.V: missing")
    try:
        V = [[parse_complex(v) for v in row] for row in data["V"]]
        A = data.get("A", [[0.0] * len(V) for _ in V])
        return QuadraticModel.build(A, V)
    except (InputError, TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _validate(raw: Dict[str, Any]) -> RunConfig:
    experiment = raw["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")

    model = _model(raw["model"])
    potential = _potential(raw["potential"], "potential")
    control = _potential(raw["control"], "control")

    grid = _section(raw, "grid")
    grid["L"] = _number(grid["L"], "grid.L", 0.0)
    if grid["N"] is not None:
        grid["N"] = _integer(grid["N"], "grid.N", 16)

    if experiment == "model-spectrum" and model is None and potential is None:
        raise ConfigError("model: model-spectrum needs a model or a potential with minima")
    if experiment in ("check-potential",) + GRID_EXPERIMENTS and potential is None:
        raise ConfigError(f"potential: required for experiment {experiment}")
    if experiment in GRID_EXPERIMENTS and grid["N"] is None:
        raise ConfigError(f"grid.N: required for experiment {experiment}")

    h = _number_list(raw["h"], "h", 0.0, 1.0)

    window = _section(raw, "window")
    for key in ("C", "a", "delta", "re_bound"):
        window[key] = _number(window[key], f"window.{key}", 0.0)

    contour = _section(raw, "contour")
    contour["radius_factor"] = _number(contour["radius_factor"], "contour.radius_factor", 0.0, 1.0)
    contour["nodes"] = _integer(contour["nodes"], "contour.nodes", 4)

    resolvent = _section(raw, "resolvent")
    resolvent["im_extent"] = _number(resolvent["im_extent"], "resolvent.im_extent", 0.0)
    resolvent["samples"] = _integer(resolvent["samples"], "resolvent.samples", 2)
    resolvent["s_list"] = _number_list(resolvent["s_list"], "resolvent.s_list")
    resolvent["parabolic_C"] = _number(resolvent["parabolic_C"], "resolvent.parabolic_C", 0.0)

    semigroup = _section(raw, "semigroup")
    semigroup["h"] = _number(semigroup["h"], "semigroup.h", 0.0, 1.0)
    semigroup["t_start"] = _number(semigroup["t_start"], "semigroup.t_start", 0.0)
    semigroup["t_stop"] = _number(semigroup["t_stop"], "semigroup.t_stop", semigroup["t_start"])
    semigroup["t_count"] = _integer(semigroup["t_count"], "semigroup.t_count", 5)
    semigroup["probes"] = _integer(semigroup["probes"], "semigroup.probes", 1)
    semigroup["iterations"] = _integer(semigroup["iterations"], "semigroup.iterations", 1)

    hermite = _section(raw, "hermite")
    hermite["K"] = _integer(hermite["K"], "hermite.K", 8)

    assumptions = _section(raw, "assumptions")
    assumptions["sample_radius"] = _number(assumptions["sample_radius"],
                                           "assumptions.sample_radius", 10.0, strict_low=False)
    assumptions["shell_samples"] = _integer(assumptions["shell_samples"],
                                            "assumptions.shell_samples", 1000)
    assumptions["c_grid"] = _number_list(assumptions["c_grid"], "assumptions.c_grid")

    seed = _integer(raw["seed"], "seed", 0)
    jobs = _integer(raw["jobs"], "jobs", 1)
    if not isinstance(raw["output_dir"], str):
        raise ConfigError("output_dir: expected a path string")

    # echo the parsed forms, with their own defaults filled in
    raw = dict(raw)
    raw["model"] = model.to_dict() if model is not None else None
    raw["potential"] = potential.to_dict() if potential is not None else None
    raw["control"] = control.to_dict() if control is not None else None

    return RunConfig(
        experiment=experiment, model=model, potential=potential, control=control,
        grid=grid, h=h, window=window, contour=contour, resolvent=resolvent,
        semigroup=semigroup, hermite=hermite, assumptions=assumptions,
        output_dir=raw["output_dir"], seed=seed, jobs=jobs, resolved=raw,
    )


if __name__ == "__main__":
    defaults = load_defaults()
    print(f"Loaded defaults for {len(defaults)} top-level keys from {DEFAULTS_PATH}")
    print(f"Experiments: {', '.join(EXPERIMENTS)}")
