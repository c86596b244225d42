"""Plain-text run configuration: sections of key = value lines.

Grammar (documented with a complete example in the README):

* ``[section]`` headers: grid, coefficients, initial-data, solver;
* ``key = value`` entries; ``#`` starts a comment anywhere;
* scalars are ints/floats/words, lists are bracketed and comma separated
  (``alpha4 = [1.0, 0.1]`` means 1.0 + 0.1*(theta - theta_ref));
* Fourier modes use ``|``-separated groups, e.g.
  ``u_mode_1 = 0 1 | 0 | 0.01 | 0.0`` (wavevector | component |
  amplitude | phase); theta/tilt modes drop the component group.

Parse errors carry the offending line number and field name.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .coefficients import ALPHA_NAMES, FRANK_NAMES, CoefficientSet
from .errors import ConfigError
from .grid import Grid
from .initial_data import PRESETS, preset_state, state_from_modes
from .solver import SCHEMES, SUBSYSTEMS, SimState, SolverConfig

_KNOWN_SECTIONS = ("grid", "coefficients", "initial-data", "solver")


def _parse_scalar(text, line, key):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text  # bare word (scheme names, presets, mode strings)


def _parse_value(text, line, key):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", line=line, field=key)
        inner = text[1:-1].strip()
        if not inner:
            return []
        parts = [p.strip() for p in inner.split(",")]
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"malformed list entry in {text!r}",
                              line=line, field=key)
    return _parse_scalar(text, line, key)


def parse_sections(text: str) -> dict:
    """Raw parse into {section: {key: (value, line)}}."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            name = line[1:-1].strip()
            if name not in _KNOWN_SECTIONS:
                raise ConfigError(f"unknown section '{name}'", line=lineno)
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        if current is None:
            raise ConfigError("entry outside of any section", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current:
            raise ConfigError(f"duplicate key '{key}'", line=lineno, field=key)
        current[key] = (_parse_value(value, lineno, key), lineno)
    return sections


def _get(section: dict, key: str, default=None, required=False,
         section_name=""):
    if key in section:
        return section[key][0]
    if required:
        raise ConfigError(f"missing required key '{key}' in "
                          f"[{section_name}]", field=key)
    return default


def _build_grid(sec: dict) -> Grid:
    resolution = _get(sec, "resolution", required=True, section_name="grid")
    if not isinstance(resolution, list):
        resolution = [resolution]
    dim = _get(sec, "dim", default=len(resolution))
    if int(dim) != len(resolution):
        if len(resolution) == 1:
            resolution = resolution * int(dim)
        else:
            raise ConfigError("dim does not match resolution length",
                              field="dim")
    period = _get(sec, "period")
    try:
        return Grid(tuple(int(n) for n in resolution),
                    None if period is None else tuple(period))
    except ValueError as exc:
        raise ConfigError(str(exc), field="resolution")


def _build_coefficients(sec: dict) -> CoefficientSet:
    data = {}
    for key, (value, _) in sec.items():
        data[key] = value
    try:
        return CoefficientSet.from_dict(data)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid coefficients: {exc}")


def _parse_mode(value, line, key, want_component):
    if not isinstance(value, str) or "|" not in value:
        raise ConfigError("mode syntax is 'k.. | [component |] amplitude "
                          "| phase'", line=line, field=key)
    groups = [g.strip() for g in value.split("|")]
    expected = 4 if want_component else 3
    if len(groups) != expected:
        raise ConfigError(f"expected {expected} '|'-groups", line=line,
                          field=key)
    try:
        kvec = tuple(int(p) for p in groups[0].split())
        rest = [float(g) for g in groups[1:]]
    except ValueError:
        raise ConfigError("malformed mode entry", line=line, field=key)
    if want_component:
        return (kvec, int(rest[0]), rest[1], rest[2])
    return (kvec, rest[0], rest[1])


def _build_initial_state(sec: dict, grid: Grid, coeffs: CoefficientSet,
                         seed_override=None) -> SimState:
    preset = _get(sec, "preset")
    epsilon = float(_get(sec, "epsilon", default=1e-2))
    seed = int(_get(sec, "seed", default=0))
    if seed_override is not None:
        seed = int(seed_override)
    mode_keys = [k for k in sec
                 if k.startswith(("u_mode", "theta_mode", "tilt_mode"))]
    if preset is not None and mode_keys:
        raise ConfigError("give either a preset or explicit mode lists, "
                          "not both", field="preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; expected one of "
                              f"{PRESETS}", field="preset")
        return preset_state(preset, grid, coeffs, epsilon=epsilon, seed=seed)
    u_modes, theta_modes, tilt_modes = [], [], []
    for key in sorted(mode_keys):
        value, line = sec[key]
        if key.startswith("u_mode"):
            u_modes.append(_parse_mode(value, line, key, want_component=True))
        elif key.startswith("theta_mode"):
            theta_modes.append(_parse_mode(value, line, key,
                                           want_component=False))
        else:
            tilt_modes.append(_parse_mode(value, line, key,
                                          want_component=False))
    if not (u_modes or theta_modes or tilt_modes):
        return preset_state("equilibrium", grid, coeffs)
    for kvec, *_ in u_modes + theta_modes + tilt_modes:
        if len(kvec) != grid.dim:
            raise ConfigError("mode wavevector length differs from the "
                              "grid dimension")
    return state_from_modes(grid, coeffs, u_modes=u_modes,
                            theta_modes=theta_modes, tilt_modes=tilt_modes)


def _build_solver(sec: dict, seed_override=None) -> SolverConfig:
    kwargs = {}
    mapping = {
        "dt": float, "t_end": float, "scheme": str,
        "picard_max_iters": int, "picard_tol": float,
        "renormalize_director": bool, "snapshot_stride": int,
        "diag_stride": int, "seed": int, "theta_min": float,
        "gamma_min": float, "constraint_tol": float, "subsystem": str,
    }
    for key, (value, line) in sec.items():
        if key not in mapping:
            raise ConfigError(f"unknown solver key '{key}'", line=line,
                              field=key)
        try:
            kwargs[key] = mapping[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for '{key}'", line=line, field=key)
    if "dt" not in kwargs or "t_end" not in kwargs:
        raise ConfigError("[solver] requires dt and t_end", field="dt")
    if seed_override is not None:
        kwargs["seed"] = int(seed_override)
    if kwargs.get("scheme", "imex1") not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}", field="scheme")
    if kwargs.get("subsystem", "full") not in SUBSYSTEMS:
        raise ConfigError(f"subsystem must be one of {SUBSYSTEMS}",
                          field="subsystem")
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))


@dataclass(frozen=True)
class ParsedRun:
    grid: Grid
    coefficients: CoefficientSet
    initial_state: SimState
    solver: SolverConfig
    config_hash: str


def parse_config(path, seed_override=None) -> ParsedRun:
    """Parse and validate a run configuration file.

    All module-level invariants are checked eagerly: grid shape, unit
    reference director, operator ellipticity (raises
    :class:`~nemflow.errors.EllipticityError`).  Second-law admissibility
    of the coefficient set is evaluated as a warning by the CLI, not
    here.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    sections = parse_sections(raw.decode("utf-8"))
    for name in ("grid", "coefficients", "solver"):
        if name not in sections:
            raise ConfigError(f"missing [{name}] section")
    grid = _build_grid(sections["grid"])
    coeffs = _build_coefficients(sections["coefficients"])
    if len(coeffs.n_ref) != grid.dim:
        raise ConfigError("n_ref dimension differs from the grid dimension",
                          field="n_ref")
    solver_cfg = _build_solver(sections["solver"], seed_override)
    state = _build_initial_state(sections.get("initial-data", {}), grid,
                                 coeffs, seed_override)
    from .solver import check_ellipticity
    from .errors import EllipticityError
    report = check_ellipticity(coeffs, gamma_min=solver_cfg.gamma_min)
    if not report.passed:
        raise EllipticityError(
            "config coefficients violate strong ellipticity: "
            + ", ".join(report.failures()))
    return ParsedRun(grid=grid, coefficients=coeffs, initial_state=state,
                     solver=solver_cfg,
                     config_hash=hashlib.sha256(raw).hexdigest())
