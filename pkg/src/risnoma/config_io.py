"""Structured-text configuration files: parse, resolve, and echo.

Format: INI-style sections with nested names, ``key = value`` lines, ``#``
comments.  Values are typed automatically: int, float, true/false, strings,
comma-separated lists, and semicolon-separated lists of lists (used for
coordinate tables).  Physical constants are written in their customary units
(dB, dBm, mW) with unit-suffixed key names and converted here once.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from risnoma.geometry import NetworkScenario

__all__ = [
    "parse_config",
    "serialize_config",
    "load_config",
    "db_to_linear",
    "dbm_to_watt",
    "scenario_from_sections",
    "scenario_to_sections",
]


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def _parse_scalar(token: str):
    token = token.strip()
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def _parse_value(text: str):
    text = text.strip()
    if ";" in text:
        return [[_parse_scalar(t) for t in part.split(",")] for part in text.split(";")]
    if "," in text:
        return [_parse_scalar(t) for t in text.split(",")]
    return _parse_scalar(text)


def parse_config(text: str) -> dict:
    """Parse config text into {section: {key: value}}."""
    sections: dict[str, dict] = {}
    current: dict | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        if current is None:
            raise ValueError(f"line {lineno}: key outside any [section]")
        key, value = line.split("=", 1)
        current[key.strip()] = _parse_value(value)
    return sections


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, np.ndarray)):
        value = np.asarray(value).tolist() if isinstance(value, np.ndarray) else value
        if value and isinstance(value[0], (list, tuple)):
            return "; ".join(", ".join(_format_value(v) for v in row) for row in value)
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(sections: dict) -> str:
    """Render sections back to config text; parse(serialize(x)) == x."""
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def scenario_from_sections(sections: dict) -> NetworkScenario:
    """Build a scenario from the [scenario] section (customary units on keys)."""
    sc = sections["scenario"]
    centers = np.asarray(sc["user_centers"], dtype=float)
    k_dirs = int(sc["n_directions"])
    centers = centers.reshape(k_dirs, -1, 3)
    return NetworkScenario(
        bs_position=np.asarray(sc["bs_position"], dtype=float),
        user_centers=centers,
        user_drop_radius=float(sc["user_drop_radius_m"]),
        n_antennas=int(sc["n_antennas"]),
        n_surfaces=int(sc["n_surfaces"]),
        m_h=int(sc["m_h"]),
        m_v=int(sc["m_v"]),
        h0=db_to_linear(float(sc["h0_db"])),
        k0=float(sc["k0"]),
        beta0=db_to_linear(float(sc["beta0_db"])),
        sigma_s2=dbm_to_watt(float(sc["sigma_s2_dbm"])),
        sigma_u2=dbm_to_watt(float(sc["sigma_u2_dbm"])),
        w_min=np.asarray(sc["w_min_m"], dtype=float),
        w_max=np.asarray(sc["w_max_m"], dtype=float),
        element_spacing_ratio=float(sc.get("element_spacing_ratio", 0.5)),
        antenna_spacing_ratio=float(sc.get("antenna_spacing_ratio", 0.5)),
    )


def scenario_to_sections(scenario: NetworkScenario) -> dict:
    """Inverse of ``scenario_from_sections`` (values back in customary units)."""
    return {
        "scenario": {
            "bs_position": scenario.bs_position.tolist(),
            "n_directions": scenario.n_directions,
            "user_centers": scenario.user_centers.reshape(-1, 3).tolist(),
            "user_drop_radius_m": scenario.user_drop_radius,
            "n_antennas": scenario.n_antennas,
            "n_surfaces": scenario.n_surfaces,
            "m_h": scenario.m_h,
            "m_v": scenario.m_v,
            "h0_db": 10.0 * float(np.log10(scenario.h0)),
            "k0": scenario.k0,
            "beta0_db": 10.0 * float(np.log10(scenario.beta0)),
            "sigma_s2_dbm": 10.0 * float(np.log10(scenario.sigma_s2)) + 30.0,
            "sigma_u2_dbm": 10.0 * float(np.log10(scenario.sigma_u2)) + 30.0,
            "w_min_m": scenario.w_min.tolist(),
            "w_max_m": scenario.w_max.tolist(),
            "element_spacing_ratio": scenario.element_spacing_ratio,
            "antenna_spacing_ratio": scenario.antenna_spacing_ratio,
        }
    }
