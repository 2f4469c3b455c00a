"""Benchmark configuration: defaults, a flat key-value reader, and echoing.

The file format is the flat subset of TOML: one `key = value` per line,
values are quoted strings, integers, floats, or true/false, comments start
with '#'.  Every run echoes its full effective configuration so the output
directory is self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


class ConfigError(ValueError):
    pass


@dataclass
class BenchmarkConfig:
    """Everything a benchmark run needs, with defaults per benchmark.

    Geometry fields double up across benchmarks (radius serves the drop and
    the bubble; fill_height only the tank); unused fields are ignored by
    the runner.  All lengths in meters, times in seconds.
    """

    benchmark: str = "static_drop"
    method: str = "tracking"
    # discretization
    nx: int = 40
    ny: int = 80
    dt: float = 0.004
    t_end: float = 3.0
    interface_nodes: int = 64
    # fluids (1 = dispersed / inner phase, 2 = bulk)
    rho1: float = 100.0
    mu1: float = 1.0
    rho2: float = 1000.0
    mu2: float = 10.0
    gravity: float = 0.98
    gamma: float = 24.5
    # geometry
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 2.0
    center_x: float = 0.5
    center_y: float = 0.5
    radius: float = 0.25
    diameter: float = 0.5
    fill_height: float = 7.0
    wall_file: str = ""
    # forcing (sloshing)
    excitation_amplitude: float = 0.2
    excitation_frequency: float = 1.0
    # scheme knobs
    curvature: str = "analytic"
    eps_factor: float = 1.5
    reinit_every: int = 10
    mass_correction: bool = True
    band_factor: float = 6.0
    quality_floor: float = 0.05
    cfl_limit: float = 0.9
    # bookkeeping
    seed: int = 1234
    save_every: int = 50
    out_dir: str = "out"

    def domain(self):
        return (self.x0, self.x1, self.y0, self.y1)

    def validate(self):
        pos = ("dt", "rho1", "mu1", "rho2", "mu2", "radius", "diameter")
        for name in pos:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("resolution must be at least one cell")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        return self


_FIELDS = {f.name: f.type for f in fields(BenchmarkConfig)}


def defaults_for(benchmark, method=None):
    """Per-benchmark default configuration (the paper setups at desk scale)."""
    if benchmark == "static_drop":
        cfg = BenchmarkConfig(
            benchmark=benchmark, method="tracking", nx=48, ny=48,
            rho1=1.0, mu1=1.0, rho2=1.0, mu2=1.0, gravity=0.0, gamma=1.0,
            x0=-1.0, x1=1.0, y0=-1.0, y1=1.0, center_x=0.0, center_y=0.0,
            radius=0.5, diameter=1.0, interface_nodes=64, t_end=0.0,
        )
    elif benchmark == "rising_bubble":
        cfg = BenchmarkConfig(
            benchmark=benchmark, method="levelset", nx=40, ny=80, dt=0.004,
            t_end=3.0, rho1=100.0, mu1=1.0, rho2=1000.0, mu2=10.0,
            gravity=0.98, gamma=24.5, x0=0.0, x1=1.0, y0=0.0, y1=2.0,
            center_x=0.5, center_y=0.5, radius=0.25, diameter=0.5,
        )
    elif benchmark == "sloshing_tank":
        cfg = BenchmarkConfig(
            benchmark=benchmark, method="tracking", nx=16, ny=24, dt=0.005,
            t_end=13.5, rho1=1000.0, mu1=0.1, rho2=1000.0, mu2=0.1,
            gravity=0.98, gamma=0.0, fill_height=7.0,
            excitation_amplitude=0.2, excitation_frequency=1.0,
        )
    elif benchmark == "method_verification":
        cfg = BenchmarkConfig(benchmark=benchmark, method="levelset")
    else:
        raise ConfigError(f"unknown benchmark {benchmark!r}")
    if method is not None:
        cfg = replace(cfg, method=method)
    return cfg


def _parse_value(name, raw):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {name!r}")


def parse_config_text(text, base=None):
    """Apply flat key = value lines on top of a base configuration."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        overrides[key] = _parse_value(key, raw)
    benchmark = overrides.pop("benchmark", getattr(base, "benchmark", None))
    if base is None:
        if benchmark is None:
            raise ConfigError("config must name a benchmark")
        base = defaults_for(benchmark)
    elif benchmark is not None and benchmark != base.benchmark:
        base = defaults_for(benchmark, method=base.method)
    cfg = replace(base, **overrides)
    # coerce ints given as floats and vice versa to the declared field types
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.type in ("int", int) and isinstance(v, float) and v.is_integer():
            setattr(cfg, f.name, int(v))
        elif f.type in ("float", float) and isinstance(v, int):
            setattr(cfg, f.name, float(v))
    return cfg.validate()


def load_config(path, base=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def echo_config(cfg):
    """The full effective configuration as parseable key = value text."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            lines.append(f"{f.name} = {'true' if v else 'false'}")
        elif isinstance(v, str):
            lines.append(f'{f.name} = "{v}"')
        elif isinstance(v, float):
            lines.append(f"{f.name} = {v!r}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
