"""Scenario configs, presets and the full/effective simulation pipeline."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from scipy.optimize import minimize_scalar

from . import effmodels
from .errors import ConfigError, DomainError, GridError
from .evolution import (DENSE_CAP, TimeGrid, TimeSeries, evolve_dense_oracle, evolve_krylov,
                        evolve_reduced, manhattan_profile, occupation_probabilities)
from .fock import anharmonicity, enumerate_basis
from .hamiltonian import build_hamiltonian
from .lattice import (Convention, DisorderSpec, LatticeGraph, TuningKind, TuningRule, apply_tuning,
                      build_chain, build_rectangle, sample_disorder)
from .perturbation import build_projected, effective_hamiltonian, resolve_manifold
from .units import mhz, to_mhz


@dataclass
class LatticeConfig:
    geometry: str = "chain"
    L: int | None = None
    Lx: int | None = None
    Ly: int | None = None
    J_MHz: float = 10.0
    U_MHz: float = 250.0
    omega_MHz: float = 0.0


@dataclass
class TuningConfig:
    kind: str = "none"
    N: int = 0
    M: int = 0
    sites: list[int] | None = None  # 1-based


@dataclass
class DisorderConfig:
    D_omega_MHz: float = 0.0
    D_U_MHz: float = 0.0
    dOmega_MHz: list[float] | None = None
    dU_MHz: list[float] | None = None
    convention: str = "half_negative"
    seed: int = 0
    tuning: TuningConfig = field(default_factory=TuningConfig)
    variants: list[str] | None = None  # subset of ideal / untuned / tuned


@dataclass
class TimeConfig:
    t_max_us: float = 50.0
    samples: int = 2001


@dataclass
class PerturbationConfig:
    A: Any = "auto"
    n_max: int | None = None
    cluster_tol: float = 1e-8
    model: str = "engine"  # engine | closed_form


@dataclass
class OutputConfig:
    dir: str = "out"
    observables: str = "sites"  # sites | manhattan
    origin: list[int] | None = None  # 1-based coordinate for manhattan shells


@dataclass
class ScenarioConfig:
    name: str = "custom"
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    disorder: DisorderConfig = field(default_factory=DisorderConfig)
    initial_state: list = field(default_factory=list)
    time: TimeConfig = field(default_factory=TimeConfig)
    method: str = "both"
    solver: str = "auto"  # auto | krylov | dense
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    notes: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_NESTED = {
    (ScenarioConfig, "lattice"): LatticeConfig,
    (ScenarioConfig, "disorder"): DisorderConfig,
    (ScenarioConfig, "time"): TimeConfig,
    (ScenarioConfig, "perturbation"): PerturbationConfig,
    (ScenarioConfig, "outputs"): OutputConfig,
    (DisorderConfig, "tuning"): TuningConfig,
}


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"{where}: unknown key")
        nested = _NESTED.get((cls, key))
        kwargs[key] = _build(nested, value, where) if nested else value
    return cls(**kwargs)


def _require(cond: bool, where: str, message: str):
    if not cond:
        raise ConfigError(f"{where}: {message}")


def validate(cfg: ScenarioConfig) -> None:
    lat = cfg.lattice
    _require(lat.geometry in ("chain", "rectangle"), "lattice.geometry", "must be chain or rectangle")
    if lat.geometry == "chain":
        _require(isinstance(lat.L, int) and lat.L >= 1, "lattice.L", "positive integer required")
    else:
        _require(isinstance(lat.Lx, int) and lat.Lx >= 1, "lattice.Lx", "positive integer required")
        _require(isinstance(lat.Ly, int) and lat.Ly >= 1, "lattice.Ly", "positive integer required")
    _require(lat.U_MHz > 0, "lattice.U_MHz", "must be positive")
    _require(cfg.time.t_max_us > 0, "time.t_max_us", "must be positive")
    _require(cfg.time.samples >= 2, "time.samples", "need at least 2")
    _require(cfg.method in ("full", "effective", "both"), "method", "must be full, effective or both")
    _require(cfg.solver in ("auto", "krylov", "dense"), "solver", "must be auto, krylov or dense")
    _require(cfg.perturbation.model in ("engine", "closed_form"), "perturbation.model",
             "must be engine or closed_form")
    _require(cfg.outputs.observables in ("sites", "manhattan"), "outputs.observables",
             "must be sites or manhattan")
    try:
        Convention(cfg.disorder.convention)
    except ValueError:
        raise ConfigError("disorder.convention: must be half_negative or plain_positive") from None
    try:
        TuningKind(cfg.disorder.tuning.kind)
    except ValueError:
        raise ConfigError("disorder.tuning.kind: unknown rule") from None
    occ = flat_initial_state(cfg)
    n_sites = lat.L if lat.geometry == "chain" else lat.Lx * lat.Ly
    _require(len(occ) == n_sites, "initial_state", f"needs {n_sites} occupations, got {len(occ)}")
    _require(all(isinstance(n, int) and n >= 0 for n in occ), "initial_state",
             "occupations must be nonnegative integers")
    _require(sum(occ) >= 1, "initial_state", "needs at least one boson")
    for variant in cfg.disorder.variants or []:
        _require(variant in ("ideal", "untuned", "tuned"), "disorder.variants",
                 f"unknown variant '{variant}'")


def flat_initial_state(cfg: ScenarioConfig) -> list[int]:
    occ = cfg.initial_state
    if occ and isinstance(occ[0], list):
        return [n for row in occ for n in row]
    return list(occ)


def config_from_dict(data: dict) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "")
    validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return config_from_dict(data or {})


# presets (parameters: J/2pi = 10 MHz, U/2pi = 250 MHz unless noted)

_APPF_DU = [1.59, -1.75, 4.62, -3.02, 3.81, 3.82]


def _tildeJ_period(N: int) -> float:
    return 1.0 / abs(to_mhz(effmodels.tilde_J(N, mhz(10.0), mhz(250.0))))


def preset(name: str) -> ScenarioConfig:
    J, U = mhz(10.0), mhz(250.0)
    chain = lambda L: {"geometry": "chain", "L": L, "J_MHz": 10.0, "U_MHz": 250.0}  # noqa: E731
    rect = {"geometry": "rectangle", "Lx": 4, "Ly": 4, "J_MHz": 10.0, "U_MHz": 250.0}
    grid_2d = [[0] * 4 for _ in range(4)]
    presets = {
        "fig1": {"lattice": {**chain(6), "J_MHz": 20.0}, "initial_state": [4, 0, 0, 0, 0, 0],
                 "time": {"t_max_us": 1.0, "samples": 201}, "method": "full",
                 "notes": "band structure scenario; run `spectrum --L 6 --N 4 --J-mhz 20` for the eigenvalues"},
        "fig2ab": {"lattice": chain(4), "initial_state": [3, 0, 0, 0], "time": {"t_max_us": 50.0}},
        "fig2cd": {"lattice": chain(4), "initial_state": [0, 3, 0, 0], "time": {"t_max_us": 50.0}},
        "fig3ab": {"lattice": chain(3), "initial_state": [1, 4, 0],
                   "time": {"t_max_us": round(3 / abs(to_mhz(effmodels.stack_boson_T(4, J, U))), 6),
                            "samples": 3001},
                   "perturbation": {"model": "closed_form"},
                   "notes": "L=3 is the smallest chain holding |140>"},
        "fig3cd": {"lattice": chain(2), "initial_state": [4, 1],
                   "time": {"t_max_us": round(5 / abs(to_mhz(effmodels.stack_boson_Xi(4, J, U))), 6),
                            "samples": 3001},
                   "perturbation": {"model": "closed_form"},
                   "notes": "L=2 is the smallest chain holding |41>"},
        "fig4ab": {"lattice": chain(6), "initial_state": [3, 0, 3, 0, 0, 0],
                   "time": {"t_max_us": round(3 * _tildeJ_period(3) / np.sqrt(2), 6), "samples": 3001},
                   "perturbation": {"model": "closed_form"},
                   "notes": "L=6 chosen for |3_1, 3_3>"},
        "fig4cd": {"lattice": chain(6), "initial_state": [4, 0, 3, 0, 0, 0],
                   "time": {"t_max_us": round(5 / abs(to_mhz(effmodels.Xi_ell(4, 2, J, U))), 6),
                            "samples": 3001},
                   "perturbation": {"model": "closed_form"},
                   "notes": "L=6 chosen for |4_1, 3_3>"},
        "fig7a": {"lattice": chain(6), "initial_state": [0, 3, 0, 0, 0, 0],
                  "disorder": {"dU_MHz": _APPF_DU, "convention": "plain_positive",
                               "tuning": {"kind": "single_stack", "N": 3},
                               "variants": ["ideal", "untuned", "tuned"]},
                  "time": {"t_max_us": 50.0}, "method": "full"},
        "fig7b": {"lattice": chain(6), "initial_state": [0, 3, 0, 0, 5, 0],
                  "disorder": {"dU_MHz": _APPF_DU, "convention": "plain_positive",
                               "tuning": {"kind": "single_stack", "N": 3, "sites": [1, 2, 3]},
                               "variants": ["ideal", "untuned", "tuned"]},
                  "time": {"t_max_us": 50.0}, "method": "full",
                  "notes": "tuning restricted to the sites the 3-stack can reach"},
    }
    for tag, coord in (("fig5a", (1, 1)), ("fig5b", (1, 2)), ("fig5c", (2, 2))):
        state = [row[:] for row in grid_2d]
        state[coord[0] - 1][coord[1] - 1] = 3
        presets[tag] = {"lattice": rect, "initial_state": state,
                        "time": {"t_max_us": round(10 * _tildeJ_period(3), 6), "samples": 4001},
                        "outputs": {"observables": "manhattan", "origin": list(coord)}}
    if name not in presets:
        raise ConfigError(f"unknown preset '{name}' (known: {', '.join(sorted(presets))})")
    data = {"name": name, **presets[name]}
    return config_from_dict(data)


PRESETS = ("fig1", "fig2ab", "fig2cd", "fig3ab", "fig3cd", "fig4ab", "fig4cd",
           "fig5a", "fig5b", "fig5c", "fig7a", "fig7b")


# pipeline

def build_graph(cfg: ScenarioConfig) -> LatticeGraph:
    lat = cfg.lattice
    convention = Convention(cfg.disorder.convention)
    args = (mhz(lat.J_MHz), mhz(lat.U_MHz), mhz(lat.omega_MHz))
    if lat.geometry == "chain":
        return build_chain(lat.L, *args, convention=convention)
    return build_rectangle(lat.Lx, lat.Ly, *args, convention=convention)


def disorder_variant(cfg: ScenarioConfig, graph: LatticeGraph, variant: str) -> LatticeGraph:
    if variant == "ideal":
        return graph
    d = cfg.disorder
    to_tuple = lambda xs: None if xs is None else tuple(mhz(np.asarray(xs, float)))  # noqa: E731
    spec = DisorderSpec(mhz(d.D_omega_MHz), mhz(d.D_U_MHz), Convention(d.convention), d.seed,
                        to_tuple(d.dOmega_MHz), to_tuple(d.dU_MHz))
    disordered = sample_disorder(graph, spec)
    if variant == "untuned" or d.tuning.kind == "none":
        return disordered
    sites = None if d.tuning.sites is None else tuple(s - 1 for s in d.tuning.sites)
    rule = TuningRule(TuningKind(d.tuning.kind), d.tuning.N, d.tuning.M, sites)
    return apply_tuning(disordered, rule)


def _observables(cfg: ScenarioConfig, graph: LatticeGraph):
    """(labels, map from per-site occupations (T x L) to output columns)."""
    if cfg.outputs.observables == "manhattan":
        origin_coord = cfg.outputs.origin
        if origin_coord is None:
            occ = flat_initial_state(cfg)
            origin = int(np.argmax(occ))
        else:
            origin = graph.site_at(origin_coord)
        width = max(graph.manhattan(origin, s) for s in range(graph.L)) + 1
        return [f"n_d{d}" for d in range(width)], lambda occ: manhattan_profile(occ, graph, origin)
    return graph.site_labels(), lambda occ: occ


def _stacks(occ: list[int]) -> list[int]:
    return sorted((n for n in occ if n > 0), reverse=True)


def natural_rate(occ: list[int], J: float, U: float) -> tuple[str, float]:
    """Rate defining the natural time unit: J-tilde of the largest stack, else J."""
    top = max(occ)
    if top >= 2:
        return f"tilde_J(N={top})", effmodels.tilde_J(top, J, U)
    return "J", J


def reference_rates(occ: list[int], J: float, U: float) -> effmodels.RateSet:
    """Closed-form rates relevant to the initial configuration (empty if none apply)."""
    stacks = _stacks(occ)
    rates: dict[str, float] = {}
    if stacks and stacks[0] >= 2:
        rates.update(effmodels.stack_rates(stacks[0], J, U).rates)
    if len(stacks) == 2 and stacks[0] >= 2:
        try:
            pair = (effmodels.stack_boson_rates(stacks[0], J, U) if stacks[1] == 1
                    else effmodels.two_stack_rates(stacks[0], stacks[1], J, U))
            rates.update(pair.rates)
        except DomainError:
            pass
    return effmodels.RateSet(rates)


def closed_form_model(cfg: ScenarioConfig, occ: list[int], J: float, U: float):
    if cfg.lattice.geometry != "chain":
        raise ConfigError("perturbation.model: closed-form models exist for chains only")
    L = cfg.lattice.L
    stacks = _stacks(occ)
    if len(stacks) == 1:
        return effmodels.build_single_stack_model(L, stacks[0], J, U)
    if len(stacks) == 2 and stacks[1] == 1 and stacks[0] >= 2:
        return effmodels.build_stack_boson_model(L, stacks[0], J, U, occ.index(stacks[0]) + 1)
    if len(stacks) == 2 and stacks[1] >= 2:
        return effmodels.build_two_stack_model(L, stacks[0], stacks[1], J, U)
    raise ConfigError("initial_state: no closed-form model for this configuration; use model=engine")


def propagate_full(H, psi0, grid: TimeGrid, solver: str = "auto") -> TimeSeries:
    if solver == "dense" or (solver == "auto" and H.dim <= DENSE_CAP):
        return evolve_dense_oracle(H, psi0, grid)
    return evolve_krylov(H, psi0, grid)


@dataclass
class ComparisonReport:
    labels: list[str]
    max_abs_deviation: dict[str, float]
    frequency_full_MHz: dict[str, float]
    frequency_effective_MHz: dict[str, float]

    @property
    def frequency_delta_MHz(self) -> dict[str, float]:
        return {k: self.frequency_effective_MHz[k] - self.frequency_full_MHz[k] for k in self.labels}

    @property
    def worst_deviation(self) -> float:
        return max(self.max_abs_deviation.values(), default=0.0)

    def to_dict(self) -> dict:
        return {"max_abs_deviation": self.max_abs_deviation,
                "frequency_full_MHz": self.frequency_full_MHz,
                "frequency_effective_MHz": self.frequency_effective_MHz,
                "frequency_delta_MHz": self.frequency_delta_MHz}


def dominant_frequency(times: np.ndarray, signal: np.ndarray, pad: int = 8) -> float:
    """Strongest oscillation frequency (cycles per time unit).

    The zero-padded spectrum peak is refined by a least-squares sinusoid fit.
    """
    y = np.asarray(signal, float) - np.mean(signal)
    if np.std(y) < 1e-9:
        return 0.0
    dt = times[1] - times[0]
    n = len(y) * pad
    spectrum = np.abs(np.fft.rfft(y, n))
    freqs = np.fft.rfftfreq(n, dt)
    spectrum[0] = 0.0
    k = int(np.argmax(spectrum))
    bin_width = 1.0 / (len(y) * dt)

    def residual(f):
        design = np.column_stack([np.cos(2 * np.pi * f * times), np.sin(2 * np.pi * f * times),
                                  np.ones_like(times)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        return float(np.sum((design @ coef - y) ** 2))

    lo, hi = max(freqs[k] - bin_width, 1e-12), min(freqs[k] + bin_width, 0.5 / dt)
    if hi <= lo:
        return float(freqs[k])
    best = minimize_scalar(residual, bounds=(lo, hi), method="bounded")
    return float(best.x)


def compare(full: TimeSeries, eff: TimeSeries) -> ComparisonReport:
    if full.times.shape != eff.times.shape or not np.allclose(full.times, eff.times, rtol=0, atol=1e-12):
        raise GridError("series are on different time grids")
    if full.labels != eff.labels:
        raise GridError("series carry different observables")
    dev, f_full, f_eff = {}, {}, {}
    for i, label in enumerate(full.labels):
        dev[label] = float(np.max(np.abs(full.values[:, i] - eff.values[:, i])))
        f_full[label] = dominant_frequency(full.times, full.values[:, i])
        f_eff[label] = dominant_frequency(eff.times, eff.values[:, i])
    return ComparisonReport(list(full.labels), dev, f_full, f_eff)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    full: dict[str, TimeSeries] = field(default_factory=dict)
    effective: TimeSeries | None = None
    report: ComparisonReport | None = None
    metadata: dict = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)


def simulate(cfg: ScenarioConfig) -> ScenarioResult:
    """Run the configured simulations in memory."""
    started = time.perf_counter()
    graph = build_graph(cfg)
    occ = flat_initial_state(cfg)
    N = sum(occ)
    basis = enumerate_basis(graph.L, N)
    grid = TimeGrid.linspace(cfg.time.t_max_us, cfg.time.samples)
    labels, project = _observables(cfg, graph)
    start_index = basis.rank(occ)
    result = ScenarioResult(cfg)
    meta = {"name": cfg.name, "config": cfg.to_dict(), "basis_dimension": basis.dim,
            "initial_state": occ, "initial_anharmonicity": anharmonicity(occ), "notes": cfg.notes}
    J, U = graph.max_hopping, float(np.mean(graph.U))
    rate_name, rate = natural_rate(occ, J, U)
    meta["natural_time_unit"] = {"rate": rate_name, "rate_MHz": to_mhz(rate)}
    meta["rates_MHz"] = {k: to_mhz(v) for k, v in reference_rates(occ, J, U).rates.items()}
    meta["evolved_dimensions"] = {}

    has_disorder_input = any([cfg.disorder.D_omega_MHz, cfg.disorder.D_U_MHz,
                              cfg.disorder.dOmega_MHz, cfg.disorder.dU_MHz])
    variants = cfg.disorder.variants or (["tuned"] if has_disorder_input else ["ideal"])
    if cfg.disorder.tuning.kind == "none":
        variants = [v if v != "tuned" else "untuned" for v in variants]

    if cfg.method in ("full", "both"):
        psi0 = np.zeros(basis.dim, dtype=complex)
        psi0[start_index] = 1.0
        meta["full"] = {}
        for variant in variants:
            g = disorder_variant(cfg, graph, variant)
            H = build_hamiltonian(g, basis)
            series = propagate_full(H, psi0, grid, cfg.solver)
            occupations = occupation_probabilities(series.states, basis.states.astype(float))
            result.full[variant] = TimeSeries(grid.times, project(occupations), list(labels))
            meta["evolved_dimensions"]["full"] = basis.dim
            meta["full"][variant] = {
                "solver": "dense" if (cfg.solver == "dense" or (cfg.solver == "auto" and H.dim <= DENSE_CAP))
                else "krylov",
                "delta_omega_MHz": list(to_mhz(g.delta_omega)),
                "delta_U_MHz": list(to_mhz(g.delta_U)),
            }

    if cfg.method in ("effective", "both"):
        g = disorder_variant(cfg, graph, variants[0])
        A = anharmonicity(occ) if cfg.perturbation.A == "auto" else int(cfg.perturbation.A)
        if cfg.perturbation.model == "engine":
            problem = build_projected(basis, g, A)
            n_max = cfg.perturbation.n_max or max(2, max(occ))
            tree = resolve_manifold(problem, n_max, cfg.perturbation.cluster_tol)
            heff = effective_hamiltonian(tree)
            eff = evolve_reduced(heff.matrix, heff.states, problem.manifold.position(occ), grid)
            meta["effective"] = {"model": "engine", "A": A, "n_max": n_max,
                                 "manifold_dimension": problem.dim,
                                 "leaves": len(tree.leaves()),
                                 "degenerate_leaves": sum(leaf.degenerate for leaf in tree.leaves())}
        else:
            model = closed_form_model(cfg, occ, J, U)
            eff = evolve_reduced(model.matrix, model.states, model.index_of_state(occ), grid)
            meta["effective"] = {"model": model.kind, "manifold_dimension": model.dim,
                                 "rates_MHz": {k: to_mhz(v) for k, v in model.rates.rates.items()},
                                 "flags": model.flags}
        meta["evolved_dimensions"]["effective"] = meta["effective"]["manifold_dimension"]
        result.effective = TimeSeries(grid.times, project(eff.values), list(labels))
        if result.full:
            result.report = compare(result.full[variants[0]], result.effective)

    meta["wall_time_s"] = time.perf_counter() - started
    result.metadata = meta
    return result


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Simulate and write CSV series, an optional comparison report and a metadata sidecar."""
    result = simulate(cfg)
    out = Path(out_dir or cfg.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    rate = mhz(result.metadata["natural_time_unit"]["rate_MHz"])
    natural = lambda t: t * abs(rate) / (2 * np.pi)  # noqa: E731
    single = len(result.full) == 1
    for variant, series in result.full.items():
        path = out / ("series_full.csv" if single else f"series_full_{variant}.csv")
        series.to_csv(path, extra={"t_natural": natural(series.times)})
        result.files.append(path)
    if result.effective is not None:
        path = out / "series_effective.csv"
        result.effective.to_csv(path, extra={"t_natural": natural(result.effective.times)})
        result.files.append(path)
    if result.report is not None:
        path = out / "comparison.json"
        path.write_text(json.dumps(result.report.to_dict(), indent=2))
        result.files.append(path)
    path = out / "metadata.json"
    path.write_text(json.dumps(result.metadata, indent=2, default=float))
    result.files.append(path)
    return result


@dataclass
class Spectrum:
    energies: np.ndarray
    bands: np.ndarray  # nearest anharmonicity value per eigenvalue

    def to_csv(self, path) -> None:
        lines = ["index,energy_MHz,band_A"]
        lines += [f"{i},{to_mhz(e):.10g},{a}" for i, (e, a) in enumerate(zip(self.energies, self.bands))]
        Path(path).write_text("\n".join(lines) + "\n")


def spectrum_scan(L: int, N: int, J: float, U: float, omega: float = 0.0, cap: int = 5000) -> Spectrum:
    basis = enumerate_basis(L, N, capacity=cap)
    H = build_hamiltonian(build_chain(L, J, U, omega), basis)
    energies = np.linalg.eigvalsh(H.to_dense())
    levels = np.unique(basis.anharmonicities)
    centres = U * levels + omega * N
    bands = levels[np.argmin(np.abs(energies[:, None] - centres[None, :]), axis=1)]
    return Spectrum(energies, bands)
