"""Config-driven overlap experiments between grand-canonical and stationary states."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .liouvillian import build_superoperator, fidelity, ness_kernel
from .model import BathSet, CoefficientMatrix, PreconditionError, ThermoParams, single_body_spectrum
from .model import grand_partition_closed_form
from .mps import CanonicalMPS, network_overlap
from .stationary import (
    Block,
    Theorem1Config,
    Theorem2Config,
    bath_identity_residual,
    theorem1_baths,
    theorem1_state,
    theorem2_baths,
    theorem2_state,
    verify_stationarity,
)
from .thermo import build_thermo_state, dense_thermo_oracle, log_partition_from_alpha, log_partition_from_state

log = logging.getLogger(__name__)

CSV_HEADER = ("param", "overlap", "norm_th", "norm_ss", "log_xi", "residual")
PEAK_TOL = 1e-6

_number = {"type": "number"}
_numbers = {"type": "array", "items": _number}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_sites", "hamiltonian", "bath"],
    "properties": {
        "n_sites": {"type": "integer", "minimum": 1},
        "hamiltonian": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["dense", "tridiagonal", "diagonal_plus_uniform_offdiag"]},
                "matrix": {"type": "array", "items": _numbers},
                "hopping": _number,
                "diagonal": {"oneOf": [_numbers, {"enum": ["index"]}]},
                "offdiag": _number,
            },
        },
        "thermo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta": {"type": "number", "minimum": 0}, "mu": _number, "beta_mu": _number},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter", "from", "to"],
            "properties": {
                "parameter": {"enum": ["beta", "omega"]},
                "from": _number,
                "to": _number,
                "points": {"type": "integer", "minimum": 2},
                "fixed": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"beta": _number, "mu": _number, "beta_mu": _number},
                },
            },
        },
        "bath": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["theorem1", "theorem2", "explicit", "none"]},
                "x": {"oneOf": [_number, _numbers]},
                "x_rule": {"enum": ["thermal_diagonal"]},
                "b": {"oneOf": [_number, _numbers]},
                "branch": {"enum": ["plus", "minus"]},
                "blocks": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "B": {"type": "array", "items": _numbers},
                "claimed_x": _number,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "chi": {"type": "integer", "minimum": 1},
                "tau": {"type": "number", "minimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "oracle": {"type": "boolean"},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "state": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as err:
            raise ConfigError(f"invalid config: {err.message} at {list(err.absolute_path)}") from err
        sweep = data.get("sweep")
        if sweep is not None:
            if not (np.isfinite(sweep["from"]) and np.isfinite(sweep["to"])):
                raise ConfigError("sweep bounds must be finite")
        if data["bath"]["kind"] == "theorem2" and "blocks" in data["bath"]:
            if sum(data["bath"]["blocks"]) != data["n_sites"]:
                raise ConfigError("bath blocks must add up to n_sites")
        return cls(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        return cls.from_dict(data)

    @property
    def n_sites(self) -> int:
        return self.raw["n_sites"]

    def solver(self, key: str, default):
        return self.raw.get("solver", {}).get(key, default)

    @property
    def chi(self) -> int:
        return self.solver("chi", 2048 if self.n_sites > 6 else 256)

    @property
    def tau(self) -> float:
        return self.solver("tau", 1e-14 if self.n_sites > 6 else 0.0)

    @property
    def tol(self) -> float:
        return self.solver("tol", 1e-10)

    def override(self, **solver) -> "ExperimentConfig":
        data = json.loads(json.dumps(self.raw))
        data.setdefault("solver", {}).update({k: v for k, v in solver.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    def with_branch(self, branch: str | None) -> "ExperimentConfig":
        if branch is None:
            return self
        data = json.loads(json.dumps(self.raw))
        data["bath"]["branch"] = branch
        return ExperimentConfig.from_dict(data)

    # -- model pieces --------------------------------------------------------

    def hamiltonian(self, omega: float | None = None) -> CoefficientMatrix:
        spec = self.raw["hamiltonian"]
        n = self.n_sites
        try:
            if spec["kind"] == "tridiagonal":
                return CoefficientMatrix.tridiagonal(n, spec.get("hopping", 1.0))
            if spec["kind"] == "dense":
                return CoefficientMatrix(np.array(spec["matrix"], dtype=float))
            diag = spec.get("diagonal", "index")
            diag = np.arange(1, n + 1, dtype=float) if diag == "index" else np.array(diag, dtype=float)
            return CoefficientMatrix.diagonal_plus_uniform(diag, spec.get("offdiag", 0.0) if omega is None else omega)
        except PreconditionError as err:
            raise ConfigError(str(err)) from err

    def diagonal_hamiltonian(self) -> CoefficientMatrix:
        return CoefficientMatrix(np.diag(np.diag(self.hamiltonian(omega=0.0).h)))

    def thermo_params(self, **swept) -> ThermoParams:
        base = dict(self.raw.get("thermo", {}))
        base.update(self.raw.get("sweep", {}).get("fixed", {}))
        base.update(swept)
        beta = float(base.get("beta", 0.0))
        if "beta_mu" in base and "mu" not in swept:
            return ThermoParams.at_fugacity(beta, float(base["beta_mu"]))
        return ThermoParams(beta, float(base.get("mu", 0.0)))

    def grid(self) -> np.ndarray:
        sweep = self.raw.get("sweep")
        if sweep is None:
            raise ConfigError("this command needs a sweep block")
        return np.linspace(sweep["from"], sweep["to"], sweep.get("points", 41))

    def _per_site(self, key: str, default=None) -> np.ndarray:
        value = self.raw["bath"].get(key, default)
        arr = np.broadcast_to(np.asarray(value, dtype=float), (self.n_sites,)).copy()
        return arr

    def bath_setup(self):
        """``(BathSet, closed-form config or None, kind)`` for the bath block."""
        bath = self.raw["bath"]
        kind = bath["kind"]
        branch = bath.get("branch", "plus")
        try:
            if kind == "none":
                return BathSet.empty(self.n_sites), None, kind
            if kind == "explicit":
                B = np.array(bath["B"], dtype=float)
                if B.shape[1] != 2 * self.n_sites:
                    raise ConfigError("explicit B needs 2 * n_sites columns")
                return BathSet(B), None, kind
            b = self._per_site("b", 1.0)
            if kind == "theorem1":
                cfg = Theorem1Config(float(bath.get("x", 0.0)), b, branch)
                return theorem1_baths(cfg), cfg, kind
            if bath.get("x_rule") == "thermal_diagonal":
                p = self.thermo_params()
                eps = np.diag(self.hamiltonian(omega=0.0).h)
                x = np.tanh(p.beta * (p.mu - eps) / 2) if p.beta_mu is None else np.tanh((p.log_fugacity - p.beta * eps) / 2)
            else:
                x = self._per_site("x", 0.0)
            sizes = bath.get("blocks", [1] * self.n_sites)
            h = self.hamiltonian(omega=0.0).h if self.raw["hamiltonian"]["kind"] != "tridiagonal" else None
            blocks, start = [], 0
            for d in sizes:
                sl = slice(start, start + d)
                xs = np.unique(np.asarray(x)[sl])
                if xs.size != 1:
                    raise ConfigError("x must be constant inside each block")
                y = None if h is None else h[sl, sl]
                blocks.append(Block(float(xs[0]), b[sl], y))
                start += d
            cfg = Theorem2Config(tuple(blocks), branch)
            return theorem2_baths(cfg), cfg, kind
        except PreconditionError as err:
            raise ConfigError(str(err)) from err

    def closed_form_state(self):
        baths, cfg, kind = self.bath_setup()
        if kind == "theorem1":
            return theorem1_state(cfg.x, self.n_sites, self.chi, self.tau)
        if kind == "theorem2":
            return theorem2_state(cfg, self.chi, self.tau)
        return None


@dataclass
class SweepRow:
    param: float
    overlap: float
    norm_th: float
    norm_ss: float
    log_xi: float
    residual: float


@dataclass
class SweepResult:
    name: str
    rows: list
    peak_param: float
    peak_expected: float
    peak_overlap: float
    notes: list = field(default_factory=list)

    @property
    def peak_ok(self) -> bool:
        return bool(np.isclose(self.peak_param, self.peak_expected) and abs(self.peak_overlap - 1.0) <= PEAK_TOL)

    def overlaps(self) -> np.ndarray:
        return np.array([r.overlap for r in self.rows])

    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rows])

    def monotone_away_from_peak(self) -> bool:
        ov = self.overlaps()
        i = int(np.argmax(ov))
        return bool(np.all(np.diff(ov[i:]) <= 1e-12) and np.all(np.diff(ov[: i + 1]) >= -1e-12))

    def write_csv(self, path) -> None:
        write_csv(self.rows, path)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_csv(rows, target) -> None:
    """Write sweep rows to a path or an open text stream."""
    if hasattr(target, "write"):
        w = csv.writer(target, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(r.param), _fmt(r.overlap), _fmt(r.norm_th), _fmt(r.norm_ss), _fmt(r.log_xi), _fmt(r.residual)])
        return
    with open(target, "w", newline="") as fh:
        write_csv(rows, fh)


def _thermo_row(h: CoefficientMatrix, p: ThermoParams, ness: CanonicalMPS, param: float, chi: int, tau: float) -> SweepRow:
    th = build_thermo_state(h, p, chi, tau)
    log_xi = log_partition_from_state(th.state)
    eps, _ = single_body_spectrum(h)
    _, log_xi_closed = grand_partition_closed_form(eps, p)
    overlap = min(1.0, abs(network_overlap(th.state, ness)))
    residual = max(abs(np.expm1(log_xi - log_xi_closed)), th.state.discarded)
    return SweepRow(
        param=float(param),
        overlap=float(overlap),
        norm_th=float(np.exp(th.state.log_scale - log_xi)),
        norm_ss=ness.norm,
        log_xi=float(log_xi),
        residual=float(residual),
    )


def _run_point(args):
    return _thermo_row(*args)


def _sweep(cfg: ExperimentConfig, jobs, name: str, expected_peak: float) -> SweepResult:
    workers = cfg.solver("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    ov = np.array([r.overlap for r in rows])
    i = int(np.argmax(ov))
    res = SweepResult(name, rows, rows[i].param, expected_peak, rows[i].overlap)
    if not res.monotone_away_from_peak():
        res.notes.append("overlap is not monotone away from the peak on this grid")
    return res


def run_fig2a(cfg: ExperimentConfig) -> SweepResult:
    """Infinite-temperature NESS vs grand-canonical states at fixed ``beta mu`` along ``beta``."""
    sweep = cfg.raw.get("sweep", {})
    if sweep.get("parameter") != "beta":
        raise ConfigError("fig2a sweeps beta")
    ness = cfg.closed_form_state()
    if ness is None:
        raise ConfigError("fig2a needs a theorem1 or theorem2 bath")
    h = cfg.hamiltonian()
    jobs = [(h, cfg.thermo_params(beta=float(b)), ness, float(b), cfg.chi, cfg.tau) for b in cfg.grid()]
    return _sweep(cfg, jobs, "fig2a", 0.0)


def run_fig2b(cfg: ExperimentConfig) -> SweepResult:
    """Diagonal-Hamiltonian NESS vs grand-canonical states of ``diag + omega`` along ``omega``."""
    sweep = cfg.raw.get("sweep", {})
    if sweep.get("parameter") != "omega" or cfg.raw["hamiltonian"]["kind"] != "diagonal_plus_uniform_offdiag":
        raise ConfigError("fig2b sweeps omega of a diagonal_plus_uniform_offdiag Hamiltonian")
    ness = cfg.closed_form_state()
    if ness is None:
        raise ConfigError("fig2b needs a theorem1 or theorem2 bath")
    p = cfg.thermo_params()
    jobs = [(cfg.hamiltonian(omega=float(w)), p, ness, float(w), cfg.chi, cfg.tau) for w in cfg.grid()]
    return _sweep(cfg, jobs, "fig2b", 0.0)


def default_fig2a(n_sites: int = 10, points: int = 41) -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "n_sites": n_sites,
        "hamiltonian": {"kind": "tridiagonal", "hopping": 1.0},
        "sweep": {"parameter": "beta", "from": 0.0, "to": 4.0, "points": points,
                  "fixed": {"beta_mu": float(2 * np.arctanh(-0.5))}},
        "bath": {"kind": "theorem1", "x": -0.5, "b": 1.0, "branch": "plus"},
    })


def default_fig2b(n_sites: int = 10, points: int = 41) -> ExperimentConfig:
    return ExperimentConfig.from_dict({
        "n_sites": n_sites,
        "hamiltonian": {"kind": "diagonal_plus_uniform_offdiag", "diagonal": "index", "offdiag": 0.0},
        "thermo": {"beta": 1.0, "mu": 1.0},
        "sweep": {"parameter": "omega", "from": 0.0, "to": 1.0, "points": points},
        "bath": {"kind": "theorem2", "x_rule": "thermal_diagonal", "b": 1.0, "branch": "plus"},
    })


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


@dataclass
class VerifyReport:
    checks: list
    notes: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        lines = [f"{'check':<34} {'status':<6} {'value':>12} {'limit':>10}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.name:<34} {status:<6} {c.value:>12.3e} {c.limit:>10.1e}  {c.detail}".rstrip())
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines)


def run_verify(cfg: ExperimentConfig, oracle: bool | None = None) -> VerifyReport:
    """Invariant checks relevant to a config (stationarity, partition function, oracles)."""
    checks, notes = [], []
    n = cfg.n_sites
    oracle = cfg.solver("oracle", n <= 4) if oracle is None else oracle
    tol = cfg.tol
    h = cfg.hamiltonian() if cfg.raw["hamiltonian"]["kind"] != "diagonal_plus_uniform_offdiag" else cfg.diagonal_hamiltonian()
    baths, closed, kind = cfg.bath_setup()

    claimed = cfg.raw["bath"].get("claimed_x")
    x_sites = None
    if kind == "theorem1":
        x_sites = np.full(n, closed.x)
    elif kind == "theorem2":
        x_sites = closed.site_x()
    elif claimed is not None:
        x_sites = np.full(n, float(claimed))
    if x_sites is not None:
        ident = np.max(np.abs(bath_identity_residual(baths, x_sites[None, :])))
        checks.append(Check("bath identity", ident <= 1e-12, float(ident), 1e-12))
        state = theorem1_state(float(claimed), n) if claimed is not None else cfg.closed_form_state()
        rep = verify_stationarity(state, h, baths, tol)
        checks.append(Check("closed-form stationarity", rep.passed, rep.residual, tol,
                            f"hamiltonian {rep.hamiltonian_residual:.2e} bath {rep.bath_residual:.2e}"))
    if baths.is_empty():
        notes.append("empty bath set: the stationary state is not unique (kernel is degenerate)")
        if n <= 4:
            res = ness_kernel(build_superoperator(h, baths))
            notes.append(f"even-sector kernel dimension {res.kernel_dim}")

    p = cfg.thermo_params(beta=float(cfg.grid()[-1])) if "sweep" in cfg.raw and cfg.raw["sweep"]["parameter"] == "beta" \
        else cfg.thermo_params()
    th = build_thermo_state(h, p, cfg.chi, cfg.tau)
    eps, _ = single_body_spectrum(h)
    logs = [log_partition_from_state(th.state), grand_partition_closed_form(eps, p)[1],
            log_partition_from_alpha(th.factorization.alpha, th.A0)]
    spread = float(max(abs(np.expm1(a - b)) for a in logs for b in logs))
    checks.append(Check("partition function three-way", spread <= 1e-9, spread, 1e-9))

    if oracle and n <= 4:
        dense = dense_thermo_oracle(h, p)
        dev = float(np.max(np.abs(th.state.to_dense() - dense)))
        checks.append(Check("thermo vs dense oracle", dev <= 1e-9, dev, 1e-9))
        if closed is not None or claimed is not None:
            res = ness_kernel(build_superoperator(h, baths))
            state = theorem1_state(float(claimed), n) if claimed is not None else cfg.closed_form_state()
            fid = fidelity(res.vector, state.to_dense())
            checks.append(Check("kernel dimension", res.kernel_dim == 1, float(res.kernel_dim), 1.0))
            checks.append(Check("kernel vs closed form", 1 - fid <= 1e-10, 1 - fid, 1e-10))
    return VerifyReport(checks, notes)
