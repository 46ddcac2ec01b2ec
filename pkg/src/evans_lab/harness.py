"""Sweep runner: error measurements over grids of lambda and h, written as CSV.

Every sweep is a list of independent per-lambda tasks. A task computes its
reference solution once and then measures every step size in ``h_list``,
so the reference is shared across h. Tasks run in a process pool and the
rows are written in config order, so the output does not depend on the
number of workers.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import erroranalysis as ea
from .evans import evans_fn, evans_reference
from .integrators import (
    LOCAL_REFERENCE_H,
    REFERENCE_H,
    StepperKind,
    coefficient_function,
    expmid_step,
    gl4_step,
    integrate,
    magnus4_step,
    reference_solution,
)
from .problem import get_problem, region_check, spectral_context

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "lambda_re", "lambda_im", "h", "method", "backend", "quantity",
    "measured_abs", "estimated_abs", "ratio", "comp1_abs", "comp2_abs",
)
QUANTITIES = ("local", "global", "evans")
BACKENDS = ("eig", "pade")
COORDS = ("transformed", "raw")
NOMINAL_ORDER = {StepperKind.MAGNUS4: 4, StepperKind.EXPMID: 2, StepperKind.GL4: 4}


class ConfigError(ValueError):
    """The sweep configuration is unusable."""


def default_lambda_grid(decades: Sequence[float] = (0, 8), points_per_decade: int = 25) -> list[complex]:
    """Purely imaginary, log-spaced ``i 10^p`` for ``p`` over ``decades``."""
    lo, hi = decades
    n = int(round((hi - lo) * points_per_decade))
    return [1j * 10.0**e for e in np.linspace(lo, hi, n + 1)]


def parse_complex(v) -> complex:
    """Accept ``1e4j``-style strings, plain numbers or ``[re, im]`` pairs."""
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex pair must have two entries, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"cannot parse {v!r} as a complex number") from None
    if isinstance(v, (int, float, complex)):
        return complex(v)
    raise ConfigError(f"cannot parse {v!r} as a complex number")


@dataclass
class SweepConfig:
    problem: str = "fisher"
    method: StepperKind = StepperKind.MAGNUS4
    expm_backend: str = "eig"
    h_list: list[float] = field(default_factory=lambda: [0.1])
    # None means the default grid built from lambda_decades/points_per_decade.
    lambda_list: list[complex] | None = None
    L: float = 30.0
    # None lets each runner choose; the expm comparison defaults to raw.
    coords: str | None = None
    quantity: str = "evans"
    output_path: str | None = None
    lambda_decades: tuple[float, float] = (0.0, 8.0)
    points_per_decade: int = 25
    xi_local: float = -1.0
    h_ref: float = REFERENCE_H
    h_ref_local: float = LOCAL_REFERENCE_H
    workers: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> SweepConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.normalize()
        return cfg

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> SweepConfig:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)

    def normalize(self) -> None:
        try:
            self.method = StepperKind(self.method)
        except ValueError:
            raise ConfigError(f"unknown method {self.method!r}") from None
        if isinstance(self.h_list, (int, float)):
            self.h_list = [self.h_list]
        try:
            self.h_list = [float(h) for h in self.h_list]
        except (TypeError, ValueError):
            raise ConfigError(f"h_list must be numbers, got {self.h_list!r}") from None
        if self.lambda_list is not None:
            self.lambda_list = [parse_complex(v) for v in self.lambda_list]
        if len(self.lambda_decades) != 2:
            raise ConfigError(f"lambda_decades needs two entries, got {self.lambda_decades!r}")
        self.lambda_decades = (float(self.lambda_decades[0]), float(self.lambda_decades[1]))
        self.L = float(self.L)

    def resolved_coords(self, default: str = "transformed") -> str:
        return self.coords if self.coords is not None else default


def _check_common(cfg: SweepConfig) -> None:
    if cfg.expm_backend not in BACKENDS:
        raise ConfigError(f"expm_backend must be one of {BACKENDS}, got {cfg.expm_backend!r}")
    if cfg.coords is not None and cfg.coords not in COORDS:
        raise ConfigError(f"coords must be one of {COORDS}, got {cfg.coords!r}")
    if cfg.quantity not in QUANTITIES:
        raise ConfigError(f"quantity must be one of {QUANTITIES}, got {cfg.quantity!r}")
    if not cfg.h_list:
        raise ConfigError("h_list is empty")
    if any(not (h > 0 and math.isfinite(h)) for h in cfg.h_list):
        raise ConfigError(f"step sizes must be positive, got {cfg.h_list}")
    if cfg.points_per_decade < 1:
        raise ConfigError("points_per_decade must be at least 1")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    try:
        get_problem(cfg.problem, cfg.L)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _minus_side_ok(p, lam: complex) -> bool:
    # Local and global sweeps only integrate on the minus side.
    ctx = spectral_context(p, lam)
    return ctx.mu_minus_1.real > 0 and ctx.mu_minus_2.real < 0


def validate(cfg: SweepConfig, quantity: str | None = None) -> list[complex]:
    """Check the config and return the lambda values to sweep.

    Explicit lambdas outside the admissible region are a config error;
    points of the default grid outside it are dropped with a log message.
    """
    _check_common(cfg)
    quantity = quantity or cfg.quantity
    p = get_problem(cfg.problem, cfg.L)
    if quantity == "evans":
        ok = lambda lam: region_check(p, lam).in_region_C  # noqa: E731
    else:
        ok = lambda lam: _minus_side_ok(p, lam)  # noqa: E731
    if cfg.lambda_list is not None:
        if not cfg.lambda_list:
            raise ConfigError("lambda_list is empty")
        bad = [lam for lam in cfg.lambda_list if not ok(lam)]
        if bad:
            raise ConfigError(f"lambda outside the admissible region: {bad}")
        return list(cfg.lambda_list)
    grid = default_lambda_grid(cfg.lambda_decades, cfg.points_per_decade)
    kept = [lam for lam in grid if ok(lam)]
    if len(kept) < len(grid):
        log.info("dropped %d default-grid lambda values outside the admissible region",
                 len(grid) - len(kept))
    if not kept:
        raise ConfigError("no admissible lambda in the default grid")
    return kept


@dataclass(frozen=True)
class SweepRow:
    lambda_re: float
    lambda_im: float
    h: float
    method: str
    backend: str
    quantity: str
    measured_abs: float
    estimated_abs: float
    ratio: float
    comp1_abs: float = math.nan
    comp2_abs: float = math.nan
    error: str = ""

    @classmethod
    def failed(cls, lam, h, method, backend, quantity, exc: Exception) -> SweepRow:
        msg = f"{type(exc).__name__}: {exc}"
        nan = math.nan
        return cls(lam.real, lam.imag, h, method, backend, quantity, nan, nan, nan, nan, nan, msg)


def _ratio(measured: float, estimated: float) -> float:
    return measured / estimated if estimated != 0 and math.isfinite(estimated) else math.nan


_ROW_ERRORS = (ArithmeticError, ValueError, RuntimeError)


@lru_cache(maxsize=8)
def _problem(name: str, L: float):
    return get_problem(name, L)


def _side_coords(coords: str) -> str:
    return "transformed_minus" if coords == "transformed" else "rescaled_minus"


def _to_transformed(p, lam, coords: str, y: np.ndarray) -> np.ndarray:
    if coords == "transformed":
        return y
    return np.linalg.solve(spectral_context(p, lam).B, y)


_STEPPERS: dict[StepperKind, Callable] = {
    StepperKind.MAGNUS4: lambda A, xi, h, y, backend: magnus4_step(A, xi, h, y, backend),
    StepperKind.EXPMID: lambda A, xi, h, y, backend: expmid_step(A, xi, h, y, backend),
    StepperKind.GL4: lambda A, xi, h, y, backend: gl4_step(A, xi, h, y),
}

_LOCAL_ESTIMATES = {
    StepperKind.MAGNUS4: ea.magnus4_local_estimate,
    StepperKind.EXPMID: ea.expmid_local_estimate,
    StepperKind.GL4: ea.gl4_local_estimate,
}


def local_errors(cfg: SweepConfig, lam: complex, method: StepperKind, coords: str,
                 h_list: Sequence[float]) -> list[tuple[np.ndarray, np.ndarray]]:
    """One-step errors at ``xi_local`` in transformed components, with estimates.

    The start state is the reference solution at ``xi_local``; the exact
    step is a fine Gauss-Legendre run from the same state.
    """
    p = _problem(cfg.problem, cfg.L)
    sc = _side_coords(coords)
    xi = cfg.xi_local
    y_start = reference_solution(p, lam, sc, -p.L, xi, h_ref=cfg.h_ref).y_end
    A = coefficient_function(p, lam, sc)
    kappa = spectral_context(p, lam).kappa
    out = []
    for h in h_list:
        y_num = _STEPPERS[method](A, xi, h, y_start, cfg.expm_backend)
        y_ex = reference_solution(p, lam, sc, xi, xi + h, y0=y_start, h_ref=cfg.h_ref_local).y_end
        err = _to_transformed(p, lam, coords, y_num) - _to_transformed(p, lam, coords, y_ex)
        est = _LOCAL_ESTIMATES[method](p, "minus", xi, h, kappa).as_array()
        out.append((err, est))
    return out


def _global_estimate(p, method: StepperKind, xi_0: float, xi_k: float, h: float, kappa) -> np.ndarray | None:
    if method is StepperKind.MAGNUS4:
        return ea.magnus4_global_estimate(p, "minus", xi_0, xi_k, h, kappa).as_array()
    if method is StepperKind.GL4:
        return ea.gl4_global_estimate(p, "minus", xi_0, xi_k, h, kappa).as_array()
    return None


def global_errors(cfg: SweepConfig, lam: complex, method: StepperKind, coords: str,
                  h_list: Sequence[float]) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """Errors at ``xi_local`` after integrating from ``-L``, transformed components."""
    p = _problem(cfg.problem, cfg.L)
    sc = _side_coords(coords)
    xi = cfg.xi_local
    ref = _to_transformed(p, lam, coords, reference_solution(p, lam, sc, -p.L, xi, h_ref=cfg.h_ref).y_end)
    kappa = spectral_context(p, lam).kappa
    out = []
    for h in h_list:
        y = integrate(p, lam, method, sc, -p.L, xi, h, backend=cfg.expm_backend).y_end
        err = _to_transformed(p, lam, coords, y) - ref
        out.append((err, _global_estimate(p, method, -p.L, xi, h, kappa)))
    return out


def _evans_estimate(p, method: StepperKind, lam: complex, h: float) -> float:
    if method is StepperKind.MAGNUS4:
        return abs(ea.magnus4_evans_error_estimate(p, h))
    if method is StepperKind.GL4:
        return ea.gl4_evans_error_model(lam, h)
    return ea.expmid_error_structure(p, lam, h)


def evans_errors(cfg: SweepConfig, lam: complex, method: StepperKind, coords: str,
                 h_list: Sequence[float], backend: str | None = None) -> tuple[complex, list[complex]]:
    """Reference Evans value and the method's deviation from it for each h."""
    p = _problem(cfg.problem, cfg.L)
    backend = backend or cfg.expm_backend
    D_ref = evans_reference(p, lam, cfg.h_ref, coords=coords).D
    return D_ref, [evans_fn(p, lam, method, h, backend, coords=coords).D - D_ref for h in h_list]


# ---------------------------------------------------------------------------
# Per-lambda tasks. Each returns the rows for one lambda in h_list order.

def _guarded(task: Callable, cfg: SweepConfig, lam: complex, labels: list[tuple]) -> list[SweepRow]:
    try:
        return task()
    except _ROW_ERRORS as exc:
        log.warning("lambda = %s failed: %s", lam, exc)
        return [SweepRow.failed(lam, *lab, exc) for lab in labels]


def _local_task(cfg: SweepConfig, lam: complex) -> list[SweepRow]:
    m, b, coords = cfg.method, cfg.expm_backend, cfg.resolved_coords()

    def task():
        rows = []
        for h, (err, est) in zip(cfg.h_list, local_errors(cfg, lam, m, coords, cfg.h_list)):
            meas = float(np.max(np.abs(err)))
            e = float(np.max(np.abs(est)))
            rows.append(SweepRow(lam.real, lam.imag, h, m.value, b, "local", meas, e, _ratio(meas, e),
                                 float(abs(err[0])), float(abs(err[1]))))
        return rows

    return _guarded(task, cfg, lam, [(h, m.value, b, "local") for h in cfg.h_list])


def _global_task(cfg: SweepConfig, lam: complex) -> list[SweepRow]:
    m, b, coords = cfg.method, cfg.expm_backend, cfg.resolved_coords()

    def task():
        rows = []
        for h, (err, est) in zip(cfg.h_list, global_errors(cfg, lam, m, coords, cfg.h_list)):
            meas = float(np.max(np.abs(err)))
            e = float(np.max(np.abs(est))) if est is not None else math.nan
            rows.append(SweepRow(lam.real, lam.imag, h, m.value, b, "global", meas, e, _ratio(meas, e),
                                 float(abs(err[0])), float(abs(err[1]))))
        return rows

    return _guarded(task, cfg, lam, [(h, m.value, b, "global") for h in cfg.h_list])


def _evans_rows(cfg: SweepConfig, lam: complex, method: StepperKind, backends: Sequence[str],
                coords: str) -> list[SweepRow]:
    p = _problem(cfg.problem, cfg.L)
    labels = [(h, method.value, b, "evans") for h in cfg.h_list for b in backends]

    def task():
        D_ref = None
        per_backend = {}
        for b in backends:
            D_ref, errs = evans_errors(cfg, lam, method, coords, cfg.h_list, backend=b)
            per_backend[b] = errs
        rows = []
        for i, h in enumerate(cfg.h_list):
            for b in backends:
                meas = abs(per_backend[b][i])
                est = _evans_estimate(p, method, lam, h)
                rows.append(SweepRow(lam.real, lam.imag, h, method.value, b, "evans", meas, est,
                                     _ratio(meas, est), ea.roundoff_model(lam), abs(D_ref)))
        return rows

    return _guarded(task, cfg, lam, labels)


def _evans_task(cfg: SweepConfig, lam: complex) -> list[SweepRow]:
    return _evans_rows(cfg, lam, cfg.method, [cfg.expm_backend], cfg.resolved_coords())


def _expm_task(cfg: SweepConfig, lam: complex) -> list[SweepRow]:
    return _evans_rows(cfg, lam, StepperKind.MAGNUS4, BACKENDS, cfg.resolved_coords("raw"))


def _errors_for(cfg: SweepConfig, lam: complex, coords: str) -> list[float]:
    m = cfg.method
    if cfg.quantity == "local":
        return [float(np.max(np.abs(e))) for e, _ in local_errors(cfg, lam, m, coords, cfg.h_list)]
    if cfg.quantity == "global":
        return [float(np.max(np.abs(e))) for e, _ in global_errors(cfg, lam, m, coords, cfg.h_list)]
    return [abs(e) for e in evans_errors(cfg, lam, m, coords, cfg.h_list)[1]]


def _order_task(cfg: SweepConfig, lam: complex) -> list[SweepRow]:
    m, b, q = cfg.method, cfg.expm_backend, f"order_{cfg.quantity}"
    nominal = float(NOMINAL_ORDER[m])
    pairs = list(zip(cfg.h_list[:-1], cfg.h_list[1:]))

    def task():
        errs = _errors_for(cfg, lam, cfg.resolved_coords())
        rows = []
        for i, (h, _) in enumerate(pairs):
            e_h, e_h2 = errs[i], errs[i + 1]
            try:
                order = ea.measured_order(e_h, e_h2)
            except ea.NonpositiveError:
                order = math.nan
            rows.append(SweepRow(lam.real, lam.imag, h, m.value, b, q, order, nominal,
                                 order / nominal, e_h, e_h2))
        return rows

    return _guarded(task, cfg, lam, [(h, m.value, b, q) for h, _ in pairs])


# ---------------------------------------------------------------------------
# Execution and CSV output

def _call(args):
    task, cfg, lam = args
    return task(cfg, lam)


def _map(task: Callable, cfg: SweepConfig, lambdas: Sequence[complex]) -> list[SweepRow]:
    workers = cfg.workers if cfg.workers is not None else (os.cpu_count() or 1)
    workers = min(workers, len(lambdas))
    jobs = [(task, cfg, lam) for lam in lambdas]
    if workers <= 1:
        chunks = [_call(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_call, jobs))
    return [row for chunk in chunks for row in chunk]


def format_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    """CSV text; the ``error`` column is appended only when some row failed."""
    with_error = any(r.error for r in rows)
    cols = list(CSV_COLUMNS) + (["error"] if with_error else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_rows(rows: Sequence[SweepRow], path: str | os.PathLike | None) -> str:
    text = rows_to_csv(rows)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def _run(task: Callable, cfg: SweepConfig, quantity: str) -> list[SweepRow]:
    lambdas = validate(cfg, quantity)
    rows = _map(task, cfg, lambdas)
    write_rows(rows, cfg.output_path)
    return rows


def run_local_error_sweep(cfg: SweepConfig) -> list[SweepRow]:
    return _run(_local_task, cfg, "local")


def run_global_error_sweep(cfg: SweepConfig) -> list[SweepRow]:
    return _run(_global_task, cfg, "global")


def run_evans_sweep(cfg: SweepConfig) -> list[SweepRow]:
    return _run(_evans_task, cfg, "evans")


def run_expm_comparison(cfg: SweepConfig) -> list[SweepRow]:
    """Magnus4 Evans errors with both exponential backends, paired per (lambda, h)."""
    return _run(_expm_task, cfg, "evans")


def run_order_study(cfg: SweepConfig) -> list[SweepRow]:
    """Observed order for each adjacent pair of a halving chain ``h, h/2, ...``."""
    hs = cfg.h_list
    if len(hs) < 2:
        raise ConfigError("order study needs at least two step sizes")
    for a, b in zip(hs[:-1], hs[1:]):
        if not math.isclose(a, 2 * b, rel_tol=1e-9):
            raise ConfigError(f"h_list must be a halving chain, got {hs}")
    return _run(_order_task, cfg, cfg.quantity)


RUNNERS = {
    "local-error": run_local_error_sweep,
    "global-error": run_global_error_sweep,
    "evans-sweep": run_evans_sweep,
    "expm-compare": run_expm_comparison,
    "order-study": run_order_study,
}
