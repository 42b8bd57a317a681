"""Command-line front end: ``simulate``, ``stability``, ``compare``, ``plot``.

Configuration is a flat ``key=value`` file (``#`` comments allowed) with
command-line overrides. Exit codes: 0 success, 1 usage error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fdmie import BandSpec, band_compare, comparison_csv, fd_mode_solution, td_to_fd
from .kernels import KernelKind
from .mot import (
    CoefficientSeries,
    NumericalFailure,
    TemporalBasisConfig,
    assemble_blocks,
    solve_mode,
    surface_system,
)
from .stability import build_companion, eigen_spectrum
from .svgplot import CsvFormatError, PlotKind, emit_plot, read_csv
from .vsh import C0, ETA0, Equation, Family, IncidentConfig, ModeIndex

log = logging.getLogger("tdmie")

_FAMILY_KERNELS = {Family.PSI: (1, 3), Family.PHI: (2, 4)}


class UsageError(ValueError):
    pass


def _parse_mode(text: str) -> ModeIndex:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"mode must be 'n,m,psi|phi', got {text!r}")
    try:
        n, m = int(parts[0]), int(parts[1])
        fam = Family(parts[2].lower())
    except ValueError:
        raise UsageError(f"mode must be 'n,m,psi|phi', got {text!r}") from None
    try:
        return ModeIndex(n, m, fam)
    except ValueError as exc:
        raise UsageError(f"invalid mode {text!r}: {exc}") from None


def _mode_text(mode: ModeIndex) -> str:
    return f"{mode.n},{mode.m},{mode.family.value}"


@dataclass
class SimulationConfig:
    a: float = 1.0
    f0: float = 0.4e9
    B: float = 0.3e9
    dt: float | None = None
    Nt: int = 100_000
    Np: int = 1
    modes: list[ModeIndex] = field(default_factory=lambda: [ModeIndex(3, 1, Family.PSI)])
    kernels: list[int] = field(default_factory=lambda: [1, 3])
    c: float = C0
    amplitude: float = 1.0
    outdir: str = "out"
    band_lo: float = 0.1e9
    band_hi: float = 0.7e9
    band_count: int = 61
    np_sweep: list[int] = field(default_factory=list)
    oversample: int = 4

    _FLOATS = ("a", "f0", "B", "c", "amplitude", "band_lo", "band_hi")
    _INTS = ("Nt", "Np", "band_count", "oversample")

    def __post_init__(self):
        self.validate()

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else 1.0 / (20.0 * (self.f0 + self.B))

    @property
    def n_max(self) -> int:
        """Largest degree the band can excite: ceil(2 k_max a)."""
        k_max = 2.0 * math.pi * (self.f0 + self.B) / self.c
        return math.ceil(2.0 * k_max * self.a)

    def validate(self):
        if self.a <= 0 or self.c <= 0 or self.f0 <= 0 or self.B <= 0:
            raise UsageError("a, c, f0 and B must be positive")
        if self.dt is not None and not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.Nt < 1 or self.Np < 0 or self.oversample < 1:
            raise UsageError("need Nt >= 1, Np >= 0, oversample >= 1")
        bad = [k for k in self.kernels if k not in (1, 2, 3, 4)]
        if bad or not self.kernels:
            raise UsageError(f"kernels must be a non-empty subset of 1..4, got {self.kernels}")
        if not self.modes:
            raise UsageError("at least one mode is required")
        for mode in self.modes:
            if mode.n > self.n_max:
                raise UsageError(f"mode degree n={mode.n} exceeds N_m={self.n_max} for this band")

    def incident(self) -> IncidentConfig:
        return IncidentConfig(self.f0, self.B, self.amplitude, self.c, ETA0)

    def band(self) -> BandSpec:
        return BandSpec(self.band_lo, self.band_hi, self.band_count)

    def basis(self, Np: int | None = None) -> TemporalBasisConfig:
        return TemporalBasisConfig(self.step, self.Np if Np is None else Np, self.Nt)

    def jobs(self):
        """(mode, equation) pairs: each kernel runs on the modes of its family."""
        out = []
        for mode in self.modes:
            for k in self.kernels:
                if k in _FAMILY_KERNELS[mode.family]:
                    out.append((mode, Equation(k)))
        if not out:
            raise UsageError("no requested kernel tests the family of any requested mode")
        return out

    # -- text form ------------------------------------------------------------

    def serialize(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "modes":
                text = ";".join(_mode_text(m) for m in v)
            elif f.name in ("kernels", "np_sweep"):
                text = ",".join(str(k) for k in v)
            elif v is None:
                text = "auto"
            elif isinstance(v, float):
                text = f"{v:.17g}"
            else:
                text = str(v)
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    @classmethod
    def from_items(cls, items: dict[str, str], base: "SimulationConfig | None" = None) -> "SimulationConfig":
        kw = dataclasses.asdict(base) if base else {}
        if base:
            kw["modes"] = list(base.modes)
        names = {f.name for f in dataclasses.fields(cls)}
        for key, raw in items.items():
            if key not in names:
                raise UsageError(f"unknown config key {key!r}")
            raw = raw.strip()
            try:
                if key in cls._FLOATS:
                    kw[key] = float(raw)
                elif key in cls._INTS:
                    kw[key] = int(raw)
                elif key == "dt":
                    kw[key] = None if raw in ("", "auto") else float(raw)
                elif key == "modes":
                    kw[key] = [_parse_mode(t) for t in raw.split(";") if t.strip()]
                elif key in ("kernels", "np_sweep"):
                    kw[key] = [int(t) for t in raw.split(",") if t.strip()]
                else:
                    kw[key] = raw
            except ValueError as exc:
                if isinstance(exc, UsageError):
                    raise
                raise UsageError(f"bad value for {key}: {raw!r}") from None
        return cls(**kw)

    @classmethod
    def parse(cls, text: str, base=None) -> "SimulationConfig":
        items = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value")
            k, v = line.split("=", 1)
            items[k.strip()] = v
        return cls.from_items(items, base)


# -- outputs ------------------------------------------------------------------


class _Run:
    """Collects written files for the manifest."""

    def __init__(self, config: SimulationConfig, command: str):
        self.config = config
        self.command = command
        self.out = Path(config.outdir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def finish(self):
        manifest = {
            "command": self.command,
            "config_sha256": self.config.digest(),
            "config": self.config.serialize(),
            "files": dict(sorted(self.files.items())),
        }
        (self.out / f"manifest_{self.command}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        (self.out / "config.txt").write_text(self.config.serialize())


def _series_name(mode: ModeIndex, eq: Equation, Np: int | None = None) -> str:
    tag = f"_np{Np}" if Np is not None else ""
    return f"coeff_{mode}_k{int(eq)}{tag}.csv"


def _trace_csv(series: CoefficientSeries, oversample: int) -> str:
    t = (np.arange(series.Nt * oversample) + 0.5) * (series.dt / oversample)
    vals = series.evaluate(t)
    lines = ["t,re,im"]
    lines += [f"{a:.17g},{v.real:.17g},{v.imag:.17g}" for a, v in zip(t, vals)]
    return "\n".join(lines) + "\n"


def _load_series(path: Path, dt: float, Np: int) -> CoefficientSeries:
    header, data = read_csv(path)
    if header != ["step", "t_start", "order", "re", "im"]:
        raise CsvFormatError(f"{path}: not a coefficient table")
    P = Np + 1
    if data.shape[0] % P:
        raise CsvFormatError(f"{path}: row count {data.shape[0]} not a multiple of {P}")
    vals = (data[:, 3] + 1j * data[:, 4]).reshape(-1, P)
    return CoefficientSeries(None, None, vals, dt)


def _solve(config: SimulationConfig, mode, eq, Np=None) -> CoefficientSeries:
    return solve_mode(config.incident(), mode, eq, config.basis(Np), config.a)


def run_simulate(config: SimulationConfig) -> dict:
    run = _Run(config, "simulate")
    peaks = {}
    for mode, eq in config.jobs():
        series = _solve(config, mode, eq)
        run.write(_series_name(mode, eq), series.to_csv())
        run.write(f"trace_{mode}_k{int(eq)}.csv", _trace_csv(series, config.oversample))
        peaks[(mode, eq)] = float(np.abs(series.values).max())
        log.info("simulated %s kernel %d: peak %.6g", mode, int(eq), peaks[(mode, eq)])
    run.finish()
    return peaks


def run_stability(config: SimulationConfig) -> dict:
    run = _Run(config, "stability")
    reports = {}
    summary = []
    seen = set()
    for mode, eq in config.jobs():
        key = (int(eq), mode.n)
        if key in seen:
            continue
        seen.add(key)
        identity, kernel = surface_system(eq, mode.n, config.a, config.c, config.incident().mu)
        blocks = assemble_blocks(kernel, config.basis(), identity)
        report = eigen_spectrum(build_companion(blocks, KernelKind(int(eq))))
        if report.unconverged:
            raise NumericalFailure(f"eigensolver did not converge for {report.unconverged} eigenvalues (K{key[0]} n={key[1]})")
        run.write(f"eig_k{key[0]}_n{key[1]}_np{config.Np}.csv", report.to_csv())
        line = f"kernel={key[0]} n={key[1]} Np={config.Np} {report.summary()}"
        summary.append(line)
        print(line)
        reports[key] = report
    run.write("stability_summary.txt", "\n".join(summary) + "\n")
    run.finish()
    return reports


def run_compare(config: SimulationConfig) -> dict:
    run = _Run(config, "compare")
    band = config.band()
    inc = config.incident()
    rows = ["mode,kernel,Np,band_error,decay_ratio"]
    errors = {}
    peaks = {}
    prior = _previous_manifest(config)
    sweep = config.np_sweep or [config.Np]
    for mode, eq in config.jobs():
        fd = fd_mode_solution(mode, eq, band, inc, config.a)
        for Np in sweep:
            path = run.out / _series_name(mode, eq)
            if Np == config.Np and prior and path.exists():
                series = _load_series(path, config.step, Np)
            else:
                series = _solve(config, mode, eq, Np)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                td = td_to_fd(series, band)
            for w in caught:
                log.warning("%s kernel %d Np=%d: %s", mode, int(eq), Np, w.message)
            err = band_compare(td, fd)
            amp = np.max(np.abs(series.values), axis=1)
            decay = float(amp[-max(1, series.Nt // 100) :].max() / amp.max()) if amp.max() else 0.0
            rows.append(f"{_mode_text(mode).replace(',', ' ')},{int(eq)},{Np},{err:.17g},{decay:.17g}")
            errors[(mode, eq, Np)] = err
            if Np == sweep[0]:
                run.write(f"compare_{mode}_k{int(eq)}.csv", comparison_csv(band.freqs, td, fd))
                peaks[(mode, eq)] = float(np.abs(series.values).max())
    run.write("band_errors.csv", "\n".join(rows) + "\n")
    ns = sorted({m.n for m, _ in peaks})
    if len(ns) > 1:
        lo = max(v for (m, _), v in peaks.items() if m.n == ns[0])
        hi = max(v for (m, _), v in peaks.items() if m.n == ns[-1])
        ratio = lo / hi if hi else math.inf
        log.info("peak |J| ratio n=%d / n=%d: %.6g (%.1f decades)", ns[0], ns[-1], ratio, math.log10(ratio))
        run.write("peak_ratio.txt", f"n_low={ns[0]} n_high={ns[-1]} ratio={ratio:.17g}\n")
    for line in rows[1:]:
        print(line)
    run.finish()
    return errors


def _previous_manifest(config: SimulationConfig) -> bool:
    """True when the output directory holds a simulate run of the same config."""
    path = Path(config.outdir) / "manifest_simulate.json"
    if not path.exists():
        return False
    try:
        return json.loads(path.read_text()).get("config_sha256") == config.digest()
    except json.JSONDecodeError:
        return False


# -- argument handling ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tdmie", description="Time-domain Mie series by marching-on-in-time.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("simulate", "stability", "compare"):
        s = sub.add_parser(name)
        s.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        s.add_argument("config", nargs="?", help="key=value configuration file")
        s.add_argument("--f0", type=float)
        s.add_argument("--dt", type=float)
        s.add_argument("--np", type=int, dest="Np")
        s.add_argument("--nt", type=int, dest="Nt")
        s.add_argument("--mode", action="append", help="n,m,psi|phi (repeatable)")
        s.add_argument("--kernel", action="append", type=int, help="1..4 (repeatable)")
        s.add_argument("--outdir")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other config key")
    pl = sub.add_parser("plot")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=[k.value for k in PlotKind], required=True)
    pl.add_argument("--out")
    return p


def config_from_args(args) -> SimulationConfig:
    base = SimulationConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        base = SimulationConfig.parse(text)
    items = {}
    for kv in args.set:
        if "=" not in kv:
            raise UsageError(f"--set expects KEY=VALUE, got {kv!r}")
        k, v = kv.split("=", 1)
        items[k.strip()] = v
    for key in ("f0", "dt", "Np", "Nt", "outdir"):
        v = getattr(args, key)
        if v is not None:
            items[key] = str(v) if not isinstance(v, float) else f"{v:.17g}"
    if args.mode:
        items["modes"] = ";".join(args.mode)
    if args.kernel:
        items["kernels"] = ",".join(str(k) for k in args.kernel)
    return SimulationConfig.from_items(items, base) if items else base


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if args.command == "plot":
            out = emit_plot(args.csv, PlotKind(args.kind), args.out)
            print(out)
            return 0
        config = config_from_args(args)
        {"simulate": run_simulate, "stability": run_stability, "compare": run_compare}[args.command](config)
        return 0
    except (UsageError, CsvFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
