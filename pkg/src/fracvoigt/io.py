"""Configuration files, CSV time series, binary checkpoints and run manifests.

Config files are INI text with four flat sections::

    [solver]   nu, alpha, r, n, dt, t_end, dealias
    [ic]       kind plus the kind's parameters (seed, decay_s, energy, a, b, c, ...)
    [output]   directory, sample_every, checkpoint_every
    [study]    parameter, values, mode, threshold, rate_norm, strict

Checkpoint layout (all little-endian)::

    offset  0  4s   magic b"FVGT"
            4  u32  format version (1)
            8  u32  N
           12  f64  r, alpha, nu, t   (four values)
           44  u64  step index
           52  3*N^3 complex coefficients, each as (re f64, im f64)

Coefficients run over component, then kx, ky, kz, each wavenumber
ascending from -N/2+1 to N/2.  The running dissipation integral is not
part of the binary layout; it goes in a JSON sidecar (``<path>.json``)
as a hex float so that a resumed run reproduces every report bit for bit.
"""

import configparser
import csv
import hashlib
import json
import math
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .diagnostics import REPORT_FIELDS, EnergyReport
from .errors import (
    BadMagicError,
    ConfigNotFoundError,
    ConfigParseError,
    ConfigurationError,
    FormatError,
    HeaderMismatchError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .solver import SimState, SolverParams, initial_condition, param_errors
from .spectral import SpectralField, WaveGrid

CSV_HEADER = ",".join(REPORT_FIELDS)
CHECKPOINT_MAGIC = b"FVGT"
CHECKPOINT_VERSION = 1
CHECKPOINT_HEADER = struct.Struct("<4sIIddddQ")
SIDECAR_VERSION = 1
MANIFEST_VERSION = 1
FORMAT_VERSIONS = {
    "timeseries": 1,
    "checkpoint": CHECKPOINT_VERSION,
    "checkpoint_sidecar": SIDECAR_VERSION,
    "manifest": MANIFEST_VERSION,
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

REQUIRED = object()


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


SCHEMA = {
    "solver": {
        "nu": (float, REQUIRED),
        "alpha": (float, REQUIRED),
        "r": (float, REQUIRED),
        "n": (int, REQUIRED),
        "dt": (float, REQUIRED),
        "t_end": (float, REQUIRED),
        "dealias": (str, "two_thirds"),
    },
    "ic": {
        "kind": (str, REQUIRED),
        "seed": (int, None),
        "decay_s": (float, None),
        "energy": (float, None),
        "amplitude": (float, None),
        "eps": (float, None),
        "a": (float, None),
        "b": (float, None),
        "c": (float, None),
    },
    "output": {
        "directory": (str, "out"),
        "sample_every": (int, 10),
        "checkpoint_every": (int, 0),
    },
    "study": {
        "parameter": (str, None),
        "values": (_floats, None),
        "mode": (str, None),
        "threshold": (float, 0.1),
        "rate_norm": (str, None),
        "strict": (_bool, False),
    },
}

IC_KEYS = {
    "abc": {"a", "b", "c"},
    "taylor_green": {"amplitude"},
    "random_smooth": {"seed", "decay_s", "energy"},
    "abc_perturbed": {"a", "b", "c", "eps", "seed", "decay_s"},
}
IC_REQUIRED = {"random_smooth": {"seed"}}
# ic keys are lower-case in files; the ABC coefficients are upper-case in code
_IC_ARG = {"a": "A", "b": "B", "c": "C"}


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    sample_every: int = 10
    checkpoint_every: int = 0


@dataclass(frozen=True)
class StudySpec:
    parameter: str = None
    values: tuple = ()
    mode: str = None
    threshold: float = 0.1
    rate_norm: str = None
    strict: bool = False


@dataclass(frozen=True)
class RunConfig:
    """A fully validated configuration.

    ``warnings`` lists regime notes; the parameters they describe are
    accepted.  ``study`` is None when the file has no ``[study]`` section.
    """

    params: SolverParams
    ic: dict
    output: OutputSpec = field(default_factory=OutputSpec)
    study: StudySpec = None
    warnings: tuple = ()

    def initial_field(self):
        kwargs = {_IC_ARG.get(k, k): v for k, v in self.ic.items() if k != "kind"}
        return initial_condition(self.ic["kind"], WaveGrid(self.params.N), **kwargs)

    def echo(self):
        """Canonical JSON-ready view of the resolved configuration.

        The output directory is left out so that runs written to different
        places remain comparable.
        """
        p = self.params
        out = {
            "solver": {"nu": p.nu, "alpha": p.alpha, "r": p.r, "n": p.N, "dt": p.dt, "t_end": p.t_end,
                       "dealias": p.dealias},
            "ic": dict(sorted(self.ic.items())),
            "output": {"sample_every": self.output.sample_every,
                       "checkpoint_every": self.output.checkpoint_every},
        }
        if self.study is not None:
            s = self.study
            out["study"] = {"parameter": s.parameter, "values": list(s.values), "mode": s.mode,
                            "threshold": s.threshold, "rate_norm": s.rate_norm, "strict": s.strict}
        return out


def parse_override(text):
    """Split ``key=value`` (key optionally dotted as ``section.key``)."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigurationError(f"override {text!r} is not of the form key=value")
    return key.strip().lower(), value.strip()


def apply_overrides(raw, overrides):
    """Apply ``key=value`` strings to a raw ``{section: {key: text}}`` mapping.

    Undotted keys must name exactly one section's key.  Returns the list of
    problems found (the mapping is updated for every valid override).
    """
    errors = []
    for item in overrides:
        try:
            key, value = parse_override(item) if isinstance(item, str) else item
        except ConfigurationError as exc:
            errors.extend(exc.errors)
            continue
        if "." in key:
            section, _, name = key.partition(".")
            if section not in SCHEMA or name not in SCHEMA[section]:
                errors.append(f"override {key!r}: unknown key")
                continue
        else:
            owners = [s for s, keys in SCHEMA.items() if key in keys]
            if not owners:
                errors.append(f"override {key!r}: unknown key")
                continue
            if len(owners) > 1:
                errors.append(f"override {key!r} is ambiguous; use one of " + ", ".join(f"{s}.{key}" for s in owners))
                continue
            section, name = owners[0], key
        raw.setdefault(section, {})[name] = value
    return errors


def read_raw_config(path):
    """INI file to ``{section: {key: text}}``, with distinct missing-file and parse errors."""
    if not os.path.exists(path):
        raise ConfigNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def build_config(raw):
    """Validate a raw mapping; raises :class:`ConfigurationError` listing every problem."""
    errors = []
    values = {}
    for section in raw:
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
    for section, schema in SCHEMA.items():
        given = raw.get(section, {})
        vals = {}
        for key in given:
            if key not in schema:
                errors.append(f"[{section}] unknown key {key!r}")
        for key, (conv, default) in schema.items():
            if key in given:
                try:
                    vals[key] = conv(given[key])
                except ValueError:
                    errors.append(f"[{section}] {key}: cannot read {given[key]!r} as {conv.__name__.strip('_')}")
            elif default is REQUIRED:
                if section != "study" or "study" in raw:
                    errors.append(f"[{section}] missing required key {key!r}")
            elif default is not None:
                vals[key] = default
        values[section] = vals

    s = values["solver"]
    # validate whatever parsed; problems with absent or unreadable keys are already listed
    labels = {"nu": "nu", "alpha": "alpha", "r": "r", "n": "N", "dt": "dt", "t_end": "t_end"}
    absent = [labels[k] for k in labels if k not in s]
    for e in param_errors(*(s.get(k) for k in labels), s.get("dealias", "two_thirds")):
        if not any(e.startswith(name + " ") for name in absent):
            errors.append(e)

    ic = values["ic"]
    kind = ic.get("kind")
    if kind is not None:
        if kind not in IC_KEYS:
            errors.append(f"[ic] unknown kind {kind!r}; expected one of {sorted(IC_KEYS)}")
        else:
            for key in ic:
                if key != "kind" and key not in IC_KEYS[kind]:
                    errors.append(f"[ic] key {key!r} does not apply to kind {kind!r}")
            for key in IC_REQUIRED.get(kind, ()):
                if key not in ic:
                    errors.append(f"[ic] kind {kind!r} needs {key!r}")

    o = values["output"]
    if o.get("sample_every", 1) < 1:
        errors.append("[output] sample_every must be >= 1")
    ce = o.get("checkpoint_every", 0)
    if ce < 0:
        errors.append("[output] checkpoint_every must be >= 0")
    elif ce and o.get("sample_every", 1) >= 1 and ce % o.get("sample_every", 1):
        errors.append("[output] checkpoint_every must be a multiple of sample_every")

    study = None
    if "study" in raw:
        st = values["study"]
        if st.get("parameter") not in (None, "alpha", "nu"):
            errors.append(f"[study] parameter must be 'alpha' or 'nu', got {st['parameter']!r}")
        if "values" in st and (not st["values"] or any(not math.isfinite(v) or v < 0 for v in st["values"])):
            errors.append("[study] values must be a non-empty list of finite numbers >= 0")
        if not errors:
            study = StudySpec(
                parameter=st.get("parameter"),
                values=tuple(st.get("values", ())),
                mode=st.get("mode"),
                threshold=st["threshold"],
                rate_norm=st.get("rate_norm"),
                strict=st["strict"],
            )

    if errors:
        raise ConfigurationError(errors)

    p = SolverParams(nu=s["nu"], alpha=s["alpha"], r=s["r"], N=s["n"], dt=s["dt"], t_end=s["t_end"],
                     dealias=s["dealias"])
    return RunConfig(
        params=p,
        ic=ic,
        output=OutputSpec(**o),
        study=study,
        warnings=tuple(p.regime_warnings()),
    )


def load_config(path, overrides=()):
    """Read, override and validate a config file.

    Errors are distinct: :class:`ConfigNotFoundError`, :class:`ConfigParseError`,
    and :class:`ConfigurationError` (carrying every validation problem,
    override problems included).
    """
    raw = read_raw_config(path)
    errors = apply_overrides(raw, overrides)
    try:
        cfg = build_config(raw)
    except ConfigurationError as exc:
        errors.extend(exc.errors)
        raise ConfigurationError(errors) from None
    if errors:
        raise ConfigurationError(errors)
    return cfg


# ---------------------------------------------------------------------------
# Atomic writes and checksums
# ---------------------------------------------------------------------------

def atomic_write_bytes(path, data):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------

def format_timeseries(series):
    lines = [CSV_HEADER]
    for rep in series:
        lines.append(",".join("%.17g" % v for v in rep.as_tuple()))
    return "\n".join(lines) + "\n"


def write_timeseries(series, path):
    """CSV with the fixed header and 17 significant digits (exact round trip)."""
    atomic_write_text(path, format_timeseries(series))


def read_timeseries(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise HeaderMismatchError(f"{path}: empty file, expected header {CSV_HEADER!r}")
    if ",".join(rows[0]) != CSV_HEADER:
        raise HeaderMismatchError(f"{path}: header {','.join(rows[0])!r} != {CSV_HEADER!r}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(REPORT_FIELDS):
            raise FormatError(f"{path}:{lineno}: expected {len(REPORT_FIELDS)} columns, got {len(row)}")
        try:
            out.append(EnergyReport(*(float(v) for v in row)))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _lex_order(N):
    return np.arange(-N // 2 + 1, N // 2 + 1) % N


def encode_checkpoint(state, p):
    N = state.u.grid.N
    idx = _lex_order(N)
    c = state.u.coeffs[:, idx][:, :, idx][:, :, :, idx]
    header = CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, N, p.r, p.alpha, p.nu, state.t,
                                    state.step_index)
    return header + np.ascontiguousarray(c, dtype="<c16").tobytes()


def write_checkpoint(state, p, path, dissipation_cum=0.0):
    """Binary checkpoint plus its JSON sidecar holding the dissipation integral."""
    atomic_write_bytes(path, encode_checkpoint(state, p))
    sidecar = {"format": "fvgt-checkpoint-sidecar", "version": SIDECAR_VERSION,
               "dissipation_cum": float(dissipation_cum).hex()}
    atomic_write_text(str(path) + ".json", json.dumps(sidecar, indent=2) + "\n")


@dataclass(frozen=True)
class Checkpoint:
    state: SimState
    N: int
    r: float
    alpha: float
    nu: float
    version: int
    dissipation_cum: float = None

    def mismatches(self, p):
        """Parameters of ``p`` that differ from those stored in the checkpoint."""
        bad = []
        for name, mine, theirs in (("N", self.N, p.N), ("r", self.r, p.r), ("alpha", self.alpha, p.alpha),
                                   ("nu", self.nu, p.nu)):
            if mine != theirs:
                bad.append(f"checkpoint {name}={mine!r} but config {name}={theirs!r}")
        if self.state.step_index > p.n_steps:
            bad.append(f"checkpoint step {self.state.step_index} is past the configured end ({p.n_steps} steps)")
        if self.state.t != self.state.step_index * p.dt:
            bad.append(f"checkpoint t={self.state.t!r} is not step*dt for dt={p.dt!r}")
        return bad


def decode_checkpoint(data, source="<bytes>"):
    if len(data) < CHECKPOINT_HEADER.size:
        raise TruncatedFileError(f"{source}: {len(data)} bytes, shorter than the {CHECKPOINT_HEADER.size}-byte header")
    magic, version, N, r, alpha, nu, t, step = CHECKPOINT_HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"{source}: checkpoint format version {version} unsupported "
                                      f"(this code reads version {CHECKPOINT_VERSION})")
    if N < 4 or N % 2:
        raise FormatError(f"{source}: invalid grid size N={N}")
    expected = CHECKPOINT_HEADER.size + 3 * N**3 * 16
    if len(data) < expected:
        raise TruncatedFileError(f"{source}: {len(data)} bytes, expected {expected} for N={N}")
    if len(data) > expected:
        raise FormatError(f"{source}: {len(data) - expected} trailing bytes after the coefficients")
    flat = np.frombuffer(data, dtype="<c16", offset=CHECKPOINT_HEADER.size).astype(np.complex128)
    lex = flat.reshape(3, N, N, N)
    idx = _lex_order(N)
    coeffs = np.empty_like(lex)
    coeffs[np.ix_(range(3), idx, idx, idx)] = lex
    grid = WaveGrid(N)
    state = SimState(t, SpectralField(grid, coeffs), int(step))
    return Checkpoint(state=state, N=N, r=r, alpha=alpha, nu=nu, version=version)


def read_checkpoint(path):
    """Load a checkpoint and, when present, its dissipation sidecar."""
    with open(path, "rb") as fh:
        data = fh.read()
    ckpt = decode_checkpoint(data, str(path))
    sidecar = str(path) + ".json"
    if not os.path.exists(sidecar):
        return ckpt
    try:
        with open(sidecar, encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar}: {exc}") from exc
    if meta.get("version") != SIDECAR_VERSION:
        raise UnsupportedVersionError(f"{sidecar}: sidecar version {meta.get('version')!r} unsupported")
    try:
        diss = float.fromhex(meta["dissipation_cum"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{sidecar}: missing or malformed dissipation_cum") from exc
    return Checkpoint(**{**ckpt.__dict__, "dissipation_cum": diss})


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

VOLATILE_MANIFEST_KEYS = ("wall_clock",)


def build_manifest(config_echo, status, out_dir, outputs, *, started=None, warnings=(), error=None, extra=None):
    """Manifest dict; ``outputs`` are file names relative to ``out_dir``."""
    now = time.time()
    manifest = {
        "format": "fvgt-manifest",
        "format_versions": dict(FORMAT_VERSIONS),
        "code_version": __version__,
        "config": config_echo,
        "status": status,
        "warnings": list(warnings),
        "error": None if error is None else str(error),
        "outputs": {name: sha256_file(os.path.join(out_dir, name)) for name in sorted(outputs)},
        "wall_clock": {
            "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(now)),
            "elapsed_s": None if started is None else now - started,
        },
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(manifest, out_dir, name="manifest.json"):
    path = os.path.join(out_dir, name)
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_versions", {}).get("manifest") != MANIFEST_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported manifest version")
    return manifest


def comparable_manifest(manifest):
    """The manifest without wall-clock fields, for run-to-run comparison."""
    return {k: v for k, v in manifest.items() if k not in VOLATILE_MANIFEST_KEYS}


def write_json(obj, path):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
