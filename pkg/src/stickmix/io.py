"""File formats: datasets, flat key=value configs, traces, samples.

All tabular files are comma-delimited text with one header row.
Covariates are 0-based integers, the response is 0/1, fixed effects
are decimal reals.  Category counts K_j are declared in the config
rather than inferred from data, to catch encoding errors.  Trace files
are append-only and flushed every FLUSH_EVERY rows so crashed runs
retain diagnostics.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict

import numpy as np

from stickmix.model import HyperParams, ProfileDataset, SweepRecord
from stickmix.sampler import SamplerConfig

__all__ = [
    "ConfigError",
    "FLUSH_EVERY",
    "TraceWriter",
    "dataset_digest",
    "load_config",
    "make_config",
    "read_dataset",
    "read_trace",
    "read_z_samples",
    "write_dataset",
    "write_truth",
]

FLUSH_EVERY = 100

TRACE_FIELDS = [
    "sweep", "alpha", "cstar",
    "log_cov_marginal", "log_resp_marginal", "log_partition_prior", "log_mpp",
    "ls1_accepted", "ls2_accepted", "ls3_accepted", "cluster_sizes",
]

# config key -> (type, default); None default means "required" or "unset"
CONFIG_KEYS = {
    "sweeps": (int, 5000),
    "burnin": (int, 2500),
    "thin": (int, 5),
    "init_clusters": (int, None),
    "mpp_every": (int, 10),
    "seed": (int, 0),
    "adapt_target": (float, 0.44),
    "ls1": (bool, True),
    "ls2": (bool, True),
    "ls3": (bool, True),
    "alpha_fixed": (float, None),
    "alpha_star": (float, None),
    "a": (float, 1.0),
    "nu": (float, 7.0),
    "sigma_theta": (float, 1.0),
    "sigma_beta": (float, 1.0),
    "alpha_shape": (float, 9.0),
    "alpha_rate": (float, 2.0),
    "K": (str, None),
    "laplace_fail_max": (int, 5),
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw: str):
    typ = CONFIG_KEYS[key][0]
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: cannot parse boolean from {raw!r}")
    try:
        return typ(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def load_config(path: str) -> dict:
    """Parse a flat key=value config file; unknown keys are errors."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    return values


def make_config(values: dict) -> tuple[SamplerConfig, HyperParams, dict]:
    """Split merged config values into sampler config, hyperparams, extras."""
    merged = {k: (v[1] if k not in values else values[k]) for k, v in CONFIG_KEYS.items()}
    for key in values:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    if merged["init_clusters"] is None:
        raise ConfigError("init_clusters is required (choose a value above the "
                          "anticipated number of clusters)")
    cfg = SamplerConfig(
        init_clusters=merged["init_clusters"], sweeps=merged["sweeps"],
        burnin=merged["burnin"], thin=merged["thin"], mpp_every=merged["mpp_every"],
        seed=merged["seed"], adapt_target=merged["adapt_target"],
        ls1=merged["ls1"], ls2=merged["ls2"], ls3=merged["ls3"],
        alpha_fixed=merged["alpha_fixed"], alpha_star=merged["alpha_star"],
    )
    hyper = HyperParams(
        a=merged["a"], nu=merged["nu"], sigma_theta=merged["sigma_theta"],
        sigma_beta=merged["sigma_beta"], alpha_shape=merged["alpha_shape"],
        alpha_rate=merged["alpha_rate"], alpha_fixed=merged["alpha_fixed"],
    )
    extras = {"K": merged["K"], "laplace_fail_max": merged["laplace_fail_max"]}
    return cfg, hyper, extras


def parse_k(spec: str) -> np.ndarray:
    try:
        return np.array([int(s) for s in spec.split(",") if s.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"cannot parse K list from {spec!r}") from exc


# -- datasets ---------------------------------------------------------------


def write_dataset(path: str, data: ProfileDataset):
    header = (
        [f"x{j + 1}" for j in range(data.J)]
        + ["y"]
        + [f"w{l + 1}" for l in range(data.L)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [int(v) for v in data.X[i]] + [int(data.Y[i])]
            row += [repr(float(v)) for v in data.W[i]]
            writer.writerow(row)


def read_dataset(path: str, K) -> ProfileDataset:
    K = np.asarray(K, dtype=np.int64)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
        w_cols = [i for i, h in enumerate(header) if h.startswith("w")]
        try:
            y_col = header.index("y")
        except ValueError:
            raise ConfigError(f"{path}: missing response column 'y'")
        if len(x_cols) != len(K):
            raise ConfigError(
                f"{path}: {len(x_cols)} covariate columns but K declares {len(K)}"
            )
        X, Y, W = [], [], []
        for rowno, row in enumerate(reader, 2):
            try:
                X.append([int(row[i]) for i in x_cols])
                Y.append(int(row[y_col]))
                W.append([float(row[i]) for i in w_cols])
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}: row {rowno}: {exc}") from exc
    n = len(Y)
    try:
        return ProfileDataset(
            X=np.array(X, dtype=np.int64).reshape(n, len(x_cols)),
            Y=np.array(Y, dtype=np.int64),
            W=np.array(W, dtype=np.float64).reshape(n, len(w_cols)),
            K=K,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_truth(path: str, Z: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z"])
        for z in Z:
            writer.writerow([int(z)])


def read_truth(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([int(row[0]) for row in reader], dtype=np.int64)


def dataset_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# -- traces and samples ------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class TraceWriter:
    """Append-only per-sweep trace, flushed every FLUSH_EVERY rows."""

    def __init__(self, path: str):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TRACE_FIELDS)
        self._rows = 0

    def write(self, record: SweepRecord, cluster_sizes=None):
        values = asdict(record)
        values["cluster_sizes"] = (
            ";".join(str(int(s)) for s in cluster_sizes) if cluster_sizes is not None else None
        )
        self._writer.writerow([_fmt(values[f]) for f in TRACE_FIELDS])
        self._rows += 1
        if self._rows % FLUSH_EVERY == 0:
            self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path: str) -> dict[str, np.ndarray]:
    """Trace file as a dict of arrays (NaN / -1 for absent values)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    for name, col in zip(header, cols):
        if name == "sweep" or name == "cstar":
            out[name] = np.array([int(v) for v in col], dtype=np.int64)
        elif name.startswith("ls"):
            out[name] = np.array([int(v) if v else -1 for v in col], dtype=np.int64)
        elif name == "cluster_sizes":
            out[name] = np.array(col, dtype=object)
        else:
            out[name] = np.array([float(v) if v else np.nan for v in col])
    return out


def write_z_samples(path: str, sweeps: list[int], z_rows: list[np.ndarray]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n = len(z_rows[0]) if z_rows else 0
        writer.writerow(["sweep"] + [f"z{i + 1}" for i in range(n)])
        for sweep, z in zip(sweeps, z_rows):
            writer.writerow([sweep] + [int(v) for v in z])


def read_z_samples(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[int(v) for v in row] for row in reader]
    arr = np.array(rows, dtype=np.int64)
    if arr.size == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, 0), dtype=np.int64)
    return arr[:, 0], arr[:, 1:]


def write_params(path: str, rows: list[dict]):
    """Thinned per-sweep parameter snapshots as JSON lines."""
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_params(path: str) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def write_json(path: str, obj: dict):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj)!r}")


def write_table(path: str, header: list[str], rows: list[list]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if v is None or isinstance(v, (bool, float)) else v for v in row])


def ensure_dir(path: str):
    os.makedirs(path, exist_ok=True)
