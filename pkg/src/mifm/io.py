"""File formats: CSV data, schema/config files, line-delimited sample records."""
from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import yaml

from .gibbs import ChainConfig, Hyperparams, HyperState, PosteriorSamples, SampleRecord
from .model import (Dataset, IngestionError, ModelParams, Schema, hypergraph_codes, hypergraph_from_codes,
                    one_hot_encode)


class ConfigError(ValueError):
    pass


HYPER_KEYS = {f.name for f in dataclasses.fields(Hyperparams)}
CHAIN_KEYS = {f.name for f in dataclasses.fields(ChainConfig)}
CONFIG_KEYS = HYPER_KEYS | CHAIN_KEYS


def load_mapping(path) -> dict:
    """Read a YAML (or JSON) mapping."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


def config_from_mapping(m: dict, seed: int | None = None) -> tuple[Hyperparams, ChainConfig]:
    for key in m:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    hyper_kw = {k: v for k, v in m.items() if k in HYPER_KEYS}
    chain_kw = {k: v for k, v in m.items() if k in CHAIN_KEYS}
    if seed is not None:
        chain_kw["seed"] = seed
    try:
        return Hyperparams(**hyper_kw), ChainConfig(**chain_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def load_config(path=None, seed: int | None = None) -> tuple[Hyperparams, ChainConfig]:
    return config_from_mapping(load_mapping(path) if path else {}, seed)


def load_schema(path) -> Schema:
    try:
        return Schema.from_mapping(load_mapping(path))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def read_rows(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file")
        rows = list(reader)
    return list(reader.fieldnames), rows


def load_dataset(path, schema: Schema | None = None, require_response: bool = False) -> Dataset:
    """Load a CSV file; without a schema every non-response column is continuous."""
    header, rows = read_rows(path)
    if schema is None:
        schema = Schema.continuous([h for h in header if h != "y"])
    missing = [name for name, _ in schema.units if name not in header]
    if missing:
        raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
    if require_response and schema.response not in header:
        raise IngestionError(f"{path}: missing response column {schema.response!r}")
    return one_hot_encode(schema, rows, require_response=require_response)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(path, data: Dataset) -> None:
    from .model import one_hot_decode

    names = [n for n, _ in data.schema.units]
    header = names + ([data.schema.response] if data.y is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in one_hot_decode(data):
            w.writerow([_fmt(row[h]) if isinstance(row[h], float) else row[h] for h in header])


def write_column(path, name: str, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([name])
        for v in values:
            w.writerow([_fmt(v)])


def read_column(path, name: str | None = None) -> np.ndarray:
    header, rows = read_rows(path)
    col = name or header[0]
    if col not in header:
        raise IngestionError(f"{path}: no column {col!r}")
    try:
        return np.array([float(r[col]) for r in rows])
    except ValueError as exc:
        raise IngestionError(f"{path}: column {col!r}: {exc}") from None


# -- posterior samples ------------------------------------------------------------

def record_to_dict(r: SampleRecord) -> dict:
    th, hs = r.theta, r.hyper
    return {
        "kind": "sample",
        "chain": r.chain,
        "iteration": r.iteration,
        "sigma": float(th.sigma),
        "w0": float(th.w0),
        "w": th.w.tolist(),
        "V": th.V.tolist(),
        "Z": hypergraph_codes(th.Z),
        "mu": float(hs.mu),
        "lambda": float(hs.lam),
        "mu_k": hs.mu_k.tolist(),
        "lambda_k": hs.lam_k.tolist(),
    }


def record_from_dict(d: dict, n_units: int) -> SampleRecord:
    theta = ModelParams(d["w0"], d["w"], d["V"], hypergraph_from_codes(d["Z"], n_units), d["sigma"])
    hyper = HyperState(d["mu"], d["lambda"], np.array(d["mu_k"], dtype=float), np.array(d["lambda_k"], dtype=float))
    return SampleRecord(int(d["iteration"]), theta, hyper, int(d.get("chain", 0)))


def write_samples(path, samples: PosteriorSamples, schema: Schema, hyper: Hyperparams | None = None,
                  config: ChainConfig | None = None) -> None:
    header = {"kind": "header", "n_units": schema.n_units, "schema": schema.to_mapping()}
    if hyper is not None:
        header["hyperparams"] = dataclasses.asdict(hyper)
    if config is not None:
        header["config"] = dataclasses.asdict(config)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in samples.records:
            fh.write(json.dumps(record_to_dict(r), sort_keys=True) + "\n")


def read_samples(path) -> tuple[PosteriorSamples, Schema]:
    header = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}: line {lineno}: {exc}") from None
            if d.get("kind") == "header":
                header = d
                continue
            if header is None:
                raise IngestionError(f"{path}: line {lineno}: sample before header")
            records.append(record_from_dict(d, header["n_units"]))
    if header is None:
        raise IngestionError(f"{path}: no header record")
    schema = Schema.from_mapping(header["schema"])
    return PosteriorSamples(records, header["n_units"]), schema


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
