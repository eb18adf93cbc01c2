"""Run-record ingestion, synthetic sweep generation, report serialization.

The native CSV schema is `n_params,u_tokens,epochs,loss_nats,group` with an
optional `perplexity` column (converted by natural log when `loss_nats` is
absent).  A second loader adapts the public multi-epoch run table format
used by the C4 repetition study.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError
from .fit import FitReport, RunRecord
from .laws import (
    AddPenalty1,
    AddPenalty2,
    AddPenalty4,
    Chinchilla,
    ChinchillaParams,
    EffectiveParam,
    ExpDecayData,
    LawSpec,
    RunPoint,
    predict,
)

NATIVE_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class Dataset:
    records: tuple
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic sweep: generating law, grid, log-space noise."""

    generating_law: LawSpec
    grid: tuple
    noise_sigma: float = 0.0
    seed: int = 0
    group: str = "synthetic"

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------

def _parse_row(row: dict, row_num: int) -> RunRecord:
    try:
        n = float(row["n_params"])
        u = float(row["u_tokens"])
        ep = float(row["epochs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"row {row_num}: unparseable numeric field ({exc})") from exc

    loss_field = (row.get("loss_nats") or "").strip()
    if loss_field:
        try:
            loss = float(loss_field)
        except ValueError as exc:
            raise DataError(f"row {row_num}: bad loss_nats {loss_field!r}") from exc
    else:
        ppl_field = (row.get("perplexity") or "").strip()
        if not ppl_field:
            raise DataError(f"row {row_num}: neither loss_nats nor perplexity present")
        try:
            loss = math.log(float(ppl_field))
        except ValueError as exc:
            raise DataError(f"row {row_num}: bad perplexity {ppl_field!r}") from exc

    try:
        return RunRecord(point=RunPoint(n, u, ep), loss=loss, group=(row.get("group") or ""))
    except ValueError as exc:
        raise DataError(f"row {row_num}: invariant violation ({exc})") from exc


def load_native_csv(path: Union[str, Path]) -> Dataset:
    """Load the native run-record schema; malformed rows raise row-numbered errors."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or ())
        required = {"n_params", "u_tokens", "epochs"}
        if not required <= header or not ({"loss_nats", "perplexity"} & header):
            raise DataError(
                f"{path}: header {sorted(header)} does not match native schema "
                "(need n_params,u_tokens,epochs and loss_nats or perplexity)"
            )
        records = []
        for row_num, row in enumerate(reader, start=2):
            records.append(_parse_row(row, row_num))
    return Dataset(
        records=tuple(records),
        provenance={
            "source": str(path),
            "schema": f"native-v{NATIVE_SCHEMA_VERSION}",
            "filter": "none",
            "rows_read": len(records),
            "accepted": len(records),
            "rejected": 0,
        },
    )


# Column aliases for the public multi-epoch run table.
_MUENNIGHOFF_COLUMNS = {
    "n_params": ("params", "parameters", "n_params", "model_params", "N"),
    "u_tokens": ("unique_tokens", "tokens_unique", "u_tokens", "unique_token_budget", "U"),
    "epochs": ("epochs", "epoch", "n_epochs"),
    "loss": ("final_loss", "loss", "val_loss", "validation_loss", "loss_nats"),
}


def load_muennighoff_csv(path: Union[str, Path], max_epochs: float = 64) -> Dataset:
    """Load the public repetition-study run table, keeping runs up to `max_epochs`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or ()
        colmap = {}
        for target, aliases in _MUENNIGHOFF_COLUMNS.items():
            found = next((a for a in aliases if a in header), None)
            if found is None:
                raise DataError(f"{path}: no column for {target} among aliases {aliases}")
            colmap[target] = found
        records, rejected = [], 0
        for row_num, row in enumerate(reader, start=2):
            try:
                n = float(row[colmap["n_params"]])
                u = float(row[colmap["u_tokens"]])
                ep = float(row[colmap["epochs"]])
                loss = float(row[colmap["loss"]])
            except (TypeError, ValueError) as exc:
                raise DataError(f"row {row_num}: unparseable numeric field ({exc})") from exc
            if ep > max_epochs:
                rejected += 1
                continue
            try:
                records.append(RunRecord(point=RunPoint(n, u, ep), loss=loss, group="public"))
            except ValueError as exc:
                raise DataError(f"row {row_num}: invariant violation ({exc})") from exc
    return Dataset(
        records=tuple(records),
        provenance={
            "source": str(path),
            "schema": "muennighoff",
            "filter": f"epochs <= {max_epochs}",
            "rows_read": len(records) + rejected,
            "accepted": len(records),
            "rejected": rejected,
        },
    )


def write_native_csv(dataset: Dataset, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_params", "u_tokens", "epochs", "loss_nats", "group"])
        for rec in dataset.records:
            writer.writerow(
                [
                    repr(rec.point.n_params),
                    repr(rec.point.u_tokens),
                    repr(rec.point.epochs),
                    repr(rec.loss),
                    rec.group,
                ]
            )


# ---------------------------------------------------------------------------
# Synthetic generation and sweep presets
# ---------------------------------------------------------------------------

def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Evaluate the generating law on the grid, with multiplicative log-normal noise.

    Deterministic per seed; sigma = 0 yields exact law values.
    """
    pts = list(spec.grid)
    n = np.array([p.n_params for p in pts])
    u = np.array([p.u_tokens for p in pts])
    ep = np.array([p.epochs for p in pts])
    losses = np.asarray(predict(spec.generating_law, n, u, ep), dtype=float)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        losses = losses * np.exp(rng.normal(0.0, spec.noise_sigma, size=losses.shape))
    records = tuple(
        RunRecord(point=p, loss=float(l), group=spec.group) for p, l in zip(pts, losses)
    )
    return Dataset(
        records=records,
        provenance={
            "source": "synthetic",
            "schema": f"native-v{NATIVE_SCHEMA_VERSION}",
            "filter": "none",
            "noise_sigma": spec.noise_sigma,
            "seed": spec.seed,
            "rows_read": len(records),
            "accepted": len(records),
            "rejected": 0,
        },
    )


# Total parameter counts (embeddings included) for the sweep model menu.
_MODEL_SIZES = {
    "15M": 15.87e6,
    "25M": 24.83e6,
    "35M": 35.30e6,
    "50M": 48.25e6,
    "125M": 134.26e6,
    "250M": 245.60e6,
    "500M": 488.55e6,
    "750M": 778.16e6,
    "1B": 1128.98e6,
}

_BUDGETS = {
    "50M": 50e6,
    "100M": 100e6,
    "200M": 200e6,
    "400M": 400e6,
    "800M": 800e6,
    "1.5B": 1.5e9,
    "3B": 3e9,
    "6B": 6e9,
}

_ALL_BUDGETS = ("50M", "100M", "200M", "400M", "800M", "1.5B", "3B", "6B")
_ALL_EPOCHS = (1, 2, 4, 8, 12, 16)

# Completed-run patterns for the two weight-decay studies (banded designs).
_SINGLE_EPOCH_GRIDS = {
    "grid-std-single": {
        "15M": _ALL_BUDGETS[:4],
        "25M": _ALL_BUDGETS,
        "35M": _ALL_BUDGETS[:4],
        "50M": _ALL_BUDGETS,
        "125M": _ALL_BUDGETS,
        "250M": _ALL_BUDGETS,
        "500M": _ALL_BUDGETS[:6],
        "750M": _ALL_BUDGETS[:5],
        "1B": _ALL_BUDGETS[:5],
    },
    "grid-wd-single": {
        "25M": _ALL_BUDGETS,
        "50M": _ALL_BUDGETS,
        "125M": _ALL_BUDGETS[2:],
        "250M": _ALL_BUDGETS[3:],
        "500M": _ALL_BUDGETS,
        "750M": _ALL_BUDGETS[:5],
        "1B": _ALL_BUDGETS[:5],
    },
}

_MULTI_EPOCH_GRIDS = {
    "grid-std-multi": {
        ("25M", "50M"): (2, 4, 16),
        ("25M", "100M"): (4, 8, 12, 16),
        ("25M", "200M"): _ALL_EPOCHS,
        ("50M", "50M"): _ALL_EPOCHS,
        ("50M", "100M"): _ALL_EPOCHS,
        ("50M", "200M"): _ALL_EPOCHS,
        ("125M", "100M"): (2, 4, 8, 12, 16),
        ("125M", "200M"): _ALL_EPOCHS,
        ("125M", "400M"): _ALL_EPOCHS,
        ("125M", "800M"): (2, 4, 8, 12, 16),
        ("250M", "100M"): _ALL_EPOCHS,
        ("250M", "200M"): _ALL_EPOCHS,
        ("250M", "400M"): _ALL_EPOCHS,
        ("250M", "800M"): (2, 4, 8, 12, 16),
        ("500M", "100M"): _ALL_EPOCHS,
        ("500M", "200M"): (1, 2, 4, 8, 16),
        ("500M", "400M"): _ALL_EPOCHS,
    },
    "grid-wd-multi": {
        ("25M", "50M"): _ALL_EPOCHS,
        ("25M", "100M"): _ALL_EPOCHS,
        ("25M", "200M"): (1, 2, 4, 8, 16),
        ("50M", "50M"): (1, 2, 4),
        ("50M", "100M"): _ALL_EPOCHS,
        ("50M", "200M"): _ALL_EPOCHS,
        ("125M", "100M"): (2, 4, 8, 12, 16),
        ("125M", "200M"): _ALL_EPOCHS,
        ("125M", "400M"): _ALL_EPOCHS,
        ("125M", "800M"): _ALL_EPOCHS,
        ("250M", "100M"): (2, 4, 8, 12, 16),
        ("250M", "200M"): (2, 4, 8, 12, 16),
        ("250M", "400M"): _ALL_EPOCHS,
        ("250M", "800M"): _ALL_EPOCHS,
        ("500M", "100M"): _ALL_EPOCHS,
        ("500M", "200M"): _ALL_EPOCHS,
        ("500M", "400M"): _ALL_EPOCHS,
    },
}

PRESET_NAMES = ("grid-std-single", "grid-std-multi", "grid-wd-single", "grid-wd-multi")


def preset_grid(name: str) -> tuple:
    """Built-in sweep grids mirroring the two weight-decay study designs."""
    if name in _SINGLE_EPOCH_GRIDS:
        return tuple(
            RunPoint(_MODEL_SIZES[model], _BUDGETS[budget], 1)
            for model, budgets in _SINGLE_EPOCH_GRIDS[name].items()
            for budget in budgets
        )
    if name in _MULTI_EPOCH_GRIDS:
        return tuple(
            RunPoint(_MODEL_SIZES[model], _BUDGETS[budget], ep)
            for (model, budget), epochs in _MULTI_EPOCH_GRIDS[name].items()
            for ep in epochs
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------

_REP_CLASSES = {
    "chinchilla": Chinchilla,
    "exp-decay": ExpDecayData,
    "eff-param": EffectiveParam,
    "add1": AddPenalty1,
    "add2": AddPenalty2,
    "add4": AddPenalty4,
}


def law_spec_to_dict(spec: LawSpec) -> dict:
    return {
        "base": dataclasses.asdict(spec.base),
        "rep": {"kind": spec.rep.kind, **dataclasses.asdict(spec.rep)},
    }


def law_spec_from_dict(d: dict) -> LawSpec:
    rep_d = dict(d["rep"])
    cls = _REP_CLASSES[rep_d.pop("kind")]
    return LawSpec(base=ChinchillaParams(**d["base"]), rep=cls(**rep_d))


def save_law_spec(spec: LawSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(law_spec_to_dict(spec), indent=2) + "\n", encoding="utf-8")


def load_law_spec(path: Union[str, Path]) -> LawSpec:
    return law_spec_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_published_params(path: Union[str, Path]) -> ChinchillaParams:
    """Read a small JSON file holding the five base-law constants."""
    return ChinchillaParams(**json.loads(Path(path).read_text(encoding="utf-8")))


def fit_report_to_dict(report: FitReport) -> dict:
    d = dataclasses.asdict(report)
    d["spec"] = law_spec_to_dict(report.spec)
    return d


def fit_report_from_dict(d: dict) -> FitReport:
    d = dict(d)
    d["spec"] = law_spec_from_dict(d["spec"])
    return FitReport(**d)


def write_report(report, path: Union[str, Path], fmt: str = "records") -> None:
    """Serialize a report to disk.

    `records` emits machine-readable JSON that round-trips losslessly
    through read_report; `table` emits an aligned human table.  Lists of
    row dicts (frontier/comparison tables) become one JSON object per line.
    """
    path = Path(path)
    if fmt == "table":
        path.write_text(render_table(report) + "\n", encoding="utf-8")
        return
    if fmt != "records":
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(report, FitReport):
        payload = {"type": "fit_report", "data": fit_report_to_dict(report)}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    elif isinstance(report, LawSpec):
        save_law_spec(report, path)
    elif isinstance(report, (list, tuple)):
        rows = [_row_to_dict(r) for r in report]
        with path.open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    elif isinstance(report, dict) or dataclasses.is_dataclass(report):
        payload = {"type": "record", "data": _row_to_dict(report)}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    else:
        raise TypeError(f"cannot serialize report of type {type(report).__name__}")


def read_report(path: Union[str, Path]):
    """Inverse of write_report for the `records` format."""
    text = Path(path).read_text(encoding="utf-8").strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        try:
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: unrecognized report file ({exc})") from exc
    if isinstance(obj, dict) and obj.get("type") == "fit_report":
        return fit_report_from_dict(obj["data"])
    if isinstance(obj, dict) and obj.get("type") == "record":
        return obj["data"]
    if isinstance(obj, dict) and "base" in obj and "rep" in obj:
        return law_spec_from_dict(obj)
    if isinstance(obj, list):
        return obj
    return [obj]


def _row_to_dict(row) -> dict:
    if dataclasses.is_dataclass(row):
        return dataclasses.asdict(row)
    return dict(row)


def _fmt_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def render_table(rows) -> str:
    """Aligned text table (4 significant digits) from a list of row dicts."""
    if isinstance(rows, FitReport):
        rows = [_flatten_fit_report(rows)]
    elif isinstance(rows, dict):
        rows = [rows]
    rows = [_row_to_dict(r) for r in rows]
    if not rows:
        return "(empty)"
    columns = list(dict.fromkeys(k for row in rows for k in row))
    cells = [[_fmt_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells)
    return "\n".join(lines)


def _flatten_fit_report(report: FitReport) -> dict:
    row = {"law": report.spec.rep.kind}
    row.update(dataclasses.asdict(report.spec.base))
    rep_d = dataclasses.asdict(report.spec.rep)
    row.update(rep_d)
    row.update({k: v for k, v in report.metrics.items()})
    row.update(
        objective=report.objective,
        n_total=report.n_total,
        n_multi=report.n_multi,
        n_single=report.n_single,
        converged=report.converged,
    )
    return row
