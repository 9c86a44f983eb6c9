"""Record export/import and plot-data emission."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .config import CELL_AXES
from .simulation import RECORD_COLUMNS, EmpiricalCdf, _dtype, select

PLOT_KINDS = ("mean_se_histogram", "sinr_cdf", "sir_cdf")


def export_results(records: pd.DataFrame, path, fmt: str = "csv") -> Path:
    """Write records in (cell, iteration, frame, user) order; float values round-trip exactly."""
    path = Path(path)
    df = records[RECORD_COLUMNS].sort_values(["cell_id", "iteration", "frame", "user_id"],
                                             kind="stable")
    if fmt == "csv":
        df.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    elif fmt == "jsonl":
        with path.open("w") as fh:
            for row in df.itertuples(index=False):
                fh.write(json.dumps(_jsonable(row._asdict())) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def _jsonable(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


def read_results(path) -> pd.DataFrame:
    path = Path(path)
    dtypes = {c: _dtype(c) for c in RECORD_COLUMNS}
    if path.suffix == ".jsonl":
        rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        df = pd.DataFrame(rows, columns=RECORD_COLUMNS)
    else:
        df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                         dtype={c: str for c, t in dtypes.items() if t is object})
    return df.astype(dtypes)


def parse_filter(text: str | None) -> dict:
    """``"scheme=mmse,ss-mmse;normalization=spc"`` -> ``{"scheme": [...], ...}``."""
    out: dict = {}
    if not text:
        return out
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"bad filter clause {part!r}; expected key=value[,value]")
        key, values = (s.strip() for s in part.split("=", 1))
        if key not in CELL_AXES:
            raise ValueError(f"unknown filter key {key!r}; expected one of {', '.join(CELL_AXES)}")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if key == "power_dbw_mhz":
            vals = [float(v) for v in vals]
        out[key] = vals
    return out


def emit_plot_data(records: pd.DataFrame, kind: str, out_dir, filters: dict | None = None) -> Path:
    """Write a plot-ready CSV plus a small matplotlib script that renders it."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    sub = select(records, **(filters or {}))
    if sub.empty:
        raise ValueError("no records match the filter")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / f"{kind}.csv"
    if kind == "mean_se_histogram":
        table = (sub.groupby(list(CELL_AXES), sort=True, observed=True)["se_bps_hz"].mean()
                 .rename("mean_se_bps_hz").reset_index())
    else:
        column = "sinr_db" if kind == "sinr_cdf" else "sir_db"
        parts = []
        for key, grp in sub.groupby(list(CELL_AXES), sort=True, observed=True):
            cdf = EmpiricalCdf.from_samples(grp[column])
            part = pd.DataFrame({"value_db": cdf.values, "probability": cdf.probabilities})
            for name, val in zip(CELL_AXES, key):
                part.insert(len(part.columns) - 2, name, val)
            parts.append(part)
        table = pd.concat(parts, ignore_index=True)
    table.to_csv(data_path, index=False, float_format="%.17g", lineterminator="\n")
    (out_dir / f"plot_{kind}.py").write_text(_SCRIPT.format(data=data_path.name, kind=kind))
    return data_path


_SCRIPT = '''"""Render {data} (generated file)."""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

AXES = ["space", "terminal", "scenario", "propagation", "power_dbw_mhz", "scheme", "normalization"]
here = Path(__file__).parent
df = pd.read_csv(here / "{data}")
fig, ax = plt.subplots(figsize=(7, 4))
if "{kind}" == "mean_se_histogram":
    df["label"] = df["scheme"] + "/" + df["normalization"]
    piv = df.pivot_table(index="power_dbw_mhz", columns="label", values="mean_se_bps_hz")
    piv.plot.bar(ax=ax)
    ax.set_xlabel("power density [dBW/MHz]")
    ax.set_ylabel("average spectral efficiency [bit/s/Hz]")
else:
    for key, grp in df.groupby(AXES):
        vals = grp["value_db"].replace(np.inf, np.nan).dropna()
        ax.step(vals, grp.loc[vals.index, "probability"], where="post",
                label="/".join(str(k) for k in key[4:]))
    ax.set_xlabel("{kind}".split("_")[0].upper() + " [dB]")
    ax.set_ylabel("CDF")
ax.grid(alpha=0.3)
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig(here / "{kind}.png", dpi=150)
if "--show" in sys.argv:
    plt.show()
'''
