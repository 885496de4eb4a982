"""
Result artifacts: JSON documents stamped with run metadata and the
per-front accuracy tables (CSV and Markdown).
"""

import json
import logging
from pathlib import Path

import pandas as pd

from . import __version__
from .errors import ConfigError

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["Class 0 accuracy", "Class 1 accuracy", "# Models"]


def artifact_meta(seed, digest):
    """Stamp embedded in every JSON artifact; no timestamps, so reruns are byte-identical."""
    return {"tool_version": __version__, "seed": seed, "config_digest": digest}


def write_json(document, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True, indent=2)
        handle.write("\n")
    logger.info(f"📁 Saved: {path}")
    return path


def read_json(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")


def front_document(entries, meta):
    return {"meta": meta, "front": entries}


def read_front(path):
    """Entries of a front file; an empty front is an error."""
    document = read_json(path)
    entries = document.get("front") if isinstance(document, dict) else None
    if not entries:
        raise ConfigError(f"{path} holds no front members")
    for entry in entries:
        if not {"params", "acc_pos", "acc_neg"} <= set(entry):
            raise ConfigError(f"{path}: front entries need params, acc_pos and acc_neg")
    return entries


def _percent(value):
    return f"{100.0 * value:.2f}%"


def front_table(entries):
    """
    One row per distinct (Acc-, Acc+) pair with the number of front members
    reaching it, most accurate on class 0 first.
    """
    df = pd.DataFrame(
        {
            "acc_neg": [float(e["acc_neg"]) for e in entries],
            "acc_pos": [float(e["acc_pos"]) for e in entries],
        }
    )
    counts = df.groupby(["acc_neg", "acc_pos"]).size().reset_index(name="# Models")
    counts = counts.sort_values(["acc_neg", "acc_pos"], ascending=[False, True], kind="stable")
    return pd.DataFrame(
        {
            "Class 0 accuracy": counts["acc_neg"].map(_percent).to_list(),
            "Class 1 accuracy": counts["acc_pos"].map(_percent).to_list(),
            "# Models": counts["# Models"].astype(int).to_list(),
        },
        columns=TABLE_COLUMNS,
    )


def markdown_table(table, meta=None):
    """GitHub-style table, followed by the run stamp when ``meta`` is given."""
    text = table.to_markdown(index=False, tablefmt="github") + "\n"
    if meta is not None:
        stamp = ", ".join(f"{key}={meta[key]}" for key in sorted(meta))
        text += f"\n_{stamp}_\n"
    return text


def write_front_table(entries, stem, meta=None):
    """Write ``<stem>.csv`` and ``<stem>.md`` (stamped with ``meta``); returns the table."""
    table = front_table(entries)
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(stem.with_suffix(".csv"), index=False)
    with open(stem.with_suffix(".md"), "w", encoding="utf-8") as handle:
        handle.write(markdown_table(table, meta))
    logger.info(f"📁 Saved: {stem.with_suffix('.csv')} and {stem.with_suffix('.md')}")
    return table


def best_balanced(entries):
    """Entry maximizing min(Acc+, Acc-), ties broken by the sum, then file order."""
    best = None
    for entry in entries:
        score = (min(entry["acc_pos"], entry["acc_neg"]), entry["acc_pos"] + entry["acc_neg"])
        if best is None or score > best[0]:
            best = (score, entry)
    return None if best is None else best[1]
