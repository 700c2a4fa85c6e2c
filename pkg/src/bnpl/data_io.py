"""Ranking CSV ingestion and the files the CLI writes.

Data is CSV (`epoch,rank,item`, one list per epoch), ground truth and configs
are JSON, chains are JSON lines (a header record per chain followed by its
draws). Writers use fixed float formatting and ``\\n`` line endings so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections.abc import Iterator, Mapping, Sequence
from datetime import date
from pathlib import Path
from typing import Annotated, Any

import numpy as np
import pandas as pd
from pydantic import Field, TypeAdapter, ValidationError

from bnpl.config import RunConfig
from bnpl.errors import DataValidationError, DomainError
from bnpl.measures import AtomicMeasure
from bnpl.models import (
    ChainDrawRecord,
    ChainHeaderRecord,
    ChainRecord,
    GammaProcessParams,
    PartialRanking,
    PosteriorChain,
    RankingDataset,
    RankingRecord,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["epoch", "rank", "item"]
SUMMARY_COLUMNS = ["epoch", "item", "posterior_mean", "q025", "q975", "new_item_prob"]
MANIFEST_FILE = "manifest.json"

_PARSER_LINE = re.compile(r"line (\d+)")
_JSON_OBJECT: TypeAdapter[dict[str, Any]] = TypeAdapter(dict[str, Any])
_CHAIN_RECORD: TypeAdapter[ChainRecord] = TypeAdapter(
    Annotated[ChainRecord, Field(discriminator="type")]
)


# ---- Ingestion --------------------------------------------------------------


def _field_errors(exc: ValidationError) -> dict[str, str]:
    return {
        ".".join(str(p) for p in err["loc"]) or "row": err["msg"]
        for err in exc.errors()
    }


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise DataValidationError(
            f"{path} is empty", line_number=1, error_code="empty_file"
        ) from e
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        raise DataValidationError(
            f"unparsable row in {path}: {e}",
            line_number=int(match.group(1)) if match else None,
            error_code="unparsable_row",
        ) from e
    except UnicodeDecodeError as e:
        raise DataValidationError(
            f"{path} is not UTF-8 encoded", error_code="bad_encoding"
        ) from e


def _parse_records(frame: pd.DataFrame) -> list[tuple[int, RankingRecord]]:
    records: list[tuple[int, RankingRecord]] = []
    kind: type | None = None
    for offset, row in enumerate(frame.itertuples(index=False, name=None)):
        line = offset + 2
        values = [v.strip() if isinstance(v, str) else None for v in row]
        if not any(values):
            continue
        try:
            record = RankingRecord.model_validate(
                dict(zip(CSV_COLUMNS, values, strict=True))
            )
        except ValidationError as e:
            errors = _field_errors(e)
            raise DataValidationError(
                "invalid row: "
                + "; ".join(f"{k}: {msg}" for k, msg in errors.items()),
                line_number=line,
                field_errors=errors,
                error_code="invalid_row",
            ) from e
        if kind is None:
            kind = type(record.epoch)
        elif type(record.epoch) is not kind:
            raise DataValidationError(
                "epochs mix integers and dates",
                line_number=line,
                epoch=str(record.epoch),
                error_code="mixed_epochs",
            )
        records.append((line, record))
    return records


def ingest_csv(path: str | Path, time_unit_days: float = 7.0) -> RankingDataset:
    """Read and validate an `epoch,rank,item` file.

    Epochs are integers or ISO-8601 dates; each epoch holds one list whose
    ranks must run 1..m. Epochs are sorted and re-indexed from 0. Gaps are
    index differences for integer epochs and day differences divided by
    ``time_unit_days`` for dates.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"ranking file not found: {path}")
    frame = _read_frame(path)
    header = [str(c).strip() for c in frame.columns]
    if header != CSV_COLUMNS:
        raise DataValidationError(
            f"expected header {','.join(CSV_COLUMNS)}, got {','.join(header)}",
            line_number=1,
            error_code="bad_header",
        )

    ranks: dict[int | date, dict[int, tuple[str, int]]] = {}
    seen_items: dict[int | date, set[str]] = {}
    for line, rec in _parse_records(frame):
        label = str(rec.epoch)
        by_rank = ranks.setdefault(rec.epoch, {})
        if rec.rank in by_rank:
            raise DataValidationError(
                f"duplicate rank {rec.rank} in epoch {label}",
                line_number=line,
                epoch=label,
                error_code="duplicate_rank",
            )
        items = seen_items.setdefault(rec.epoch, set())
        if rec.item in items:
            raise DataValidationError(
                f"item {rec.item!r} listed twice in epoch {label}",
                line_number=line,
                epoch=label,
                error_code="duplicate_item",
            )
        by_rank[rec.rank] = (rec.item, line)
        items.add(rec.item)

    if not ranks:
        raise DataValidationError(f"{path} holds no rankings", error_code="empty_file")

    keys = sorted(ranks)  # type: ignore[type-var]
    lists: list[tuple[PartialRanking, ...]] = []
    for index, key in enumerate(keys):
        by_rank = ranks[key]
        present = sorted(by_rank)
        if present != list(range(1, len(present) + 1)):
            missing = next(r for r in range(1, len(present) + 2) if r not in by_rank)
            after = min(r for r in present if r > missing)
            raise DataValidationError(
                f"ranks in epoch {key} skip rank {missing}",
                line_number=by_rank[after][1],
                epoch=str(key),
                error_code="rank_gap",
            )
        ordered = tuple(by_rank[r][0] for r in present)
        lists.append((PartialRanking(ordered, epoch=index),))

    if keys and isinstance(keys[0], date):
        gaps = tuple(
            (b - a).days / time_unit_days  # type: ignore[operator]
            for a, b in zip(keys[:-1], keys[1:], strict=True)
        )
    else:
        gaps = tuple(
            float(b - a)  # type: ignore[operator]
            for a, b in zip(keys[:-1], keys[1:], strict=True)
        )
    logger.info("read %d epochs from %s", len(keys), path)
    return RankingDataset(
        epoch_labels=tuple(str(k) for k in keys),
        lists=tuple(lists),
        gaps=gaps,
    )


def dataset_from_lists(
    epochs: Sequence[Sequence[PartialRanking]],
    gaps: Sequence[float] = (),
) -> RankingDataset:
    """Wrap in-memory lists as a dataset with integer epoch labels."""
    return RankingDataset(
        epoch_labels=tuple(str(t) for t in range(len(epochs))),
        lists=tuple(
            tuple(PartialRanking(r.items, epoch=t) for r in lists)
            for t, lists in enumerate(epochs)
        ),
        gaps=tuple(gaps) if gaps else tuple(1.0 for _ in range(len(epochs) - 1)),
    )


# ---- Emission ---------------------------------------------------------------


def write_rankings_csv(dataset: RankingDataset, path: str | Path) -> Path:
    path = Path(path)
    crowded = [
        label
        for label, lists in zip(dataset.epoch_labels, dataset.lists, strict=True)
        if len(lists) > 1
    ]
    if crowded:
        raise DomainError(
            f"the CSV format holds one list per epoch; epochs {crowded} have more"
        )
    frame = pd.DataFrame(
        [r.model_dump(mode="json") for r in dataset.to_records()],
        columns=CSV_COLUMNS,
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(payload: Mapping[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(_JSON_OBJECT.dump_json(dict(payload), indent=2) + b"\n")
    return path


def static_truth(params: GammaProcessParams, measure: AtomicMeasure) -> dict[str, Any]:
    """JSON payload describing the measure behind a static dataset."""
    return {
        "alpha": params.alpha,
        "tau": params.tau,
        "weights": dict(measure.atoms),
        "remainder_mass": measure.remainder_mass,
        "total_mass": measure.total_mass,
    }


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return RunConfig.model_validate_json(path.read_text(encoding="utf-8"))


def _chain_records(
    chain: PosteriorChain,
    index: int,
    epoch_labels: Sequence[str],
    seed: int | None,
) -> Iterator[ChainRecord]:
    if chain.model == "finite":
        raise DomainError("finite reference chains are not written to chain files")
    yield ChainHeaderRecord(
        model=chain.model,
        chain=index,
        items=list(chain.items),
        epoch_labels=list(epoch_labels),
        seed=seed,
    )
    for d in range(chain.n_draws):
        yield ChainDrawRecord(
            chain=index,
            sweep=int(chain.sweeps[d]),
            alpha=float(chain.alpha[d]),
            phi=chain.phi[d].tolist(),
            xi=None if chain.xi is None else float(chain.xi[d]),
            w_star=chain.w_star[d].tolist(),
            weights=chain.weights[d].tolist(),
        )


def write_chain_jsonl(
    chains: Sequence[PosteriorChain],
    path: str | Path,
    epoch_labels: Sequence[str],
    seeds: Sequence[int | None] | None = None,
) -> Path:
    path = Path(path)
    seeds = list(seeds) if seeds is not None else [None] * len(chains)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for i, chain in enumerate(chains):
            for record in _chain_records(chain, i, epoch_labels, seeds[i]):
                fh.write(record.model_dump_json() + "\n")
    return path


def _assemble_chain(
    header: ChainHeaderRecord, draws: list[ChainDrawRecord]
) -> PosteriorChain:
    T, K = len(header.epoch_labels), len(header.items)
    n_phi = T - 1 if header.model == "dynamic" else 0
    for d in draws:
        if (
            len(d.w_star) != T
            or len(d.weights) != T
            or any(len(row) != K for row in d.weights)
            or len(d.phi) != n_phi
        ):
            raise DataValidationError(
                f"draw at sweep {d.sweep} of chain {header.chain} does not match "
                f"its header ({T} epochs, {K} items)",
                error_code="chain_shape_mismatch",
            )
    n = len(draws)
    xi = [d.xi for d in draws]
    return PosteriorChain(
        model=header.model,
        items=tuple(header.items),
        sweeps=np.array([d.sweep for d in draws], dtype=np.int64),
        weights=np.array([d.weights for d in draws], dtype=float).reshape(n, T, K),
        w_star=np.array([d.w_star for d in draws], dtype=float).reshape(n, T),
        alpha=np.array([d.alpha for d in draws], dtype=float),
        phi=np.array([d.phi for d in draws], dtype=float).reshape(n, n_phi),
        xi=np.array(xi, dtype=float) if xi and None not in xi else None,
    )


def read_chain_jsonl(path: str | Path) -> tuple[list[PosteriorChain], list[str]]:
    """Parse a chain file back into chains plus the epoch labels they share."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"chain file not found: {path}")
    headers: dict[int, ChainHeaderRecord] = {}
    draws: dict[int, list[ChainDrawRecord]] = {}
    with path.open(encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = _CHAIN_RECORD.validate_json(line)
            except ValidationError as e:
                raise DataValidationError(
                    f"malformed chain record: {e.errors()[0]['msg']}",
                    line_number=line_number,
                    field_errors=_field_errors(e),
                    error_code="malformed_chain_record",
                ) from e
            if isinstance(record, ChainHeaderRecord):
                if record.chain in headers:
                    raise DataValidationError(
                        f"chain {record.chain} has two headers",
                        line_number=line_number,
                        error_code="duplicate_chain_header",
                    )
                headers[record.chain] = record
            else:
                if record.chain not in headers:
                    raise DataValidationError(
                        f"draw for chain {record.chain} precedes its header",
                        line_number=line_number,
                        error_code="orphan_draw",
                    )
                draws.setdefault(record.chain, []).append(record)
    if not headers:
        raise DataValidationError(f"{path} holds no chains", error_code="empty_chain")
    order = sorted(headers)
    labels = headers[order[0]].epoch_labels
    chains = [_assemble_chain(headers[i], draws.get(i, [])) for i in order]
    return chains, list(labels)


def pool_chains(chains: Sequence[PosteriorChain]) -> PosteriorChain:
    """Concatenate the draws of chains over the same items."""
    if not chains:
        raise DomainError("no chains to pool")
    first = chains[0]
    if any(c.items != first.items or c.model != first.model for c in chains):
        raise DomainError("chains disagree on model or items")
    if len(chains) == 1:
        return first
    xis = [c.xi for c in chains if c.xi is not None]
    return PosteriorChain(
        model=first.model,
        items=first.items,
        sweeps=np.concatenate([c.sweeps for c in chains]),
        weights=np.concatenate([c.weights for c in chains]),
        w_star=np.concatenate([c.w_star for c in chains]),
        alpha=np.concatenate([c.alpha for c in chains]),
        phi=np.concatenate([c.phi for c in chains]),
        xi=np.concatenate(xis) if len(xis) == len(chains) else None,
    )


def summary_frame(
    chains: Sequence[PosteriorChain], epoch_labels: Sequence[str]
) -> pd.DataFrame:
    pooled = pool_chains(chains)
    return pd.DataFrame(pooled.summary_rows(epoch_labels), columns=SUMMARY_COLUMNS)


def write_summary_csv(
    chains: Sequence[PosteriorChain],
    path: str | Path,
    epoch_labels: Sequence[str],
) -> Path:
    """Posterior mean and 95% interval of every normalized weight per epoch.

    The ``__unseen__`` rows carry the mass of all items never observed.
    """
    path = Path(path)
    summary_frame(chains, epoch_labels).to_csv(
        path, index=False, float_format="%.12g", lineterminator="\n"
    )
    return path


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(files: Sequence[Path], out_dir: str | Path) -> Path:
    """SHA-256 of every artifact, keyed by file name."""
    out_dir = Path(out_dir)
    payload = {p.name: sha256_file(p) for p in sorted(files, key=lambda p: p.name)}
    return write_json(payload, out_dir / MANIFEST_FILE)
