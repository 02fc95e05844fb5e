"""On-disk formats: TREC run files, TREC qrels, training-pair and
report records (line-delimited JSON).
"""

from __future__ import annotations

import json
from pathlib import Path

from .index import RankedList
from .rerank import TrainingPair


def write_run(rankings: dict[str, RankedList], path: str | Path, runtag: str) -> None:
    """TREC format: ``qid Q0 docid rank score runtag``, sorted by qid."""
    with Path(path).open("w", encoding="utf-8") as out:
        for qid in sorted(rankings):
            for rank, (doc_id, score) in enumerate(rankings[qid].entries, start=1):
                out.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {runtag}\n")


def read_run(path: str | Path) -> tuple[dict[str, RankedList], str]:
    """Reads a TREC run file back into rank order; returns (rankings, runtag)."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    runtag = ""
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 TREC run columns, got {len(parts)}")
            qid, _, doc_id, rank, score, runtag = parts
            rows.setdefault(qid, []).append((int(rank), doc_id, float(score)))
    rankings = {}
    for qid, entries in rows.items():
        entries.sort()
        rankings[qid] = RankedList(query_id=qid, entries=[(d, s) for _, d, s in entries])
    return rankings, runtag


def write_qrels(qrels: dict[str, frozenset[str]], path: str | Path) -> None:
    """TREC qrels format: ``qid 0 docid 1``."""
    with Path(path).open("w", encoding="utf-8") as out:
        for qid in sorted(qrels):
            for doc_id in sorted(qrels[qid]):
                out.write(f"{qid} 0 {doc_id} 1\n")


def read_qrels(path: str | Path) -> dict[str, frozenset[str]]:
    raw: dict[str, set[str]] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 qrels columns, got {len(parts)}")
            qid, _, doc_id, rel = parts
            if rel != "0":
                raw.setdefault(qid, set()).add(doc_id)
    return {qid: frozenset(docs) for qid, docs in raw.items()}


def write_pairs(pairs: list[TrainingPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as out:
        for p in pairs:
            record = {
                "qid": p.query_id,
                "docid": p.candidate_id,
                "label": 1 if p.relevant else 0,
                "rank": p.rank,
                "query": p.query_text,
                "candidate": p.candidate_text,
            }
            out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            out.write("\n")


def read_pairs(path: str | Path) -> list[TrainingPair]:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            pairs.append(TrainingPair(
                query_id=obj["qid"], candidate_id=obj["docid"],
                relevant=bool(obj["label"]), rank=int(obj["rank"]),
                query_text=obj["query"], candidate_text=obj["candidate"]))
    return pairs


def write_jsonl(records, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as out:
        for record in records:
            out.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            out.write("\n")
