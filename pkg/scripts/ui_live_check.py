#!/usr/bin/env python3
"""Boot the annotation service on fixture data and drive the browser
UI's logic against it with the frontend's live vitest suite.

Usage: python3 scripts/ui_live_check.py [--candidates 5]
Exits nonzero if the service fails to come up or the suite fails.
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
import urllib.request
from datetime import date
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

sys.path.insert(0, str(REPO / "src"))

from ossner.active_learning import Mention  # noqa: E402
from ossner.core import (  # noqa: E402
    EntityType,
    make_document,
    tags_to_spans,
    write_annotations,
    write_corpus,
)
from ossner.dictionary import DictEntry, Dictionary, save_lookup_tables  # noqa: E402
from ossner.matcher import annotate_corpus  # noqa: E402

FILLER = "after upgrade report crash boot screen session login".split()


def write_fixture(workdir: Path, n_true: int, n_false: int) -> None:
    types = list(EntityType)
    seeds = [(f"seedpkg{i}", types[i % len(types)]) for i in range(3)]
    docs, mentions = [], []
    for i in range(n_true + n_false):
        target = f"newent{i:03d}" if i < n_true else f"noise{i:03d}"
        seed_surface, _ = seeds[i % len(seeds)]
        words = [FILLER[i % len(FILLER)], seed_surface, "then", target, "appeared"]
        doc = make_document(f"live{i:04d}", " ".join(words), date(2010, 1, 1))
        docs.append(doc)
        token = doc.tokens[3]
        mentions.append(Mention(doc.id, token.char_start, token.char_end, target, 0.9))

    dictionary, _ = Dictionary().add(
        [DictEntry(s, t, source="seed", added_at=date(2004, 1, 1)) for s, t in seeds]
    )
    stage1, _ = annotate_corpus(docs, dictionary)

    write_corpus(workdir / "corpus.jsonl", docs)
    save_lookup_tables(workdir / "dict.tsv", dictionary)
    write_annotations(
        workdir / "stage1.jsonl",
        {ex.document.id: tags_to_spans(ex.tags) for ex in stage1.items},
    )
    with open(workdir / "mentions.jsonl", "w", encoding="utf-8") as handle:
        for m in mentions:
            handle.write(json.dumps({
                "doc_id": m.doc_id, "char_start": m.char_start,
                "char_end": m.char_end, "surface": m.surface, "score": m.score,
            }) + "\n")


def write_config(workdir: Path, port: int) -> Path:
    config = workdir / "config.toml"
    config.write_text(
        "[paths]\n"
        f'corpus = "{workdir / "corpus.jsonl"}"\n'
        f'dicts = ["{workdir / "dict.tsv"}"]\n'
        f'provider = "{workdir / "mentions.jsonl"}"\n'
        f'annotations = "{workdir / "stage1.jsonl"}"\n'
        f'out_dir = "{workdir / "out"}"\n'
        "\n[service]\n"
        f"port = {port}\n"
    )
    return config


def wait_ready(url: str, timeout: float = 20.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            with urllib.request.urlopen(f"{url}/api/progress", timeout=1) as reply:
                if reply.status == 200:
                    return
        except OSError:
            time.sleep(0.2)
    raise RuntimeError(f"service at {url} did not come up")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--candidates", type=int, default=5)
    parser.add_argument("--port", type=int, default=8641)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory(prefix="ui-live-") as tmp:
        workdir = Path(tmp)
        procs = []
        urls = []
        try:
            for offset in range(2):  # main flow + double-claim race
                subdir = workdir / f"svc{offset}"
                subdir.mkdir()
                write_fixture(subdir, n_true=args.candidates - 2, n_false=2)
                config = write_config(subdir, args.port + offset)
                procs.append(subprocess.Popen(
                    [sys.executable, "-m", "ossner.cli", "serve",
                     "--config", str(config)],
                    cwd=REPO,
                ))
                urls.append(f"http://127.0.0.1:{args.port + offset}")
            for url in urls:
                wait_ready(url)
            env = dict(os.environ)
            env["OSSNER_SERVICE_URL"] = urls[0]
            env["OSSNER_SERVICE_URL_2"] = urls[1]
            result = subprocess.run(
                ["npx", "vitest", "run", "tests/liveService.test.ts"],
                cwd=REPO / "frontend",
                env=env,
            )
            return result.returncode
        finally:
            for proc in procs:
                proc.terminate()
            for proc in procs:
                try:
                    proc.wait(timeout=10)
                except subprocess.TimeoutExpired:
                    proc.kill()


if __name__ == "__main__":
    sys.exit(main())
