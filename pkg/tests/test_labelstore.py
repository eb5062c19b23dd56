from __future__ import annotations

import json
import threading

import pytest

from segqc.dataset import QualityLabel
from segqc.errors import StorageError
from segqc.labelstore import LabelStore


class TestAppendAndReplay:
    def test_append_then_replay(self, tmp_path):
        log = tmp_path / "labels.jsonl"
        store = LabelStore(log)
        store.append("c1", QualityLabel.ACCEPT, "a")
        store.append("c1", QualityLabel.REJECT, "b", note="changed my mind")
        store.append("c2", QualityLabel.ACCEPT, "a")

        replayed = LabelStore(log)
        assert len(replayed) == 3
        assert replayed.effective_labels() == {
            "c1": QualityLabel.REJECT,
            "c2": QualityLabel.ACCEPT,
        }
        assert [e.reviewer for e in replayed.history("c1")] == ["a", "b"]
        assert replayed.history("c1")[1].note == "changed my mind"

    def test_missing_file_is_empty(self, tmp_path):
        assert len(LabelStore(tmp_path / "nope.jsonl")) == 0

    def test_timestamps_monotone_nondecreasing(self, tmp_path):
        store = LabelStore(tmp_path / "labels.jsonl")
        stamps = [store.append(f"c{i}", QualityLabel.ACCEPT, "a").timestamp for i in range(5)]
        assert stamps == sorted(stamps)

    def test_concurrent_appends_keep_every_event(self, tmp_path):
        log = tmp_path / "labels.jsonl"
        store = LabelStore(log)

        def worker(tag: int):
            for i in range(20):
                store.append(f"case-{tag}-{i}", QualityLabel.REJECT, f"rev{tag}")

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(LabelStore(log)) == 80
        for line in log.read_text().splitlines():
            json.loads(line)


class TestCorruption:
    def test_torn_trailing_line_is_ignored(self, tmp_path):
        log = tmp_path / "labels.jsonl"
        store = LabelStore(log)
        store.append("c1", QualityLabel.ACCEPT, "a")
        with open(log, "a", encoding="utf-8") as fh:
            fh.write('{"case_id": "c2", "label": "rej')  # crash mid-write

        replayed = LabelStore(log)
        assert len(replayed) == 1
        assert replayed.effective_labels() == {"c1": QualityLabel.ACCEPT}

    def test_schema_corruption_refuses_to_start(self, tmp_path):
        log = tmp_path / "labels.jsonl"
        store = LabelStore(log)
        store.append("c1", QualityLabel.ACCEPT, "a")
        good_line = log.read_text()
        log.write_text('{"case_id": "c9", "label": "maybe"}\n' + good_line)
        with pytest.raises(StorageError) as exc:
            LabelStore(log)
        assert "line 1" in str(exc.value)

    def test_append_after_torn_tail_heals_the_log(self, tmp_path):
        log = tmp_path / "labels.jsonl"
        LabelStore(log).append("c1", QualityLabel.ACCEPT, "a")
        with open(log, "a", encoding="utf-8") as fh:
            fh.write('{"torn')
        store = LabelStore(log)
        store.append("c2", QualityLabel.REJECT, "b")
        # the fragment got its own line, the new event parses, nothing
        # acknowledged was lost
        final = LabelStore(log)
        assert final.effective_labels() == {
            "c1": QualityLabel.ACCEPT,
            "c2": QualityLabel.REJECT,
        }
