"""Shared fixtures and the acceptance-suite result reporter."""

from __future__ import annotations

import numpy as np
import pytest

from vendorlens.corpus import Ad, Corpus

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def make_ad(
    text: str,
    vendor: str = "v",
    market: str = "m",
    ad_id: str | None = None,
    _counter: list = [0],
) -> Ad:
    """Construct an Ad directly; merged_text is taken verbatim (tests may use
    strings that never passed through ingestion)."""
    _counter[0] += 1
    return Ad(
        ad_id=ad_id or f"t-{_counter[0]:06d}",
        market=market,
        vendor_raw=vendor,
        vendor_norm=vendor.lower(),
        title=text,
        description="",
        merged_text=text,
        token_count=len(text.split()),
    )


def make_corpus(*ads: Ad) -> Corpus:
    return Corpus(ads=tuple(ads), provenance="test")


def corpus_of(spec: dict[tuple[str, str], list[str]]) -> Corpus:
    """{(vendor, market): [texts...]} -> Corpus."""
    ads = []
    for (vendor, market), texts in spec.items():
        for text in texts:
            ads.append(make_ad(text, vendor=vendor, market=market))
    return make_corpus(*ads)


def records_jsonl(path, records) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_", "", 1)
    _ACCEPTANCE_RESULTS.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{outcome}] {name}")
