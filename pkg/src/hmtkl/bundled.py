"""Bundled demonstration models and evidence.

Two model pairs ship with the package: a discrete two-state chain pair
(``hmm_a`` / ``hmm_b``) and a two-state, depth-3 binary tree pair with
zero-mean Gaussian emissions and per-level parameters (``gauss_tree_a`` /
``gauss_tree_b``).  They back the test suite's golden values and give the CLI
something to chew on out of the box.
"""

from __future__ import annotations

from importlib.resources import files

from .model import Evidence, HmmModel, HmtModel, load_evidence, load_model

__all__ = [
    "data_path",
    "data_text",
    "bundled_hmm_pair",
    "bundled_gaussian_tree_pair",
    "block_evidence",
    "bundled_block_evidence",
]


def data_path(name: str) -> str:
    """Filesystem path of a bundled data file."""
    return str(files("hmtkl").joinpath("data", name))


def data_text(name: str) -> str:
    return files("hmtkl").joinpath("data", name).read_text(encoding="utf-8")


def bundled_hmm_pair(length: int | None = None) -> tuple[HmmModel, HmmModel]:
    """The bundled discrete chain pair, optionally resized to `length`."""
    m_a = load_model(data_text("hmm_a.json"))
    m_b = load_model(data_text("hmm_b.json"))
    if length is not None:
        m_a, m_b = m_a.with_length(length), m_b.with_length(length)
    return m_a, m_b


def bundled_gaussian_tree_pair() -> tuple[HmtModel, HmtModel]:
    """The bundled Gaussian binary-tree pair (depth 3, per-level parameters)."""
    return load_model(data_text("gauss_tree_a.json")), load_model(data_text("gauss_tree_b.json"))


def block_evidence(n: int) -> Evidence:
    """Evidence with symbol blocks of ten: 1 on positions 1-10, 2 on 11-20,
    3 on 21-30, then repeating, truncated to length n."""
    if n < 1:
        raise ValueError("evidence length must be >= 1")
    return Evidence.from_external([((p - 1) // 10) % 3 + 1 for p in range(1, n + 1)])


def bundled_block_evidence() -> Evidence:
    """The bundled 100-symbol block evidence file (equals ``block_evidence(100)``)."""
    return load_evidence(data_text("evidence_block_100.txt"))
