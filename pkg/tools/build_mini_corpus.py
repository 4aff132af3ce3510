"""Regenerate the bundled mini corpus under src/crystalbench/data/mini."""

from pathlib import Path

from crystalbench.synthetic import mini_corpus, write_corpus

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "crystalbench" / "data" / "mini"
    for name, path in write_corpus(mini_corpus(seed=0), out).items():
        print(name, path)
