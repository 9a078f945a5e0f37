"""Asset-centric threat analysis for AI pipelines.

Model a pipeline's assets and the edges between them, seed what an
adversary can do from vulnerabilities and trust assumptions, propagate
those capabilities to a fixpoint, and match the result against a
knowledge base of attacks.
"""

from pathlib import Path

__version__ = "0.1.0"

FIXTURES_DIR = Path(__file__).resolve().parent / "fixtures"


def fixture_path(name: str) -> Path:
    """Directory of a shipped fixture (``rag``, ``autorust``, ``backdoor`` ...)."""
    path = FIXTURES_DIR / name
    if not path.is_dir():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return path
