import pytest


@pytest.fixture(scope="session")
def pipeline():
    """Full train+eval pipeline, built once per session (slow)."""
    from acceptance_pipeline import build_pipeline
    artifacts = build_pipeline()
    print(f"\n[pipeline] total build time {artifacts.build_seconds:.0f}s "
          f"({artifacts.phase_seconds})")
    return artifacts
