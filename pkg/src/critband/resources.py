"""Access to configuration fixtures shipped with the package.

The 16 superclass labels, the 17 OOD dataset tags, the label mappings, and
the reference metrics table are data files, not code: swap them out to run
the toolkit against a different category system.
"""

from importlib import resources


def data_path(name: str):
    """Filesystem path of a bundled data file."""
    return resources.files("critband") / "data" / name


def load_superclasses() -> list[str]:
    """The configured superclass label set (16 by default)."""
    text = data_path("superclasses16.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def load_ood_dataset_tags() -> list[str]:
    """The configured OOD evaluation dataset tags (17 by default)."""
    text = data_path("ood_datasets17.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]
