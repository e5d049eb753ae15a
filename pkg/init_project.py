#!/usr/bin/env python3
"""
Project Initialization Script
Checks the environment, creates working directories and writes a default
training config when none exists.
"""

import importlib
import sys
from pathlib import Path

import click
from loguru import logger

REQUIRED_PACKAGES = [
    'numpy',
    'scipy',
    'pandas',
    'matplotlib',
    'torch',
    'einops',
    'yaml',
    'click',
    'loguru',
]

DIRECTORIES = [
    'data',
    'checkpoints',
    'runs',
    'logs',
    'exports',
]


def check_python_version() -> bool:
    """Verify Python version is 3.9+"""
    version = sys.version_info
    if version < (3, 9):
        logger.error(f"Python 3.9+ required. Found: {version.major}.{version.minor}")
        return False
    logger.info(f"Python {version.major}.{version.minor}.{version.micro}")
    return True


def check_dependencies() -> bool:
    missing = []
    for package in REQUIRED_PACKAGES:
        try:
            importlib.import_module(package)
        except ImportError:
            missing.append(package)
    if missing:
        logger.warning(f"Missing packages: {', '.join(missing)}. Run: pip install -r requirements.txt")
        return False
    logger.info("All required packages importable")
    return True


def create_directories(root: Path) -> None:
    for directory in DIRECTORIES:
        (root / directory).mkdir(parents=True, exist_ok=True)
        logger.debug(f"Created: {directory}")
    logger.info(f"Working directories ready: {', '.join(DIRECTORIES)}")


def create_config_file(root: Path, force: bool = False) -> Path:
    """Write config/default.yaml from the built-in defaults unless it exists."""
    from src.training.config import TrainConfig

    path = root / "config" / "default.yaml"
    if path.exists() and not force:
        logger.info(f"Keeping existing config: {path}")
        return path
    TrainConfig().to_yaml(path)
    logger.info(f"Configuration file created: {path}")
    return path


def create_gitignore(root: Path) -> None:
    path = root / ".gitignore"
    if path.exists():
        return
    path.write_text("""# Python
__pycache__/
*.py[cod]
venv/
*.egg-info/
.pytest_cache/
.hypothesis/

# Data and artifacts
data/
checkpoints/
runs/
exports/
*.ckpt
*.embd
*.motf
*.temb

# Logs
logs/
*.log
""")
    logger.info(".gitignore created")


@click.command()
@click.option("--root", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--force-config", is_flag=True, help="Overwrite config/default.yaml")
def main(root: str, force_config: bool):
    """Initialize a working copy of the project."""
    root_path = Path(root)
    if not check_python_version():
        sys.exit(1)
    check_dependencies()
    create_directories(root_path)
    create_config_file(root_path, force_config)
    create_gitignore(root_path)
    logger.info("Next: python -m src.cli synth --out data/synth/manifest.jsonl")


if __name__ == "__main__":
    main()
