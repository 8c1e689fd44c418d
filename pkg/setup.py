"""Setup script for twochan."""

from pathlib import Path

from setuptools import setup

# Read the README file
readme_path = Path(__file__).parent / "README.md"
long_description = readme_path.read_text(encoding="utf-8") if readme_path.exists() else ""

# Read requirements
requirements_path = Path(__file__).parent / "requirements.txt"
requirements = []
if requirements_path.exists():
    requirements = [
        line.split("#")[0].strip()
        for line in requirements_path.read_text().splitlines()
        if line.strip() and not line.startswith("#")
    ]
    requirements = [r for r in requirements if not r.startswith("pytest")]

setup(
    name="twochan",
    version="0.1.0",
    author="twochan developers",
    author_email="team@example.com",
    description="Boundedness analysis and rate scheduling for two-channel Kalman filters",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=["src"],
    py_modules=["cli"],
    package_data={
        "": ["templates/*.jinja2", "configs/*.json"],
    },
    include_package_data=True,
    python_requires=">=3.10",
    install_requires=requirements,
    extras_require={
        "scs": ["scs>=3.2.0"],
        "dev": [
            "pytest>=7.4.0",
            "pytest-cov>=4.1.0",
            "ruff>=0.1.0",
            "mypy>=1.6.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "twochan=cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    keywords="kalman ekf intermittent lmi sdp scheduling",
)
