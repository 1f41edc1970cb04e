#!/usr/bin/env python

from setuptools import find_packages, setup

setup(
    name="keychain-solver",
    use_scm_version=True,
    description="Exact, approximate and adversarial-prior solvers for the Keychain Problem family",
    keywords="keychain bayesian search laminar matching lp rounding online matching",
    url="https://github.com/keychain-solver/keychain-solver/",
    license="Apache License 2",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "networkx>=3.0",
        "requests>=2.27.0"
    ],
    extras_require={
        "test": ["pytest", "pytest-cov", "hypothesis>=6.0"]
    },
    entry_points={
        "console_scripts": ["keychain=keychain.cli:main"]
    },
    setup_requires=['setuptools_scm'],
    include_package_data=True,
    python_requires=">=3.9",
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Mathematics'
    ]
)
