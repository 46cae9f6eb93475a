from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.split("#")[0].strip()
        for line in fh.read().splitlines()
        if line.split("#")[0].strip()
    ]

setup(
    name="quantum-frank-wolfe-emulation",
    version="0.1.1",
    author="QFW Team",
    description="Frank-Wolfe solvers with classically emulated quantum linear minimization oracles",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "examples*"]),
    py_modules=["config", "launch_qfw"],
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "qfw=launch_qfw:main",
        ],
    },
)
