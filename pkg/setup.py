from setuptools import setup, find_packages

setup(
    name="oudesign",
    version="0.1.0",
    description="Fisher information, ultimate efficiency and sampling designs for linear SDEs",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.9.0",
        "pydantic>=2.0.0",
        "prometheus-client>=0.16.0",
        "click>=8.1.0",
        "PyYAML>=6.0.0",
    ],
    entry_points={
        "console_scripts": [
            "oudesign=oudesign.cli:cli",
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
