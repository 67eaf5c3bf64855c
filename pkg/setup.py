# -*- coding: utf-8 -*-
from setuptools import setup

packages = [
    "bope",
    "bope.cli",
    "bope.core",
    "bope.core.baselines",
    "bope.core.data",
    "bope.core.estimator",
    "bope.core.hyperfit",
    "bope.core.kernel",
    "bope.core.synth",
    "bope.core.wcopt",
]

package_data = {"": ["*"]}

install_requires = [
    "numpy>=1.21.1,<2.0.0",
    "scipy>=1.7.1,<2.0.0",
    "scikit-learn>=1.0,<2.0",
    "pandas>=1.3.1,<3.0.0",
    "cvxopt>=1.2.6,<2.0.0",
    "quadprog>=0.1.8,<0.2.0",
    "numba>=0.53.1,<1.0.0",
    "tqdm>=4.62.0,<5.0.0",
    "click>=8.0.1,<9.0.0",
]

with open("README.md") as readme_file:
    readme = readme_file.read()

setup(
    author="K. D. Sunera Avinash Chandrasiri",
    author_email="kdsuneraavinash@gmail.com",
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 2 - Pre-Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
    ],
    description="Balanced off-policy evaluation of personalized pricing policies from logged binary-demand data",
    entry_points={
        "console_scripts": [
            "bope=bope.bope:cli",
        ],
    },
    install_requires=install_requires,
    extras_require={"test": ["pytest>=6.2"]},
    license="MIT license",
    long_description=readme,
    packages=packages,
    package_data=package_data,
    keywords="bope off-policy-evaluation pricing",
    name="bope",
    version="0.1.0",
    zip_safe=False,
)
