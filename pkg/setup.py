import io
from setuptools import setup

NAME = "varselclust"

# Read the README file
with io.open("README.md", "rt", encoding="utf8") as f:
    readme = f.read()

exec(open('__version__.py').read())

setup(
    name=NAME,
    version=version,
    license="MIT License",
    description="Variable selection for clustering: model-based role search (relevant / redundant / "
                "independent variables) compared with sparse K-means",
    long_description=readme,
    long_description_content_type="text/markdown",
    package_data={NAME: ['varselclust.ini', '__version__.py']},
    packages=[NAME],
    install_requires=[
        'numpy',
        'scipy',
        'scikit-learn',
        'pandas',
        'joblib',
        'rich',
        'rich_argparse',
        'richcolorlog',
        'jsoncolor',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        "console_scripts": [
            "varselclust = varselclust.__main__:main",
        ]
    },
    data_files=['README.md', '__version__.py'],
    include_package_data=True,
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires='>=3.9',
)
