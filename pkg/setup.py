from setuptools import setup, find_packages

setup(
    name="qsing",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"qsing": ["logging_config.json"]},
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "pydantic>=2.0",
        "pydantic-settings>=2.0",
        "PyYAML>=6.0",
        "python-dotenv>=1.0.0",
    ],
    entry_points={"console_scripts": ["qsing=qsing:main"]},
    python_requires=">=3.11",
)
