import sys

sys.stderr.write("""
Unsupported installation method: python setup.py
Please use `python -m pip install .` instead.
"""
)
#sys.exit(1)
from setuptools import setup

setup(
    name="sotneuron",
    install_requires = ["pydantic>=2", "typing_extensions", "numpy", "scipy", "python-dotenv", 'tomli; python_version < "3.11"'],
)
