import sys
from setuptools import setup, find_packages
from tvab.version import __version__  # noqa

if sys.version_info < (3, 7):
    sys.exit('Sorry, Python < 3.7 is not supported')

REQUIRED_PACKAGES = ['numpy', 'scipy', 'tqdm', 'PyYAML']

with open("README.rst", "r") as f:
    long_description = f.read()

setup(name='tvab',
      version=__version__,
      description='Distributed optimization over time-varying directed '
                  'graphs.',
      long_description=long_description,
      long_description_content_type="text/x-rst",
      license='BSD',
      packages=find_packages(exclude=['tests', 'tests.*']),
      package_data={'tvab': ['presets/*.yaml']},
      install_requires=REQUIRED_PACKAGES,
      extras_require={'plot': ['matplotlib']},
      entry_points={'console_scripts': ['tvab=tvab.__main__:main']},
      classifiers=[
          "Programming Language :: Python :: 3",
          "License :: OSI Approved :: BSD License",
          "Operating System :: OS Independent",
      ]
      )
