from setuptools import setup, find_packages


def readme():
    with open('README.rst') as f:
        return f.read()


setup(name='python-headmodel',
      version='0.1.0',
      description='python-headmodel, parametric head models, head pose fitting and head detection utilities',
      long_description=readme(),
      url='https://github.com/snakesonabrain/python-headmodel',
      keywords=['head pose', 'face alignment', 'detection', '3D morphable model'],
      author='Bruno Stuyts',
      author_email='bruno@pro-found.be',
      license='Creative Commons BY-SA 4.0',
      packages=find_packages(exclude=['tests', 'tests.*']),
      include_package_data=True,
      zip_safe=False,
      python_requires='>=3.7',
      install_requires=['numpy>=1.16.3', 'scipy>=1.2.1', 'voluptuous>=0.11.5', 'tqdm>=4.31'],
      entry_points={'console_scripts': ['pyhead=pyhead.cli:main']},
      test_suite='nose.collector',
      tests_require=['nose'],)
