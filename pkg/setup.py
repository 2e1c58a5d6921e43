try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup

import os
readme_file = os.path.join(os.path.dirname(__file__),
                           'README')
long_description = open(readme_file).read()

classifiers = [
    'Development Status :: 4 - Beta',
    'Intended Audience :: Science/Research',
    'License :: OSI Approved :: MIT License',
    'Programming Language :: Python :: 3',
    'Topic :: Scientific/Engineering :: Artificial Intelligence']


setup(name='adagcn',
      version='0.1.0',
      classifiers=classifiers,
      description='Boosted graph convolutional networks for imbalanced '
                  'node classification.',
      long_description=long_description,
      packages=['adagcn', 'adagcn.tests'],
      python_requires='>=3.8',
      install_requires=['numpy>=1.17', 'scipy>=1.4', 'networkx>=2.4',
                        'scikit-learn>=0.22'],
      entry_points={'console_scripts': ['adagcn = adagcn.cli:main']},
      license='MIT',
     )
