import setuptools

with open("VERSION", 'r') as f:
    version = f.read().strip()

with open("README.md", 'r') as f:
    long_description = f.read()

setuptools.setup(
   name='cimsim',
   version=version,
   description='Cycle-level simulator and scheduling compiler for a RISC-V core with a ternary CIM macro.',
   package_dir={'': 'src'},
   packages=setuptools.find_packages(where='src'),
   package_data={'CimSim': ['Assets/*.yaml', 'Assets/models/*.yaml']},
   install_requires=['numpy>=1.24', 'PyYAML>=6.0', 'Pillow>=9.0.0'],
   extras_require={'test': ['pytest>=7.0']},
   entry_points={'console_scripts': ['cimsim=CimSim.Cli:main']},
   license="MIT",
   long_description=long_description,
   long_description_content_type="text/markdown",
   include_package_data=True,
   python_requires='>=3.10',
)
