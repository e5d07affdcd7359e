# Symplectic and Dirac analysis workbench for constrained models
