"""PINN and finite-element solvers for 2D heat conduction with a moving Gaussian source."""
